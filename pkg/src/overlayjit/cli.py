"""``overlayjit`` command-line driver.

Exit status: 0 success, 1 user error, 2 compilation failure,
3 verification failure.  Failures print a JSON object with a stable
``error`` code on stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import random
import sys
import time
from pathlib import Path

from . import corpus
from .backend import decode_config
from .errors import OverlayError, VerificationFailed
from .frontend import export_dot, parse_kernel
from .fumap import export_netlist
from .overlay import OverlayArch, build_arch, dump_arch, load_arch
from .par import dump_placement, dump_routing, format_report, par_report
from .par.placer import ParSeed, render_grid
from .pipeline import STAGES, compile_kernel, map_kernel

log = logging.getLogger("overlayjit")

#: reference configuration bandwidth: 1061 bytes loaded in 42.4 us
CONFIG_BYTES_PER_US = 1061 / 42.4


class UserError(OverlayError):
    code = "usage_error"
    exit_status = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UserError(message)


def _emit(args, payload: dict, text: str) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        sys.stdout.write(text)


def _arch(args) -> OverlayArch:
    arch = load_arch(args.arch) if args.arch else build_arch()
    if getattr(args, "fmax", None) is not None:
        arch = build_arch(**{**arch.to_dict(), "fmax_mhz": args.fmax})
    return arch


def _kernel_source(ref: str) -> tuple[str, str]:
    """Read a kernel from a path, or from the bundled corpus by name."""
    p = Path(ref)
    if p.is_file():
        return p.read_text(), str(p)
    if ref in corpus.NAMES:
        return corpus.kernel_source(ref), f"corpus:{ref}"
    raise UserError(f"kernel file not found: {ref}")


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# -- compile ---------------------------------------------------------------------

def cmd_compile(args) -> int:
    src, kernel_ref = _kernel_source(args.kernel)
    arch = _arch(args)
    out = Path(args.out or "build")
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    r = compile_kernel(src, arch, ParSeed(seed=args.seed), copies=args.copies)
    files = {
        "kernel": ("kernel.cl", src),
        "arch": ("arch.txt", dump_arch(arch)),
        "dfg": ("dfg.dot", export_dot(r.dfg)),
        "fudfg": ("fudfg.dot", export_dot(r.fudfg)),
        "netlist": ("netlist.txt", export_netlist(r.netlist)),
        "placement": ("placement.txt", dump_placement(r.placement)),
        "routing": ("routing.txt", dump_routing(r.routing, r.rr)),
    }
    paths = {}
    for key, (name, text) in files.items():
        (out / name).write_text(text)
        paths[key] = out / name
    (out / "config.bin").write_bytes(r.blob)
    paths["config"] = out / "config.bin"
    report = par_report(r.placement, r.routing, r.rr,
                        {"place": r.timings_ms["place"], "route": r.timings_ms["route"]})
    (out / "par_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    # reports carry wall times or renderer output, so they are listed but not hashed
    reports = {"par_report": out / "par_report.json"}
    if not args.no_plots:
        from .plotting import plot_placement
        reports["placement_png"] = plot_placement(r.placement, out / "placement.png")
    manifest = {
        "kernel_file": kernel_ref,
        "arch_file": args.arch,
        "arch": arch.to_dict(),
        "seed": args.seed,
        "output_dir": str(out),
        "kernel": r.ast.name,
        "ops_per_kernel": r.ops_per_kernel,
        "fu_count": len(r.fudfg.fu_nodes),
        "copies": r.copies,
        "replication": {"fu_limit": r.plan.fu_limit, "io_limit": r.plan.io_limit,
                        "binding": r.plan.binding_reason},
        "router_iterations": r.routing.iterations,
        "pipeline_latency": max(r.delays.output_latency(r.netlist).values()),
        "total_bytes": len(r.blob),
        "config_load_us_estimate": round(len(r.blob) / CONFIG_BYTES_PER_US, 2),
        "timings_ms": {s: round(r.timings_ms.get(s, 0.0), 3) for s in STAGES},
        "wall_ms": round((time.perf_counter() - t0) * 1000.0, 3),
        "artifacts": {k: {"path": p.name, "sha256": _sha(p)} for k, p in sorted(paths.items())},
        "reports": {k: p.name for k, p in sorted(reports.items())},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    lines = [
        f"kernel {r.ast.name}: {r.ops_per_kernel} ops, {len(r.fudfg.fu_nodes)} FUs, "
        f"{r.copies} copies ({r.plan.binding_reason})",
        f"overlay {arch.rows}x{arch.cols}, {arch.dsps_per_fu}-DSP FU, channel width {arch.channel_width}",
        *("  " + row for row in render_grid(r.placement)),
        format_report(report).rstrip(),
        f"configuration {len(r.blob)} bytes (about {manifest['config_load_us_estimate']} us at the "
        f"reference load rate)",
        f"artifacts written to {out}/",
    ]
    _emit(args, manifest, "\n".join(lines) + "\n")
    return 0


# -- simulate --------------------------------------------------------------------

def _read_streams(path: str, ast, copies: int) -> dict[tuple[int, int], list[int]]:
    """CSV with one column per input.  A header ``A`` feeds every copy;
    ``2:A`` feeds only copy 2."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UserError(f"{path}: empty stream file")
    header, body = rows[0], rows[1:]
    index = {p: i for i, p in enumerate(ast.inputs)}
    streams: dict[tuple[int, int], list[int]] = {}
    for col, name in enumerate(header):
        name = name.strip()
        copy_s, _, param = name.rpartition(":")
        if param not in index:
            raise UserError(f"{path}: column {name!r} is not a kernel input")
        try:
            values = [int(r[col]) for r in body]
        except (ValueError, IndexError) as e:
            raise UserError(f"{path}: bad value in column {name!r}: {e}") from None
        targets = [int(copy_s)] if copy_s else range(copies)
        if any(not 0 <= c < copies for c in targets):
            raise UserError(f"{path}: column {name!r} names a copy outside 0..{copies - 1}")
        for c in targets:
            streams[(c, index[param])] = values
    return streams


def cmd_simulate(args) -> int:
    from .sim import measure_throughput, simulate, verify

    d = Path(args.artifacts)
    manifest_path = d / "manifest.json"
    if not manifest_path.is_file():
        raise UserError(f"{d} has no manifest.json; run 'compile' first")
    manifest = json.loads(manifest_path.read_text())
    arch = load_arch(d / "arch.txt")
    if args.fmax is not None:
        arch = build_arch(**{**arch.to_dict(), "fmax_mhz": args.fmax})
    ast = parse_kernel((d / "kernel.cl").read_text())
    config = decode_config(Path(args.config or d / "config.bin").read_bytes(), arch)
    copies = manifest["copies"]
    if args.streams:
        streams = _read_streams(args.streams, ast, copies)
    else:
        rng = random.Random(args.seed)
        lo, hi = -(1 << (arch.data_width - 1)), (1 << (arch.data_width - 1)) - 1
        streams = {(c, i): [rng.randint(lo, hi) for _ in range(args.length)]
                   for c in range(copies) for i, p in enumerate(ast.inputs)}
    # inputs optimised away have no pad; drop their columns
    used = {(p.copy, p.index) for p in config.pads if p.mode == 1}
    streams = {k: v for k, v in streams.items() if k in used}
    trace = simulate(config, arch, streams)
    verdict = verify(trace, ast, streams, arch.data_width)
    out = Path(args.out) if args.out else d
    out.mkdir(parents=True, exist_ok=True)
    if args.trace:
        Path(args.trace).write_text(trace.to_jsonl())
    keys = sorted(trace.outputs)
    with open(out / "outputs.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{c}:{ast.outputs[j]}" for c, j in keys])
        for row in zip(*(trace.values(k) for k in keys)):
            w.writerow(row)
    payload = {"verdict": verdict.to_dict(), "cycles": trace.cycles,
               "steady_state_ii": trace.steady_state_ii, "pipeline_latency": trace.pipeline_latency,
               "structural_latency": manifest.get("pipeline_latency")}
    text = [f"verification {'PASS' if verdict else 'FAIL'}: {verdict.checked} values checked"]
    if not verdict:
        m = verdict.mismatch
        text.append(f"first mismatch: copy {m.copy} output {m.output} element {m.index}: "
                    f"expected {m.expected}, got {m.actual} ({verdict.reason})")
    else:
        tp = measure_throughput(trace, arch, manifest["ops_per_kernel"], copies)
        payload["throughput"] = tp.to_dict()
        text.append(f"cycles {trace.cycles}, II {trace.steady_state_ii}, latency {trace.pipeline_latency}")
        text.append(f"{tp.copies} copies x {tp.ops_per_kernel} ops at {tp.fmax_mhz:g} MHz: "
                    f"{tp.gops:.2f} GOPS ({100 * tp.utilization:.0f}% of {tp.peak_gops:.1f} GOPS peak)")
    _emit(args, payload, "\n".join(text) + "\n")
    if not verdict:
        err = VerificationFailed(text[-1])
        print(json.dumps(err.to_dict()), file=sys.stderr)
        return err.exit_status
    return 0


# -- scaling-report --------------------------------------------------------------

def _sizes(text: str) -> list[int]:
    if "-" in text:
        a, b = text.split("-", 1)
        return list(range(int(a), int(b) + 1))
    return [int(t) for t in text.split(",")]


def cmd_scaling_report(args) -> int:
    from .reports import scaling_gnuplot, scaling_rows, to_csv

    src, _ = _kernel_source(args.kernel)
    base = load_arch(args.arch) if args.arch else build_arch()
    out = Path(args.out or "scaling")
    out.mkdir(parents=True, exist_ok=True)
    try:
        sizes = _sizes(args.sizes)
    except ValueError:
        raise UserError(f"bad --sizes value {args.sizes!r}") from None
    dsps = [1, 2] if args.fu_type == "both" else [int(args.fu_type)]
    by = {d: scaling_rows(src, d, sizes, args.fmax, not args.no_published_fmax, args.par, args.seed, base)
          for d in dsps}
    csvs = {}
    for d, rows in by.items():
        name = f"scaling_{d}dsp.csv"
        (out / name).write_text(to_csv(rows))
        csvs[d] = name
    (out / "scaling.gp").write_text(scaling_gnuplot(csvs))
    if not args.no_plots:
        from .plotting import plot_scaling
        plot_scaling(by, out / "scaling.png")
    payload = {str(d): [r.__dict__ for r in rows] for d, rows in by.items()}
    lines = []
    for d, rows in by.items():
        lines.append(f"{d}-DSP FU overlay")
        lines.append("   N  copies  binding      Fmax    GOPS   peak  util  status")
        for r in rows:
            lines.append(f"  {r.n:2d}  {r.copies:6d}  {r.binding:11s} {r.fmax_mhz:5.0f} {r.gops:7.2f} "
                         f"{r.peak_gops:6.1f} {100 * r.utilization:4.0f}%  {r.status}")
    lines.append(f"CSV, gnuplot script and figure written to {out}/")
    _emit(args, payload, "\n".join(lines) + "\n")
    return 0


# -- bench -----------------------------------------------------------------------

def cmd_bench(args) -> int:
    from .reports import bench_rows, to_csv

    arch = _arch(args)
    if args.corpus:
        specs = corpus.load_directory(args.corpus)
    else:
        specs = corpus.load_corpus()
    if args.names:
        unknown = sorted(set(args.names) - {s.name for s in specs})
        if unknown:
            raise UserError(f"unknown benchmark(s): {', '.join(unknown)}")
        specs = [s for s in specs if s.name in args.names]
    rows = bench_rows(specs, arch, args.seed, args.jobs)
    out = Path(args.out or "bench")
    out.mkdir(parents=True, exist_ok=True)
    (out / "bench.csv").write_text(to_csv(rows))
    if rows and not args.no_plots:
        from .plotting import plot_bench
        plot_bench(rows, out / "bench.png")
    ref = corpus.reference()["overlay_8x8"]
    payload = {"rows": [r.__dict__ for r in rows], "reference_overlay_8x8": ref}
    # bracketed count is the published replication, the copies column is ours
    lines = ["benchmark       copies  PAR s  iters  bytes | published: Vivado-x86 Overlay-x86 Overlay-Zynq (s)"
             "  direct Fmax MHz  DSP | slices"]
    for r in rows:
        if r.status != "ok":
            lines.append(f"{r.name:14s}  {r.status}: {r.error}")
            continue
        lines.append(f"{r.name + f'({r.expected_copies})':14s}  {r.copies:6d}  {r.par_s:5.2f}  {r.router_iterations:5d}"
                     f"  {r.config_bytes:5d} | {r.ref_vivado_x86_s:21g} {r.ref_overlay_x86_s:11g}"
                     f" {r.ref_overlay_zynq_s:12g}  {r.ref_direct_fmax_mhz:15g}  {r.ref_direct_dsp:3d} |"
                     f" {r.ref_direct_slices:6d}")
    lines.append(f"published overlay: {ref['fmax_mhz']} MHz, {ref['dsp']} DSP | {ref['slices']} slices, "
                 f"{ref['config_bytes']} config bytes in {ref['config_load_us']} us, {ref['peak_gops']} GOPS peak"
                 f" (reference values, not measured here)")
    _emit(args, payload, "\n".join(lines) + "\n")
    return 0 if all(r.status == "ok" for r in rows) else 2


# -- dump-dfg / decode-config ----------------------------------------------------

def cmd_dump_dfg(args) -> int:
    src, _ = _kernel_source(args.kernel)
    arch = _arch(args)
    _, dfg, fu, _ = map_kernel(src, arch)
    text = export_dot(dfg if args.stage == "dfg" else fu)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_decode_config(args) -> int:
    from .fumap import format_steps

    arch = _arch(args)
    p = Path(args.blob)
    if not p.is_file():
        raise UserError(f"configuration file not found: {p}")
    blob = p.read_bytes()
    cfg = decode_config(blob, arch)
    tiles = []
    for i, t in enumerate(cfg.tiles):
        if t.idle:
            continue
        tiles.append({"x": i % arch.cols, "y": i // arch.cols, "ops": format_steps(t.steps),
                      "delays": list(t.delays), "ipin_select": list(t.ipin_select)})
    pads = [{"pad": k, "mode": ("in" if p.mode == 1 else "out"), "copy": p.copy, "index": p.index}
            for k, p in enumerate(cfg.pads) if p.mode]
    payload = {"fingerprint": list(cfg.fingerprint), "version": cfg.version, "total_bytes": len(blob),
               "active_tiles": tiles, "active_pads": pads}
    lines = [f"configuration v{cfg.version} for {arch.rows}x{arch.cols} cw={arch.channel_width}: "
             f"{payload['total_bytes']} bytes, {len(tiles)} active tiles, {len(pads)} active pads"]
    lines += [f"  tile ({t['x']},{t['y']}) {t['ops']} delays={t['delays']}" for t in tiles]
    lines += [f"  pad {q['pad']:3d} {q['mode']:3s} copy {q['copy']} index {q['index']}" for q in pads]
    _emit(args, payload, "\n".join(lines) + "\n")
    return 0


# -- entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--arch", help="architecture file (key=value lines)")
    common.add_argument("--seed", type=int, default=1, help="placement / stimulus seed")
    common.add_argument("--fmax", type=float, help="clock frequency in MHz used for throughput")
    common.add_argument("--out", help="output directory (or file for dump-dfg)")
    common.add_argument("--format", choices=("json", "text"), default="text")
    common.add_argument("--no-plots", action="store_true", help="skip PNG rendering")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="overlayjit", description="Compile integer kernels onto a DSP-block overlay.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("compile", parents=[common], help="run the full mapping flow")
    c.add_argument("kernel", help="kernel file, or a bundled benchmark name")
    c.add_argument("--copies", type=int, help="replicate fewer copies than fit")
    c.set_defaults(func=cmd_compile)

    s = sub.add_parser("simulate", parents=[common], help="simulate compiled artifacts and verify")
    s.add_argument("artifacts", help="directory written by 'compile'")
    s.add_argument("--config", help="configuration blob to use instead of <artifacts>/config.bin")
    s.add_argument("--streams", help="CSV of input values (one column per input)")
    s.add_argument("--length", type=int, default=1000, help="random values per input stream")
    s.add_argument("--trace", help="write the per-cycle trace as JSON lines")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("scaling-report", parents=[common], help="copies and GOPS across overlay sizes")
    r.add_argument("kernel")
    r.add_argument("--fu-type", choices=("1", "2", "both"), default="both")
    r.add_argument("--sizes", default="2-8")
    r.add_argument("--par", action="store_true", help="also place and route every point")
    r.add_argument("--no-published-fmax", action="store_true", help="ignore the published per-size Fmax")
    r.set_defaults(func=cmd_scaling_report)

    b = sub.add_parser("bench", parents=[common], help="PAR times for the benchmark corpus")
    b.add_argument("names", nargs="*", help="subset of benchmarks to run (default: all)")
    b.add_argument("--corpus", help="directory of .cl kernels instead of the bundled corpus")
    b.add_argument("--jobs", type=int, default=1)
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("dump-dfg", parents=[common], help="print the DFG in DOT form")
    d.add_argument("kernel")
    d.add_argument("--stage", choices=("dfg", "fu"), default="dfg")
    d.set_defaults(func=cmd_dump_dfg)

    x = sub.add_parser("decode-config", parents=[common], help="decode a configuration blob")
    x.add_argument("blob")
    x.set_defaults(func=cmd_decode_config)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except OverlayError as e:
        print(json.dumps(e.to_dict()), file=sys.stderr)
        return e.exit_status
    except OSError as e:
        print(json.dumps({"error": "io_error", "message": str(e)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
