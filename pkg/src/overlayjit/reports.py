"""Table builders behind the ``scaling-report`` and ``bench`` commands."""

from __future__ import annotations

import csv
import hashlib
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

from .corpus import BenchmarkSpec, reference
from .errors import OverlayError
from .fumap import compute_replication
from .overlay import OverlayArch, build_arch
from .par import ParSeed
from .pipeline import compile_kernel, map_kernel
from .sim.verify import throughput


@dataclass
class ScalingRow:
    n: int
    dsps_per_fu: int
    status: str  # ok | does-not-fit | unroutable | ...
    copies: int = 0
    fu_limit: int = 0
    io_limit: int = 0
    binding: str = ""
    fmax_mhz: float = 0.0
    gops: float = 0.0
    peak_gops: float = 0.0
    utilization: float = 0.0
    par_ms: float | None = None


def published_fmax(dsps_per_fu: int, n: int) -> float | None:
    return reference()["scaling_fmax_mhz"].get(str(dsps_per_fu), {}).get(str(n))


def scaling_rows(source: str, dsps_per_fu: int, sizes=range(2, 9), fmax: float | None = None,
                 use_published_fmax: bool = True, par: bool = False, seed: int = 1,
                 base: OverlayArch | None = None) -> list[ScalingRow]:
    """One row per N x N overlay size.

    Fmax per size comes from the published scaling figure when available,
    else ``fmax`` or the architecture default.  With ``par`` each point is
    also placed and routed to confirm it is realisable.
    """
    base = base or build_arch()
    rows = []
    for n in sizes:
        arch = build_arch(**{**base.to_dict(), "rows": n, "cols": n, "dsps_per_fu": dsps_per_fu,
                             "fu_pipeline_latency": None})
        f = fmax
        if f is None and use_published_fmax:
            f = published_fmax(dsps_per_fu, n)
        f = f if f is not None else arch.fmax_mhz
        try:
            _, dfg, fu, _ = map_kernel(source, arch)
            plan = compute_replication(fu, arch)
        except OverlayError as e:
            rows.append(ScalingRow(n, dsps_per_fu, e.code.replace("_", "-"), fmax_mhz=f))
            continue
        row = ScalingRow(n, dsps_per_fu, "ok", plan.copies, plan.fu_limit, plan.io_limit,
                         plan.binding_reason, f)
        if par:
            t = time.perf_counter()
            try:
                compile_kernel(source, arch, ParSeed(seed=seed))
            except OverlayError as e:
                row.status = e.code.replace("_", "-")
            row.par_ms = round((time.perf_counter() - t) * 1000.0, 1)
        tp = throughput(plan.copies, len(dfg.operations), f, arch)
        row.gops, row.peak_gops, row.utilization = tp.gops, tp.peak_gops, tp.utilization
        rows.append(row)
    return rows


@dataclass
class BenchRow:
    name: str
    status: str
    copies: int = 0
    expected_copies: int = 0
    ops_per_kernel: int = 0
    place_s: float = 0.0
    route_s: float = 0.0
    par_s: float = 0.0
    router_iterations: int = 0
    config_bytes: int = 0
    config_sha256: str = ""
    ref_vivado_x86_s: float = 0.0
    ref_overlay_x86_s: float = 0.0
    ref_overlay_zynq_s: float = 0.0
    ref_direct_fmax_mhz: float = 0.0
    ref_direct_dsp: int = 0
    ref_direct_slices: int = 0
    error: str = ""


def _bench_one(spec: BenchmarkSpec, arch: OverlayArch, seed: int) -> BenchRow:
    ref = reference()["benchmarks"].get(spec.name, {})
    row = BenchRow(spec.name, "ok", expected_copies=spec.expected_copies, ops_per_kernel=spec.ops_per_kernel,
                   ref_vivado_x86_s=ref.get("par_vivado_x86_s", 0.0),
                   ref_overlay_x86_s=ref.get("par_overlay_x86_s", 0.0),
                   ref_overlay_zynq_s=ref.get("par_overlay_zynq_s", 0.0),
                   ref_direct_fmax_mhz=ref.get("direct_fmax_mhz", 0.0),
                   ref_direct_dsp=ref.get("direct_dsp", 0),
                   ref_direct_slices=ref.get("direct_slices", 0))
    try:
        r = compile_kernel(spec.source, arch, ParSeed(seed=seed))
    except OverlayError as e:
        row.status, row.error = e.code, str(e)
        return row
    row.copies = r.copies
    row.place_s = round(r.timings_ms["place"] / 1000.0, 4)
    row.route_s = round(r.timings_ms["route"] / 1000.0, 4)
    row.par_s = round(row.place_s + row.route_s, 4)
    row.router_iterations = r.routing.iterations
    row.config_bytes = len(r.blob)
    row.config_sha256 = hashlib.sha256(r.blob).hexdigest()
    return row


def bench_rows(specs: list[BenchmarkSpec], arch: OverlayArch, seed: int = 1, jobs: int = 1) -> list[BenchRow]:
    """Compile each benchmark; failures are recorded per row and the run continues."""
    if jobs <= 1:
        return [_bench_one(s, arch, seed) for s in specs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda s: _bench_one(s, arch, seed), specs))


def to_csv(rows) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    fields = list(asdict(rows[0]))
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        d = asdict(r)
        w.writerow({k: (f"{v:.4f}" if isinstance(v, float) else v) for k, v in d.items()})
    return buf.getvalue()


def scaling_gnuplot(csv_names: dict[int, str], png: str = "scaling.png") -> str:
    """Gnuplot script plotting GOPS against overlay size for each CSV."""
    plots = ", ".join(
        f"'{name}' skip 1 using 1:(strcol(3) eq 'ok' ? $9 : NaN) with linespoints title '{d}-DSP FU'"
        for d, name in sorted(csv_names.items(), reverse=True)
    )
    return (
        "set datafile separator ','\n"
        "set key top left\n"
        "set xlabel 'Overlay size N (N x N)'\n"
        "set ylabel 'Throughput (GOPS)'\n"
        "set terminal pngcairo size 640,480\n"
        f"set output '{png}'\n"
        f"plot {plots}\n"
    )
