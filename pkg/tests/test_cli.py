import csv
import hashlib
import json
import subprocess
import sys

import pytest

from overlayjit import corpus
from overlayjit.cli import main

from conftest import IDENTITY


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def cheb_build(tmp_path_factory):
    out = tmp_path_factory.mktemp("cheb")
    assert main(["compile", "chebyshev", "--out", str(out), "--format", "json"]) == 0
    return out


def test_compile_manifest(cheb_build):
    m = json.loads((cheb_build / "manifest.json").read_text())
    assert m["copies"] == 16
    assert m["ops_per_kernel"] == 7
    assert set(m["timings_ms"]) == {"parse", "lower", "fuse", "replicate", "place", "route", "balance", "encode"}
    assert all(v >= 0 for v in m["timings_ms"].values())
    for art in m["artifacts"].values():
        p = cheb_build / art["path"]
        assert p.is_file()
        assert hashlib.sha256(p.read_bytes()).hexdigest() == art["sha256"]
    assert set(m["reports"]) == {"par_report", "placement_png"}
    assert json.loads((cheb_build / "par_report.json").read_text())["nets"] > 0
    assert (cheb_build / "placement.png").read_bytes()[:4] == b"\x89PNG"


def test_manifest_hashes_reproducible(cheb_build, tmp_path, capsys):
    code, _, _ = run(capsys, "compile", "chebyshev", "--out", tmp_path, "--no-plots")
    assert code == 0
    a = json.loads((cheb_build / "manifest.json").read_text())["artifacts"]
    b = json.loads((tmp_path / "manifest.json").read_text())["artifacts"]
    assert a == b


def test_simulate_random_streams(cheb_build, capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", cheb_build, "--format", "json", "--fmax", 303,
                       "--length", 300, "--out", tmp_path, "--trace", tmp_path / "t.jsonl")
    assert code == 0
    res = json.loads(out)
    assert res["verdict"]["passed"] and res["steady_state_ii"] == 1
    assert res["pipeline_latency"] == res["structural_latency"]
    assert res["throughput"]["gops"] == pytest.approx(33.936)
    rows = list(csv.reader(open(tmp_path / "outputs.csv")))
    assert len(rows) == 301 and len(rows[0]) == 16
    assert (tmp_path / "t.jsonl").read_text().count("\n") > 300


def test_simulate_csv_streams(cheb_build, capsys, tmp_path):
    f = tmp_path / "s.csv"
    f.write_text("A\n0\n1\n2\n")
    code, out, _ = run(capsys, "simulate", cheb_build, "--streams", f, "--out", tmp_path)
    assert code == 0 and "PASS" in out
    rows = list(csv.reader(open(tmp_path / "outputs.csv")))
    assert rows[1:] == [["0"] * 16, ["1"] * 16, ["362"] * 16]
    f.write_text("Q\n1\n")
    code, _, err = run(capsys, "simulate", cheb_build, "--streams", f)
    assert code == 1 and json.loads(err)["error"] == "usage_error"


def test_corrupted_config_byte(cheb_build, capsys, tmp_path):
    blob = bytearray((cheb_build / "config.bin").read_bytes())
    seen = set()
    for pos in (20, 40, 60, len(blob) - 10):
        bad = bytearray(blob)
        bad[pos] ^= 0x5A
        p = tmp_path / f"bad{pos}.bin"
        p.write_bytes(bytes(bad))
        code, _, err = run(capsys, "simulate", cheb_build, "--config", p, "--length", 50, "--out", tmp_path)
        assert code != 0
        seen.add(json.loads(err)["error"])
    assert seen <= {"malformed_blob", "config_mismatch", "verification_failed"}


def test_identity_kernel_pass_through(tmp_path, capsys):
    k = tmp_path / "id.cl"
    k.write_text(IDENTITY)
    code, out, _ = run(capsys, "compile", k, "--out", tmp_path / "b", "--format", "json", "--no-plots")
    assert code == 0 and json.loads(out)["copies"] == 16
    code, out, _ = run(capsys, "decode-config", tmp_path / "b" / "config.bin", "--format", "json")
    assert code == 0
    d = json.loads(out)
    assert d["active_tiles"] == [] and len(d["active_pads"]) == 32


def test_too_many_fus_exit_2(tmp_path, capsys):
    body = " ".join(f"int t{k} = t{k - 1} * A[i] + {k};" for k in range(1, 71))
    k = tmp_path / "big.cl"
    k.write_text("__kernel void big(__global int *A, __global int *B) { int i = get_global_id(0);"
                 f" int t0 = A[i]; {body} B[i] = t70; }}")
    a = tmp_path / "a.txt"
    a.write_text("rows=2\ncols=2\n")
    code, _, err = run(capsys, "compile", k, "--arch", a, "--out", tmp_path / "o")
    assert code == 2 and json.loads(err)["error"] == "does_not_fit"


@pytest.mark.parametrize("argv, code, error", [
    (["compile", "no_such_kernel.cl"], 1, "usage_error"),
    (["bogus"], 1, "usage_error"),
    (["compile"], 1, "usage_error"),
    (["decode-config", "missing.bin"], 1, "usage_error"),
    (["scaling-report", "chebyshev", "--sizes", "x-y"], 1, "usage_error"),
])
def test_error_json(argv, code, error, capsys, tmp_path):
    got, _, err = run(capsys, *argv, "--out", tmp_path) if argv[0] != "bogus" else run(capsys, *argv)
    assert got == code
    assert json.loads(err)["error"] == error


def test_syntax_error_exit(tmp_path, capsys):
    k = tmp_path / "bad.cl"
    k.write_text("__kernel void k(__global int *A, __global int *B) { B[i] = A[i] / 2; }")
    code, _, err = run(capsys, "compile", k, "--out", tmp_path)
    assert code == 1 and "error" in json.loads(err)


def test_scaling_report_columns(tmp_path, capsys):
    code, out, _ = run(capsys, "scaling-report", "chebyshev", "--out", tmp_path, "--format", "json")
    assert code == 0
    rows = json.loads(out)
    two = {r["n"]: r for r in rows["2"]}
    one = {r["n"]: r for r in rows["1"]}
    assert [two[n]["copies"] for n in range(2, 9)] == [1, 3, 5, 8, 12, 14, 16]
    assert [one[n]["copies"] for n in range(3, 9)] == [1, 3, 5, 7, 9, 12]
    assert one[2]["status"] == "does-not-fit"
    assert two[8]["gops"] == pytest.approx(16 * 7 * 303 / 1000, abs=0.1)
    for name in ("scaling_1dsp.csv", "scaling_2dsp.csv", "scaling.gp", "scaling.png"):
        assert (tmp_path / name).stat().st_size > 0


def test_bench_empty_corpus(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    code, out, _ = run(capsys, "bench", "--corpus", empty, "--out", tmp_path / "o", "--format", "json")
    assert code == 0 and json.loads(out)["rows"] == []


def test_bench_subset_and_determinism(tmp_path, capsys):
    outs = []
    for k in range(2):
        code, out, _ = run(capsys, "bench", "poly2", "sgfilter", "--out", tmp_path / str(k), "--format", "json",
                           "--jobs", 2)
        assert code == 0
        rows = json.loads(out)["rows"]
        for r in rows:
            r.pop("par_s")
            r.pop("place_s")
            r.pop("route_s")
        outs.append(sorted(rows, key=lambda r: r["name"]))
    assert outs[0] == outs[1]
    assert {r["name"]: r["copies"] for r in outs[0]} == {"poly2": 10, "sgfilter": 10}
    assert (tmp_path / "0" / "bench.png").is_file()


def test_dump_dfg(capsys):
    code, out, _ = run(capsys, "dump-dfg", "chebyshev", "--stage", "fu")
    assert code == 0 and out.startswith("digraph") and out.count("ntype=\"operation\"") == 3


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "overlayjit.cli", "--help"], capture_output=True, text=True)
    assert p.returncode == 0
    for cmd in ("compile", "simulate", "scaling-report", "bench", "dump-dfg", "decode-config"):
        assert cmd in p.stdout


def test_corpus_names_resolve(capsys):
    assert set(corpus.NAMES) == {"chebyshev", "sgfilter", "mibench", "qspline", "poly1", "poly2"}
