import json
import random
from dataclasses import replace

import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from overlayjit import corpus
from overlayjit.backend import decode_config, idle_config
from overlayjit.errors import ConfigMismatch, InvalidParameter, NotSteadyState, OverlayError
from overlayjit.frontend import parse_kernel
from overlayjit.overlay import build_arch
from overlayjit.pipeline import compile_kernel
from overlayjit.sim import interpret_kernel, measure_throughput, simulate, throughput, verify
from overlayjit.sim.verify import peak_gops

from conftest import IDENTITY, compiled, random_streams
from strategies import kernel_sources


def wrap32(v):
    v &= 0xFFFFFFFF
    return v - (1 << 32) if v >> 31 else v


def cheb_bigint(x):
    return wrap32(x * (x * (16 * x * x - 20) * x + 5))


def test_interpreter_chebyshev_values(cheb_src):
    ast = parse_kernel(cheb_src)
    xs = [0, 1, 2, -7, 2 ** 31 - 1, -(2 ** 31), 123456]
    got = interpret_kernel(ast, {"A": xs})
    assert got["B"][:3] == [0, 1, 362]
    assert got["B"] == [cheb_bigint(x) for x in xs]


def test_interpreter_narrow_width(cheb_src):
    ast = parse_kernel(cheb_src)
    assert interpret_kernel(ast, {"A": [2]}, width=8)["B"] == [362 - 512 + 256]


def test_chebyshev_single_copy_stream(cheb_src):
    r = compile_kernel(cheb_src, build_arch(), seed=1, copies=1)
    trace = simulate(r.config, r.arch, {(0, 0): [0, 1, 2]}, rr=r.rr)
    stream = trace.outputs[(0, 0)]
    assert [v for _, v in stream] == [0, 1, 362]
    cycles = [c for c, _ in stream]
    assert cycles == [cycles[0], cycles[0] + 1, cycles[0] + 2]
    assert trace.pipeline_latency == r.delays.output_latency(r.netlist)[(0, 0)]
    assert trace.drained


def test_idle_config_outputs_zero():
    arch = build_arch(rows=3, cols=3)
    trace = simulate(idle_config(arch), arch, {}, max_cycles=20)
    assert trace.outputs == {} and trace.drained
    # keep the live pads and channel muxes of a real build but idle every FU
    r = compiled("chebyshev")
    tiles = tuple(replace(t, steps=(), delays=(0, 0), ipin_select=(0, 0)) for t in r.config.tiles)
    quiet = replace(r.config, tiles=tiles)
    streams = random_streams(r, n=40)
    trace = simulate(quiet, r.arch, streams, rr=r.rr)
    assert len(trace.outputs) == 16
    assert all(v == 0 for s in trace.outputs.values() for _, v in s)


def test_identity_config_pass_through_and_idle_fus():
    arch = build_arch(rows=2, cols=2)
    r = compile_kernel(IDENTITY, arch, seed=1)
    assert r.copies == 4 and all(t.idle for t in r.config.tiles)
    streams = random_streams(r, n=50)
    trace = simulate(r.config, arch, streams, rr=r.rr)
    assert verify(trace, r.ast, streams)
    assert trace.pipeline_latency == 0


def test_sixteen_copies_thousand_values():
    r = compiled("chebyshev")
    streams = random_streams(r, n=1000, seed=11)
    trace = simulate(r.config, r.arch, streams, rr=r.rr, record_pins=False)
    for copy in range(16):
        want = [cheb_bigint(x) for x in streams[(copy, 0)]]
        assert trace.values((copy, 0)) == want
    assert trace.steady_state_ii == 1
    assert verify(trace, r.ast, streams).checked == 16000


def test_verify_locates_corruption():
    r = compiled("chebyshev")
    streams = random_streams(r, n=100, seed=2)
    trace = simulate(r.config, r.arch, streams, rr=r.rr)
    assert verify(trace, r.ast, streams).passed
    cyc, val = trace.outputs[(5, 0)][37]
    trace.outputs[(5, 0)][37] = (cyc, val ^ 1)
    v = verify(trace, r.ast, streams)
    assert not v
    m = v.mismatch
    assert (m.copy, m.output, m.index, m.expected, m.actual) == (5, 0, 37, val, val ^ 1)
    assert json.loads(json.dumps(v.to_dict()))["mismatch"]["index"] == 37


def test_verify_detects_short_stream():
    r = compiled("chebyshev")
    streams = random_streams(r, n=10)
    trace = simulate(r.config, r.arch, streams, rr=r.rr)
    trace.outputs[(0, 0)].pop()
    v = verify(trace, r.ast, streams)
    assert not v and v.mismatch.index == 9


def test_simulation_is_deterministic():
    r = compiled("mibench")
    streams = random_streams(r, n=200, seed=4)
    a = simulate(r.config, r.arch, streams, rr=r.rr)
    b = simulate(r.config, r.arch, streams, rr=r.rr)
    assert a == b
    assert a.to_jsonl() == b.to_jsonl()


def test_trace_jsonl_shape():
    r = compiled("qspline")
    streams = random_streams(r, n=5)
    lines = simulate(r.config, r.arch, streams, rr=r.rr).to_jsonl().splitlines()
    head = json.loads(lines[0])
    assert len(head["keys"]) == 3 * 2
    assert all(len(json.loads(l)["out"]) == 6 for l in lines[1:])


def test_missing_and_extra_streams():
    r = compiled("chebyshev")
    streams = random_streams(r, n=10)
    partial = dict(streams)
    partial.pop((3, 0))
    with pytest.raises(ConfigMismatch):
        simulate(r.config, r.arch, partial, rr=r.rr)
    with pytest.raises(ConfigMismatch):
        simulate(r.config, r.arch, {**streams, (99, 0): [0] * 10}, rr=r.rr)
    uneven = dict(streams)
    uneven[(0, 0)] = uneven[(0, 0)][:-1]
    with pytest.raises(InvalidParameter):
        simulate(r.config, r.arch, uneven, rr=r.rr)


def test_corrupted_select_is_caught():
    """Rewiring an output pad to an undriven track must not pass silently."""
    r = compiled("chebyshev")
    blob = bytearray(r.blob)
    streams = random_streams(r, n=20)
    outcomes = set()
    for pos in range(len(blob) - 300, len(blob)):
        for delta in (1, 2):
            bad = bytearray(blob)
            bad[pos] = (bad[pos] + delta) % 256
            try:
                cfg = decode_config(bytes(bad), r.arch, r.rr)
                trace = simulate(cfg, r.arch, streams, rr=r.rr)
                outcomes.add("pass" if verify(trace, r.ast, streams) else "fail")
            except OverlayError as e:
                outcomes.add(e.code)
    assert outcomes - {"pass"}


@pytest.mark.parametrize("copies, ops, fmax, want", [
    (16, 7, 303, 33.9),
    (1, 7, 350, 2.45),
    (12, 7, 338, 28.4),
])
def test_throughput_arithmetic(copies, ops, fmax, want):
    rep = throughput(copies, ops, fmax)
    assert rep.gops == pytest.approx(want, abs=0.05)
    assert rep.ops_per_cycle == copies * ops


def test_peak_gops_calibration():
    assert peak_gops(build_arch(), 300) == pytest.approx(115.2)
    assert peak_gops(build_arch(dsps_per_fu=1), 338) == pytest.approx(64.9, abs=0.05)


def test_measured_throughput_from_trace():
    r = compiled("chebyshev")
    streams = random_streams(r, n=50)
    trace = simulate(r.config, r.arch, streams, rr=r.rr)
    rep = measure_throughput(trace, r.arch, 7, r.copies, fmax_mhz=303)
    assert rep.ii == 1
    assert rep.gops == pytest.approx(16 * 7 * 303 / 1000)
    assert 0 < rep.utilization < 1


def test_not_steady_state():
    r = compiled("chebyshev")
    streams = {k: v[:1] for k, v in random_streams(r, n=1).items()}
    trace = simulate(r.config, r.arch, streams, rr=r.rr)
    with pytest.raises(NotSteadyState):
        measure_throughput(trace, r.arch, 7, 16)
    with pytest.raises(NotSteadyState):
        throughput(1, 7, 300, ii=0)


@pytest.mark.parametrize("name", corpus.NAMES)
def test_latency_agreement(name):
    r = compiled(name)
    streams = random_streams(r, n=30)
    trace = simulate(r.config, r.arch, streams, rr=r.rr)
    assert trace.output_latency == r.delays.output_latency(r.netlist)


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(src=kernel_sources(max_lets=8), seed=st.integers(1, 1000), data=st.data())
def test_random_kernels_simulate_correctly(src, seed, data):
    arch = build_arch(rows=4, cols=4)
    try:
        r = compile_kernel(src, arch, seed=seed, copies=1)
    except OverlayError:
        assume(False)
    rng = random.Random(seed)
    streams = {k: [rng.randint(-2 ** 31, 2 ** 31 - 1) for _ in range(40)] for k in random_streams(r, n=1)}
    trace = simulate(r.config, arch, streams, rr=r.rr)
    assert verify(trace, r.ast, streams)
    if trace.steady_state_ii is not None:
        assert trace.steady_state_ii == 1
