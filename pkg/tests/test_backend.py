import networkx as nx
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from overlayjit import corpus
from overlayjit.backend import (balance_latency, config_size, decode_config, encode_config, generate_config,
                                idle_config)
from overlayjit.errors import DelayOverflow, FingerprintMismatch, MalformedBlob, OverlayError
from overlayjit.fumap import replicate
from overlayjit.overlay import build_arch
from overlayjit.pipeline import map_kernel

from conftest import compiled

NAMES = corpus.NAMES


def netlist_for(src, arch, copies=1):
    return replicate(map_kernel(src, arch)[2], copies)


def brute_force_arrivals(netlist, L):
    """Longest FU count along every simple path from any input pad, times L."""
    g = nx.DiGraph()
    g.add_nodes_from(netlist.blocks)
    for net in netlist.nets:
        for b, _ in net.sinks:
            g.add_edge(net.source, b)
    ins = [b.name for b in netlist.blocks_of("in")]
    fu = {b.name for b in netlist.blocks_of("fu")}
    out = {}
    for node in g.nodes:
        best = 0
        for s in ins:
            if s == node:
                continue
            for path in nx.all_simple_paths(g, s, node):
                best = max(best, sum(1 for v in path if v in fu))
        out[node] = best * L
    return out


def port_arrivals(netlist, arrival, name):
    b = netlist.blocks[name]
    return [arrival[netlist.driver(name, p)] for p in range(b.n_ports)]


def test_chebyshev_one_dsp_final_multiply_delay(cheb_src):
    arch = build_arch(dsps_per_fu=1)
    nl = netlist_for(cheb_src, arch)
    d = balance_latency(nl, arch=arch)
    # the last FU multiplies x (arrives at 0) by the fused chain (four FUs deep)
    last = nl.driver(nl.blocks_of("out")[0].name, 0)
    assert sorted(d.delays[(last, p)] for p in range(2)) == [0, 12]
    assert d.arrival[last] == 15


@pytest.mark.parametrize("name", NAMES)
@pytest.mark.parametrize("dsps", [1, 2])
def test_balance_matches_brute_force(name, dsps):
    arch = build_arch(dsps_per_fu=dsps)
    nl = netlist_for(corpus.kernel_source(name), arch)
    L = arch.fu_pipeline_latency
    d = balance_latency(nl, arch=arch)
    oracle = brute_force_arrivals(nl, L)
    for b in nl.blocks.values():
        if b.kind == "in":
            continue
        want = oracle[b.name]
        if b.kind == "out":
            assert d.arrival[b.name] == want
            continue
        assert d.arrival[b.name] == want
        ins = port_arrivals(nl, oracle, b.name)
        for p, a in enumerate(ins):
            assert d.delays[(b.name, p)] == max(ins) - a


@pytest.mark.parametrize("name", NAMES)
def test_balance_equal_and_minimal(name):
    r = compiled(name)
    nl, d = r.netlist, r.delays
    for b in nl.blocks_of("fu"):
        ports = range(b.n_ports)
        after = [d.input_arrival[(b.name, p)] + d.delays[(b.name, p)] for p in ports]
        assert len(set(after)) == 1
        assert min(d.delays[(b.name, p)] for p in ports) == 0
        for p in ports:
            if d.delays[(b.name, p)]:
                lowered = list(after)
                lowered[p] -= 1
                assert len(set(lowered)) > 1
        assert all(0 <= d.delays[(b.name, p)] <= r.arch.max_delay_chain for p in ports)


def test_diamond_needs_no_delay():
    src = ("__kernel void k(__global int *A, __global int *B) { int i = get_global_id(0);"
           " int x = A[i]; B[i] = (x * x) * (x * 5 + 7); }")
    arch = build_arch(dsps_per_fu=1)
    nl = netlist_for(src, arch)
    d = balance_latency(nl, arch=arch)
    assert set(d.delays.values()) == {0}


def test_delay_overflow():
    src = ("__kernel void k(__global int *A, __global int *B) { int i = get_global_id(0);"
           " int x = A[i]; B[i] = x * x * x * x * x * x * x + x; }")
    arch = build_arch(dsps_per_fu=1)
    nl = netlist_for(src, arch)
    with pytest.raises(DelayOverflow) as exc:
        balance_latency(nl, arch=arch)
    assert exc.value.required == 18 and exc.value.limit == 16
    # a deeper delay chain absorbs it
    assert max(balance_latency(nl, arch=arch, max_delay=18).delays.values()) == 18


# -- configuration ----------------------------------------------------------------

def test_idle_blob_decodes_to_idle_tiles():
    arch = build_arch()
    cfg = decode_config(encode_config(idle_config(arch)), arch)
    assert len(cfg.tiles) == 64 and all(t.idle for t in cfg.tiles)
    assert cfg.copies == 0


@pytest.mark.parametrize("name", NAMES)
def test_roundtrip_and_fixed_size(name):
    r = compiled(name)
    cfg = decode_config(r.blob, r.arch, r.rr)
    assert cfg == r.config
    assert encode_config(cfg) == r.blob
    assert len(r.blob) == r.config.total_bytes == config_size(8, 8, r.arch.channel_width, 2)
    assert 512 <= len(r.blob) <= 4096
    assert cfg.copies == r.copies
    assert sum(not t.idle for t in cfg.tiles) == len(r.netlist.blocks_of("fu"))


def test_size_depends_only_on_arch():
    arch = build_arch()
    assert len(encode_config(idle_config(arch))) == len(compiled("chebyshev").blob)
    assert len(encode_config(idle_config(build_arch(rows=4, cols=4)))) < len(compiled("chebyshev").blob)


def test_truncated_blob():
    r = compiled("chebyshev")
    for cut in (0, 5, len(r.blob) // 2, len(r.blob) - 1):
        with pytest.raises(MalformedBlob):
            decode_config(r.blob[:cut], r.arch)
    with pytest.raises(MalformedBlob):
        decode_config(r.blob + b"\0", r.arch)


def test_fingerprint_mismatch():
    r = compiled("chebyshev")
    with pytest.raises(FingerprintMismatch):
        decode_config(r.blob, build_arch(channel_width=3))


def test_generation_is_stable():
    r = compiled("poly1")
    again = generate_config(r.placement, r.routing, r.delays, r.arch, r.rr)
    assert encode_config(again) == r.blob


@settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(data=st.binary(max_size=64))
def test_fuzz_random_bytes(data):
    arch = build_arch(rows=2, cols=2)
    try:
        cfg = decode_config(data, arch)
    except OverlayError as e:
        assert isinstance(e, (MalformedBlob, FingerprintMismatch))
    else:
        assert encode_config(cfg) == data


@settings(max_examples=300, deadline=None)
@given(pos=st.integers(0, 10 ** 6), val=st.integers(0, 255))
def test_fuzz_mutated_blob(pos, val):
    r = compiled("chebyshev")
    blob = bytearray(r.blob)
    blob[pos % len(blob)] = val
    try:
        cfg = decode_config(bytes(blob), r.arch, r.rr)
    except OverlayError as e:
        assert isinstance(e, (MalformedBlob, FingerprintMismatch))
    else:
        # a blob that decodes is canonical
        assert encode_config(cfg) == bytes(blob)
