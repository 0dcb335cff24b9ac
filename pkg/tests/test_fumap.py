import networkx as nx
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from overlayjit.errors import DoesNotFit, UnsupportedConstruct
from overlayjit.frontend import lower_to_dfg, optimize_dfg, parse_kernel
from overlayjit.fumap import (FuCapabilityModel, Step, chain_for_multidsp, compute_replication, export_netlist,
                              format_steps, fuse_for_fu, import_netlist, parse_steps, replicate, to_fudfg)
from overlayjit.overlay import build_arch
from overlayjit.sim import evaluate_dfg, evaluate_netlist, interpret_kernel

from conftest import GOLDEN, IDENTITY
from oracles import fu_graph, published_fu_graph, same_stems
from strategies import int_vectors, kernel_sources

ONE, TWO = FuCapabilityModel(1), FuCapabilityModel(2)


def cheb_dfg(src):
    return optimize_dfg(lower_to_dfg(parse_kernel(src)))


def depth(g):
    memo = {}

    def d(n):
        if n not in memo:
            memo[n] = (1 if g.nodes[n].kind in ("fu", "operation") else 0) + max(
                (d(s) for s in g.operands(n)), default=0)
        return memo[n]
    return max(d(n) for n in g.nodes)


# -- fusion ---------------------------------------------------------------------

def test_chebyshev_one_dsp_matches_published(cheb_src):
    fu = fuse_for_fu(cheb_dfg(cheb_src), ONE)
    assert len(fu.fu_nodes) == 5
    assert sorted(n.label.rsplit("_N", 1)[0] for n in fu.fu_nodes) == sorted(
        ["mul", "mul", "mul_Imm_16", "mul_sub_Imm_20", "mul_add_Imm_5"])
    assert nx.is_isomorphic(fu_graph(fu), published_fu_graph(), node_match=same_stems)


def test_chebyshev_two_dsp_three_fus(cheb_src):
    one = fuse_for_fu(cheb_dfg(cheb_src), ONE)
    two = chain_for_multidsp(one, TWO)
    assert len(two.fu_nodes) == 3
    stems = sorted(n.stems for n in two.fu_nodes)
    assert stems == sorted([("mul_Imm_16", "mul_sub_Imm_20"), ("mul", "mul_add_Imm_5"), ("mul",)])
    assert all(n.n_ports <= 2 for n in two.fu_nodes)
    merged = {n.stems: format_steps(n.steps) for n in two.fu_nodes}
    assert merged[("mul_Imm_16", "mul_sub_Imm_20")] == "mul(p0,#16);mul(s0,p0);sub(s1,#20)"


def test_single_add_is_not_fused():
    src = "__kernel void k(__global int *A, __global int *C, __global int *B) { int i = get_global_id(0); B[i] = A[i] + C[i]; }"
    fu = fuse_for_fu(cheb_dfg(src), ONE)
    assert [n.stems for n in fu.fu_nodes] == [("add",)]


def test_multi_consumer_products_are_not_fused():
    # the multiply feeds two consumers, so no post-op may be absorbed
    src = ("__kernel void k(__global int *A, __global int *B, __global int *C) { int i = get_global_id(0);"
           " int a = A[i] * A[i]; B[i] = a + 1; C[i] = a - 2; }")
    dfg = cheb_dfg(src)
    one = fuse_for_fu(dfg, ONE)
    assert len(one.fu_nodes) == len(dfg.operations) == 3
    assert chain_for_multidsp(one, ONE) == one


def test_step_text_roundtrip():
    steps = (Step("mul", ("p", 0), ("i", -16)), Step("sub", ("i", 20), ("s", 0)), Step("add", ("s", 1), ("p", 1)))
    assert parse_steps(format_steps(steps)) == steps


@settings(max_examples=40, deadline=None)
@given(src=kernel_sources(max_lets=20), seed=st.integers(0, 2 ** 32))
def test_fusion_preserves_function(src, seed):
    import random
    ast = parse_kernel(src)
    try:
        dfg = optimize_dfg(lower_to_dfg(ast))
    except UnsupportedConstruct:
        assume(False)
    one = fuse_for_fu(dfg, ONE)
    two = chain_for_multidsp(one, TWO)
    one.validate()
    two.validate()
    assert len(one.fu_nodes) <= len(dfg.operations)
    assert len(two.fu_nodes) <= len(one.fu_nodes)
    assert all(n.n_ports <= 2 and n.dsps <= 2 for n in two.fu_nodes)
    assert depth(one) <= depth(dfg) and depth(two) <= depth(one)
    rng = random.Random(seed)
    for _ in range(1000):
        feed = {k: rng.randint(-2 ** 31, 2 ** 31 - 1) for k in range(len(ast.inputs))}
        want = evaluate_dfg(dfg, feed)
        assert evaluate_dfg(one, feed) == want
        assert evaluate_dfg(two, feed) == want


def test_fusion_random_thousand_vectors():
    import random
    rng = random.Random(3)
    src = ("__kernel void k(__global int *A, __global int *C, __global int *B) { int i = get_global_id(0);"
           " int a = A[i]; int c = C[i]; int p = a*c - 9; int q = p*a + 4; int r = q*q*3 - c;"
           " int s = (r*a + 1) * (p*c - 2); B[i] = s*5 + r*c; }")
    ast = parse_kernel(src)
    dfg = optimize_dfg(lower_to_dfg(ast))
    two = chain_for_multidsp(fuse_for_fu(dfg, ONE), TWO)
    xs = [[rng.randint(-2 ** 31, 2 ** 31 - 1) for _ in range(1000)] for _ in range(2)]
    want = interpret_kernel(ast, {"A": xs[0], "C": xs[1]})["B"]
    got = [evaluate_dfg(two, {0: a, 1: c})[0] for a, c in zip(*xs)]
    assert got == want


# -- replication ----------------------------------------------------------------

@pytest.mark.parametrize("dsps, n, copies", [
    (2, 2, 1), (2, 3, 3), (2, 4, 5), (2, 5, 8), (2, 6, 12), (2, 7, 14), (2, 8, 16),
    (1, 3, 1), (1, 4, 3), (1, 5, 5), (1, 6, 7), (1, 7, 9), (1, 8, 12),
])
def test_replication_points(cheb_src, dsps, n, copies):
    arch = build_arch(rows=n, cols=n, dsps_per_fu=dsps)
    model = FuCapabilityModel.for_arch(arch)
    fu = chain_for_multidsp(fuse_for_fu(cheb_dfg(cheb_src), model), model)
    f = len(fu.fu_nodes)
    # oracle: enumerate both limits directly
    fu_lim = max(k for k in range(n * n + 1) if k * f <= n * n)
    io_lim = max(k for k in range(4 * n + 1) if k * 2 <= 4 * n)
    plan = compute_replication(fu, arch)
    assert plan.copies == copies == min(fu_lim, io_lim)
    assert (plan.fu_limit, plan.io_limit) == (fu_lim, io_lim)


def test_replication_binding_reason(cheb_src):
    fu = chain_for_multidsp(fuse_for_fu(cheb_dfg(cheb_src), ONE), TWO)
    plan = compute_replication(fu, build_arch())
    assert (plan.fu_limit, plan.io_limit, plan.binding_reason) == (21, 16, "io-limited")
    assert compute_replication(fu, build_arch(rows=5, cols=5)).binding_reason == "fu-limited"


def test_does_not_fit(cheb_src):
    fu = fuse_for_fu(cheb_dfg(cheb_src), ONE)
    with pytest.raises(DoesNotFit):
        compute_replication(fu, build_arch(rows=2, cols=2, dsps_per_fu=1))


def test_replicate_counts(cheb_src):
    fu = chain_for_multidsp(fuse_for_fu(cheb_dfg(cheb_src), ONE), TWO)
    nl = replicate(fu, compute_replication(fu, build_arch()))
    assert len(nl.blocks_of("fu")) == 48
    assert len(nl.blocks_of("in")) == 16 and len(nl.blocks_of("out")) == 16
    sinks = sum(len(n.sinks) for n in nl.nets)
    assert sinks == 16 * len(fu.edges)
    for net in nl.nets:
        copy = nl.blocks[net.source].copy
        assert all(nl.blocks[b].copy == copy for b, _ in net.sinks)


@settings(max_examples=30, deadline=None)
@given(src=kernel_sources(max_lets=10), r=st.integers(1, 5), data=st.data())
def test_replicate_counts_and_function(src, r, data):
    ast = parse_kernel(src)
    try:
        dfg = optimize_dfg(lower_to_dfg(ast))
    except UnsupportedConstruct:
        assume(False)
    fu = chain_for_multidsp(fuse_for_fu(dfg, ONE), TWO)
    nl = replicate(fu, r)
    f, i, o = len(fu.fu_nodes), len(fu.invars), len(fu.outvars)
    assert len(nl.blocks) == r * (f + i + o)
    assert sum(len(n.sinks) for n in nl.nets) == r * len(fu.edges)
    assert import_netlist(export_netlist(nl)) == nl
    vecs = [data.draw(int_vectors(len(ast.inputs))) for _ in range(r)]
    feed = {(k, n.index): vecs[k][n.index] for k in range(r) for n in fu.invars}
    got = evaluate_netlist(nl, feed)
    for k in range(r):
        want = evaluate_dfg(dfg, dict(enumerate(vecs[k])))
        assert {j: got[(k, j)] for j in want} == want


def test_netlist_golden(cheb_src):
    fu = fuse_for_fu(cheb_dfg(cheb_src), ONE)
    text = export_netlist(replicate(fu, 1))
    assert text == (GOLDEN / "chebyshev_1dsp_netlist.txt").read_text()
    assert import_netlist(text) == replicate(fu, 1)


def test_netlist_roundtrip_sixteen(cheb_src):
    fu = chain_for_multidsp(fuse_for_fu(cheb_dfg(cheb_src), ONE), TWO)
    nl = replicate(fu, 16)
    assert import_netlist(export_netlist(nl)) == nl


def test_identity_kernel_netlist():
    fu = to_fudfg(cheb_dfg(IDENTITY))
    nl = replicate(fu, 3)
    assert len(nl.blocks_of("fu")) == 0
    assert compute_replication(fu, build_arch(rows=2, cols=2)).copies == 4
