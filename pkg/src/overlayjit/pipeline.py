"""The full kernel-to-configuration flow as one call."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .backend import Configuration, DelayAssignment, balance_latency, encode_config, generate_config
from .errors import DoesNotFit
from .frontend import Dfg, KernelAST, lower_to_dfg, optimize_dfg, parse_kernel
from .fumap import (FuCapabilityModel, FuDfg, Netlist, ReplicationPlan, chain_for_multidsp,
                    compute_replication, fuse_for_fu, replicate)
from .overlay import OverlayArch, RrGraph, build_rr_graph
from .par import ParSeed, Placement, Routing, place, route

STAGES = ("parse", "lower", "fuse", "replicate", "place", "route", "balance", "encode")


@dataclass
class CompileResult:
    arch: OverlayArch
    ast: KernelAST
    dfg: Dfg
    fudfg: FuDfg
    plan: ReplicationPlan
    netlist: Netlist
    rr: RrGraph
    placement: Placement
    routing: Routing
    delays: DelayAssignment
    config: Configuration
    blob: bytes
    timings_ms: dict[str, float] = field(default_factory=dict)

    @property
    def copies(self) -> int:
        return self.netlist.copies

    @property
    def ops_per_kernel(self) -> int:
        return len(self.dfg.operations)


class _Clock:
    def __init__(self):
        self.times: dict[str, float] = {}

    def __call__(self, stage, fn, *args, **kw):
        t = time.perf_counter()
        out = fn(*args, **kw)
        self.times[stage] = (time.perf_counter() - t) * 1000.0
        return out


def map_kernel(source: str | KernelAST, arch: OverlayArch) -> tuple[KernelAST, Dfg, FuDfg, dict]:
    """Front half of the flow: parse, lower, optimise and fuse for ``arch``'s FU."""
    clock = _Clock()
    ast = source if isinstance(source, KernelAST) else clock("parse", parse_kernel, source)
    clock.times.setdefault("parse", 0.0)
    dfg = clock("lower", lambda: optimize_dfg(lower_to_dfg(ast, arch.data_width), arch.data_width))
    model = FuCapabilityModel.for_arch(arch)
    fu = clock("fuse", lambda: chain_for_multidsp(fuse_for_fu(dfg, model), model))
    return ast, dfg, fu, clock.times


def compile_kernel(source: str | KernelAST, arch: OverlayArch, seed: ParSeed | int | None = None,
                   copies: int | None = None, rr: RrGraph | None = None) -> CompileResult:
    """Run every stage and return all intermediate artifacts.

    ``copies`` caps the replication factor; by default the planner's
    maximum is used.
    """
    if not isinstance(seed, ParSeed):
        seed = ParSeed() if seed is None else ParSeed(seed=seed)
    ast, dfg, fu, times = map_kernel(source, arch)
    clock = _Clock()
    clock.times.update(times)
    plan = compute_replication(fu, arch)
    if copies is not None:
        if not 1 <= copies <= plan.copies:
            raise DoesNotFit(f"{copies} copies requested but at most {plan.copies} fit")
        plan = ReplicationPlan(copies, plan.fu_limit, plan.io_limit, "requested")
    netlist = clock("replicate", replicate, fu, plan)
    rr = rr or build_rr_graph(arch)
    placement = clock("place", place, netlist, arch, seed)
    routing = clock("route", route, placement, rr, seed)
    delays = clock("balance", balance_latency, netlist, placement, routing, arch)
    config = clock("encode", generate_config, placement, routing, delays, arch, rr)
    blob = encode_config(config)
    return CompileResult(arch, ast, dfg, fu, plan, netlist, rr, placement, routing, delays, config,
                         blob, {s: clock.times.get(s, 0.0) for s in STAGES})
