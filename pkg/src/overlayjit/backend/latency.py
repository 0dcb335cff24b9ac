"""Latency balancing with FU input delay chains."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import DelayOverflow
from ..fumap import Netlist
from ..overlay import OverlayArch


@dataclass(frozen=True)
class DelayAssignment:
    delays: dict[tuple[str, int], int]  # (fu block, port) -> delay cycles
    input_arrival: dict[tuple[str, int], int]  # (block, port) -> cycle before delay
    arrival: dict[str, int]  # block -> cycle its output (or pad value) is valid

    def output_latency(self, netlist: Netlist) -> dict[tuple[int, int], int]:
        """Structural pipeline latency per ``(copy, output index)``."""
        return {(b.copy, b.index): self.arrival[b.name] for b in netlist.blocks_of("out")}


def _topo_blocks(netlist: Netlist) -> list[str]:
    deps = {name: {netlist.driver(name, p) for p in range(b.n_ports)} for name, b in netlist.blocks.items()}
    order, done = [], set()
    pending = sorted(deps)
    while pending:
        rest = []
        for name in pending:
            if deps[name] <= done:
                order.append(name)
                done.add(name)
            else:
                rest.append(name)
        if len(rest) == len(pending):
            raise ValueError("netlist contains a cycle")
        pending = rest
    return order


def balance_latency(netlist: Netlist, placement=None, routing=None, arch: OverlayArch | None = None,
                    fu_latency: int | None = None, max_delay: int | None = None) -> DelayAssignment:
    """Choose minimal input delays so every FU sees all operands in the same cycle.

    Routing is combinational and contributes no cycles; each FU adds the
    architecture's pipeline latency.  ``placement`` and ``routing`` are part
    of the stage interface but do not influence the result.
    """
    if arch is None and placement is not None:
        arch = placement.arch
    L = fu_latency if fu_latency is not None else arch.fu_pipeline_latency
    limit = max_delay if max_delay is not None else arch.max_delay_chain
    arrival: dict[str, int] = {}
    input_arrival: dict[tuple[str, int], int] = {}
    delays: dict[tuple[str, int], int] = {}
    for name in _topo_blocks(netlist):
        b = netlist.blocks[name]
        if b.kind == "in":
            arrival[name] = 0
            continue
        ins = [arrival[netlist.driver(name, p)] for p in range(b.n_ports)]
        for p, a in enumerate(ins):
            input_arrival[(name, p)] = a
        if b.kind == "out":
            arrival[name] = ins[0]
            continue
        ready = max(ins)
        for p, a in enumerate(ins):
            d = ready - a
            if d > limit:
                raise DelayOverflow(name, p, d, limit)
            delays[(name, p)] = d
        arrival[name] = ready + L
    return DelayAssignment(delays, input_arrival, arrival)
