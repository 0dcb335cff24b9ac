"""Negotiated-congestion (PathFinder) routing over the routing-resource graph."""

from __future__ import annotations

import heapq
import logging
from collections import Counter
from dataclasses import dataclass

from ..errors import Unroutable
from ..overlay import RrGraph
from .placer import ParSeed, Placement

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RouterOptions:
    max_iterations: int = 60
    initial_pres_fac: float = 0.5
    pres_fac_mult: float = 1.6
    hist_fac: float = 0.5


@dataclass(frozen=True)
class NetPins:
    name: str
    source: int
    sinks: tuple[int, ...]


@dataclass(frozen=True)
class Routing:
    """Per-net route trees as ``(node, parent)`` pairs in insertion order.

    The root entry has parent ``-1``.
    """
    trees: dict[str, tuple[tuple[int, int], ...]]
    pins: dict[str, NetPins]
    iterations: int
    overuse: int

    def path(self, net: str) -> list[int]:
        return [n for n, _ in self.trees[net]]


def net_terminals(placement: Placement, rr: RrGraph) -> list[NetPins]:
    """Map every net's source and sinks onto routing-resource pin nodes."""
    out = []
    for net in placement.netlist.nets:
        src_site = placement.sites[net.source]
        if src_site[0] == "tile":
            source = rr.opin(src_site[1], src_site[2])
        else:
            source = rr.pad_opin(src_site[1])
        sinks = []
        for blk, port in net.sinks:
            site = placement.sites[blk]
            sinks.append(rr.ipin(site[1], site[2], port) if site[0] == "tile" else rr.pad_ipin(site[1]))
        out.append(NetPins(net.name, source, tuple(sinks)))
    return out


def _route_order(nets: list[NetPins]) -> list[NetPins]:
    return sorted(nets, key=lambda n: (-len(n.sinks), n.name))


class _PathFinder:
    def __init__(self, rr: RrGraph, opts: RouterOptions):
        self.rr = rr
        self.opts = opts
        n = len(rr)
        self.occ = [0] * n
        self.hist = [0.0] * n
        self.is_sink_pin = [node.kind in ("IPIN", "PAD_IPIN") for node in rr.nodes]

    def node_cost(self, n: int, pres_fac: float) -> float:
        over = self.occ[n] + 1 - self.rr.nodes[n].capacity
        return (1.0 + self.hist[n]) * (1.0 + pres_fac * over if over > 0 else 1.0)

    def route_net(self, net: NetPins, pres_fac: float) -> list[tuple[int, int]]:
        tree = [(net.source, -1)]
        in_tree = {net.source}
        fanout = self.rr.fanout
        for sink in sorted(set(net.sinks)):
            if sink in in_tree:
                continue
            dist = {n: 0.0 for n in in_tree}
            prev: dict[int, int] = {}
            heap = [(0.0, n) for n in sorted(in_tree)]
            heapq.heapify(heap)
            found = False
            while heap:
                d, n = heapq.heappop(heap)
                if n == sink:
                    found = True
                    break
                if d > dist.get(n, float("inf")):
                    continue
                for m in fanout[n]:
                    if self.is_sink_pin[m] and m != sink:
                        continue
                    nd = d + self.node_cost(m, pres_fac)
                    if nd < dist.get(m, float("inf")):
                        dist[m] = nd
                        prev[m] = n
                        heapq.heappush(heap, (nd, m))
            if not found:
                raise Unroutable(f"net {net.name}: sink pin {sink} is unreachable from the source")
            path = []
            n = sink
            while n not in in_tree:
                path.append((n, prev[n]))
                n = prev[n]
            for node, parent in reversed(path):
                tree.append((node, parent))
                in_tree.add(node)
        return tree


def route(placement: Placement, rr: RrGraph, seed: ParSeed | None = None,
          options: RouterOptions | None = None) -> Routing:
    """Route every net with PathFinder until no routing resource is overused.

    Nets are routed in descending fan-out order (ties by name) and searches
    break ties on node id, so the result is a pure function of the inputs.
    ``seed`` is accepted for interface symmetry; the router draws no random
    numbers.
    """
    opts = options or RouterOptions()
    nets = _route_order(net_terminals(placement, rr))
    pf = _PathFinder(rr, opts)
    trees: dict[str, list[tuple[int, int]]] = {}
    pres_fac = opts.initial_pres_fac
    overused: list[int] = []
    for it in range(1, opts.max_iterations + 1):
        for net in nets:
            old = trees.get(net.name)
            if old is not None:
                for n, _ in old:
                    pf.occ[n] -= 1
            tree = pf.route_net(net, pres_fac)
            for n, _ in tree:
                pf.occ[n] += 1
            trees[net.name] = tree
        overused = [n for n, o in enumerate(pf.occ) if o > rr.nodes[n].capacity]
        log.debug("iteration %d: %d overused nodes", it, len(overused))
        if not overused:
            ordered = {n.name: tuple(trees[n.name]) for n in sorted(nets, key=lambda n: n.name)}
            return Routing(ordered, {n.name: n for n in nets}, it, 0)
        for n in overused:
            pf.hist[n] += opts.hist_fac * (pf.occ[n] - rr.nodes[n].capacity)
        pres_fac *= opts.pres_fac_mult
    worst = max(pf.occ)
    raise Unroutable(
        f"{len(overused)} routing resources still overused after {opts.max_iterations} iterations "
        f"(max occupancy {worst} on capacity-1 nodes); try a larger channel_width "
        f"than {rr.arch.channel_width}"
    )


def audit_routing(routing: Routing, rr: RrGraph) -> dict:
    """Independently recount resource use and check every route tree.

    Returns ``{"overuse": int, "errors": [str, ...]}``; a legal routing has
    zero overuse and no errors.
    """
    errors = []
    use = Counter()
    for name, tree in routing.trees.items():
        pins = routing.pins[name]
        nodes = [n for n, _ in tree]
        if not tree or tree[0] != (pins.source, -1):
            errors.append(f"{name}: tree does not start at its source pin")
        seen = set()
        for n, parent in tree:
            if parent != -1:
                if parent not in seen:
                    errors.append(f"{name}: node {n} attached before its parent {parent}")
                if n not in rr.fanout[parent]:
                    errors.append(f"{name}: {parent}->{n} is not a routing-resource edge")
            if n in seen:
                errors.append(f"{name}: node {n} appears twice")
            seen.add(n)
        for s in pins.sinks:
            if s not in seen:
                errors.append(f"{name}: sink {s} not reached")
        use.update(set(nodes))
    overuse = sum(max(0, c - rr.nodes[n].capacity) for n, c in use.items())
    return {"overuse": overuse, "errors": errors}


def dump_routing(routing: Routing, rr: RrGraph) -> str:
    lines = [f"routing iterations={routing.iterations} overuse={routing.overuse}"]
    for name, tree in routing.trees.items():
        pins = routing.pins[name]
        lines.append(f"net {name} source={pins.source} sinks={','.join(map(str, pins.sinks))}")
        for n, parent in tree:
            node = rr.nodes[n]
            lines.append(f"  {n} {parent} {node.kind} {node.x} {node.y} {node.index}")
    return "\n".join(lines) + "\n"


def load_routing(text: str) -> Routing:
    trees: dict[str, list] = {}
    pins = {}
    iterations = overuse = 0
    current = None
    for line in text.splitlines():
        if not line.strip():
            continue
        parts = line.split()
        if parts[0] == "routing":
            kv = dict(p.split("=", 1) for p in parts[1:])
            iterations, overuse = int(kv["iterations"]), int(kv["overuse"])
        elif parts[0] == "net":
            current = parts[1]
            kv = dict(p.split("=", 1) for p in parts[2:])
            sinks = tuple(int(s) for s in kv["sinks"].split(",") if s)
            pins[current] = NetPins(current, int(kv["source"]), sinks)
            trees[current] = []
        else:
            trees[current].append((int(parts[0]), int(parts[1])))
    return Routing({k: tuple(v) for k, v in trees.items()}, pins, iterations, overuse)
