"""FU-aware DFG transformation, replication planning and netlist emission.

An FU node carries a short *micro-program*: a list of :class:`Step` objects,
each combining two operands.  Operands are written ``p<k>`` (FU input port
``k``), ``s<j>`` (result of step ``j``) or ``#<int>`` (an immediate).  The
FU output is the result of its last step.  Input ports correspond to
*distinct* producers, so ``x*x`` occupies a single port.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import DoesNotFit, InvalidParameter
from .frontend.dfg import Dfg, DfgNode, Edge, GraphView
from .overlay import FU_INPUTS, OverlayArch

__all__ = [
    "Step", "format_steps", "parse_steps", "FuCapabilityModel", "FuNode", "FuDfg",
    "fuse_for_fu", "chain_for_multidsp", "to_fudfg", "ReplicationPlan", "compute_replication",
    "Block", "Net", "Netlist", "replicate", "export_netlist", "import_netlist",
]

POST_ALU = ("add", "sub", "rsub")


@dataclass(frozen=True)
class Step:
    opcode: str  # add | sub | mul
    a: tuple  # ("p", k) | ("s", j) | ("i", value)
    b: tuple


def _fmt_operand(o) -> str:
    kind, v = o
    return {"p": f"p{v}", "s": f"s{v}", "i": f"#{v}"}[kind]


def format_steps(steps) -> str:
    return ";".join(f"{s.opcode}({_fmt_operand(s.a)},{_fmt_operand(s.b)})" for s in steps)


_STEP_RE = re.compile(r"^(add|sub|mul)\(([^,()]+),([^,()]+)\)$")


def _parse_operand(text: str):
    if text.startswith("#"):
        return ("i", int(text[1:]))
    if text[:1] in ("p", "s") and text[1:].isdigit():
        return (text[0], int(text[1:]))
    raise ValueError(f"bad operand {text!r}")


def parse_steps(text: str) -> tuple[Step, ...]:
    steps = []
    for part in text.split(";") if text else []:
        m = _STEP_RE.match(part)
        if not m:
            raise ValueError(f"bad step {part!r}")
        steps.append(Step(m.group(1), _parse_operand(m.group(2)), _parse_operand(m.group(3))))
    return tuple(steps)


def _step_ports(steps) -> int:
    ports = [v for s in steps for kind, v in (s.a, s.b) if kind == "p"]
    return max(ports) + 1 if ports else 0


@dataclass(frozen=True)
class FuCapabilityModel:
    dsps_per_fu: int = 1
    fu_pipeline_latency: int | None = None

    def __post_init__(self):
        if self.dsps_per_fu not in (1, 2):
            raise InvalidParameter("dsps_per_fu must be 1 or 2")
        if self.fu_pipeline_latency is None:
            object.__setattr__(self, "fu_pipeline_latency", 3 * self.dsps_per_fu)
        if self.fu_pipeline_latency < 1:
            raise InvalidParameter("fu_pipeline_latency must be >= 1")

    @classmethod
    def for_arch(cls, arch: OverlayArch) -> "FuCapabilityModel":
        return cls(arch.dsps_per_fu, arch.fu_pipeline_latency)


@dataclass(frozen=True)
class FuNode:
    id: int
    kind: str  # invar | outvar | fu
    index: int | None = None
    steps: tuple[Step, ...] = ()
    stems: tuple[str, ...] = ()  # one stem per DSP block used

    @property
    def dsps(self) -> int:
        return len(self.stems)

    @property
    def n_ports(self) -> int:
        if self.kind == "invar":
            return 0
        if self.kind == "outvar":
            return 1
        return _step_ports(self.steps)

    @property
    def label(self) -> str:
        if self.kind == "invar":
            return f"I{self.index}_N{self.id}"
        if self.kind == "outvar":
            return f"O{self.index}_N{self.id}"
        return ",".join(self.stems) + f"_N{self.id}"


@dataclass(frozen=True)
class FuDfg(GraphView):
    name: str
    nodes: dict[int, FuNode]
    edges: tuple[Edge, ...]

    @property
    def fu_nodes(self) -> list[FuNode]:
        return self.of_kind("fu")

    def validate(self) -> None:
        ports: dict[int, list[int]] = {}
        for e in self.edges:
            ports.setdefault(e.dst, []).append(e.port)
        for nid, node in self.nodes.items():
            got = sorted(ports.get(nid, []))
            if got != list(range(node.n_ports)):
                raise ValueError(f"{node.label}: expected ports 0..{node.n_ports - 1}, got {got}")
            if node.kind == "fu" and node.n_ports > FU_INPUTS:
                raise ValueError(f"{node.label} needs {node.n_ports} inputs; an FU has {FU_INPUTS}")
            srcs = self.operands(nid)
            if len(set(srcs)) != len(srcs):
                raise ValueError(f"{node.label} has duplicate producers on separate ports")
        self.topo_order()


def _node_steps(node: DfgNode, port_of: dict[int, int], srcs: list[int]) -> Step:
    if node.immediate is None:
        return Step(node.opcode, ("p", port_of[srcs[0]]), ("p", port_of[srcs[1]]))
    p = ("p", port_of[srcs[0]])
    imm = ("i", node.immediate)
    if node.opcode == "rsub":
        return Step("sub", imm, p)
    return Step(node.opcode, p, imm)


def _post_step(node: DfgNode, prev: int) -> Step:
    s = ("s", prev)
    imm = ("i", node.immediate)
    if node.opcode == "rsub":
        return Step("sub", imm, s)
    return Step(node.opcode, s, imm)


def _distinct(seq):
    out = []
    for v in seq:
        if v not in out:
            out.append(v)
    return out


def _renumber(name, nodes: dict[int, FuNode], srcs: dict[int, list[int]]) -> FuDfg:
    mapping = {old: new for new, old in enumerate(sorted(nodes), start=1)}
    new_nodes = {}
    edges = []
    for old in sorted(nodes):
        n = nodes[old]
        new_nodes[mapping[old]] = FuNode(mapping[old], n.kind, n.index, n.steps, n.stems)
        for port, s in enumerate(srcs[old]):
            edges.append(Edge(mapping[s], mapping[old], port))
    return FuDfg(name, new_nodes, tuple(edges))


def to_fudfg(dfg: Dfg) -> FuDfg:
    """Wrap every operation in its own single-DSP FU without fusing."""
    return fuse_for_fu(dfg, FuCapabilityModel(1), fuse=False)


def fuse_for_fu(dfg: Dfg, model: FuCapabilityModel | None = None, fuse: bool = True) -> FuDfg:
    """Fuse each ``mul`` with an immediate add/sub consumer into one DSP FU.

    A multiply is fused with its consumer when it has exactly one consumer
    and that consumer is an immediate ``add``/``sub``/``rsub`` (the DSP's
    post-adder).  Candidates are visited in reverse topological order and
    every node takes part in at most one fusion.
    """
    absorbed: dict[int, int] = {}  # post-op id -> mul id
    partner: dict[int, int] = {}  # mul id -> post-op id
    if fuse:
        for nid in reversed(dfg.topo_order()):
            node = dfg.nodes[nid]
            if node.kind != "operation" or node.opcode != "mul" or nid in partner or nid in absorbed:
                continue
            cons = dfg.consumers(nid)
            if len(cons) != 1:
                continue
            c = dfg.nodes[cons[0].dst]
            if (c.kind == "operation" and c.immediate is not None and c.opcode in POST_ALU
                    and c.id not in absorbed and c.id not in partner):
                partner[nid] = c.id
                absorbed[c.id] = nid

    def rep(nid):
        return absorbed.get(nid, nid)

    nodes: dict[int, FuNode] = {}
    srcs: dict[int, list[int]] = {}
    for nid in dfg.topo_order():
        node = dfg.nodes[nid]
        if nid in absorbed:
            continue
        operands = [rep(s) for s in dfg.operands(nid)]
        if node.kind in ("invar", "outvar"):
            nodes[nid] = FuNode(nid, node.kind, node.index)
            srcs[nid] = operands
            continue
        ports = _distinct(operands)
        port_of = {s: k for k, s in enumerate(ports)}
        steps = [_node_steps(node, port_of, operands)]
        stem = node.stem
        if nid in partner:
            post = dfg.nodes[partner[nid]]
            steps.append(_post_step(post, 0))
            stem = f"{stem}_{post.stem}"
        nodes[nid] = FuNode(nid, "fu", steps=tuple(steps), stems=(stem,))
        srcs[nid] = ports
    return _renumber(dfg.name, nodes, srcs)


def _external_producers(g: FuDfg, a: int, b: int) -> list[int]:
    return _distinct(g.operands(a) + [s for s in g.operands(b) if s != a])


def _merge(g: FuDfg, a: int, b: int) -> tuple[FuNode, list[int]]:
    na, nb = g.nodes[a], g.nodes[b]
    ports = _external_producers(g, a, b)
    port_of = {s: k for k, s in enumerate(ports)}
    a_srcs, b_srcs = g.operands(a), g.operands(b)
    last_a = len(na.steps) - 1
    offset = len(na.steps)

    def remap_a(o):
        return ("p", port_of[a_srcs[o[1]]]) if o[0] == "p" else o

    def remap_b(o):
        if o[0] == "p":
            prod = b_srcs[o[1]]
            return ("s", last_a) if prod == a else ("p", port_of[prod])
        if o[0] == "s":
            return ("s", o[1] + offset)
        return o

    steps = [Step(s.opcode, remap_a(s.a), remap_a(s.b)) for s in na.steps]
    steps += [Step(s.opcode, remap_b(s.a), remap_b(s.b)) for s in nb.steps]
    return FuNode(a, "fu", steps=tuple(steps), stems=na.stems + nb.stems), ports


def chain_for_multidsp(fudfg: FuDfg, model: FuCapabilityModel) -> FuDfg:
    """Merge producer/consumer pairs of single-DSP FUs into two-DSP FUs.

    A pair ``(a, b)`` qualifies when ``b`` is ``a``'s only consumer and the
    pair reads at most two distinct external producers.  Maximal chains of
    qualifying links are matched longest first, pairing from the chain head.
    """
    if model.dsps_per_fu < 2:
        return fudfg
    g = fudfg
    link: dict[int, int] = {}
    for n in g.fu_nodes:
        cons = g.consumers(n.id)
        if n.dsps == 1 and len(cons) == 1:
            b = g.nodes[cons[0].dst]
            if b.kind == "fu" and b.dsps == 1:
                link[n.id] = b.id

    processed: set[int] = set()
    pairs: list[tuple[int, int]] = []
    while True:
        best: list[int] | None = None
        for start in sorted(link):
            if start in processed:
                continue
            path = [start]
            n = start
            while n in link and link[n] not in processed:
                n = link[n]
                path.append(n)
            if len(path) >= 2 and (best is None or len(path) > len(best)):
                best = path
        if best is None:
            break
        i = 0
        while i + 1 < len(best):
            a, b = best[i], best[i + 1]
            if len(_external_producers(g, a, b)) <= FU_INPUTS:
                pairs.append((a, b))
                i += 2
            else:
                i += 1
        processed.update(best)

    absorbed = {b: a for a, b in pairs}
    nodes: dict[int, FuNode] = {}
    srcs: dict[int, list[int]] = {}
    for nid, node in g.nodes.items():
        if nid in absorbed:
            continue
        b = next((b for a, b in pairs if a == nid), None)
        if b is None:
            nodes[nid] = node
            ops = g.operands(nid)
        else:
            nodes[nid], ops = _merge(g, nid, b)
        srcs[nid] = [absorbed.get(s, s) for s in ops]
    return _renumber(g.name, nodes, srcs)


# -- replication ----------------------------------------------------------------

@dataclass(frozen=True)
class ReplicationPlan:
    copies: int
    fu_limit: int
    io_limit: int
    binding_reason: str  # "fu-limited" | "io-limited"


def compute_replication(fudfg: FuDfg, arch: OverlayArch, kernel_io: tuple[int, int] | None = None) -> ReplicationPlan:
    """Largest whole number of kernel copies that fits the overlay.

    ``fu_limit = tiles // fu_count`` and ``io_limit = io_pins // (inputs + outputs)``;
    the plan takes the smaller of the two.
    """
    f = len(fudfg.fu_nodes)
    i, o = kernel_io if kernel_io is not None else (len(fudfg.invars), len(fudfg.outvars))
    if i + o == 0:
        raise DoesNotFit("kernel has no inputs or outputs to place")
    if f > arch.tiles:
        raise DoesNotFit(f"kernel needs {f} FUs but the {arch.rows}x{arch.cols} overlay has {arch.tiles}")
    if i + o > arch.io_pins:
        raise DoesNotFit(f"kernel needs {i + o} I/O pins but the overlay has {arch.io_pins}")
    io_limit = arch.io_pins // (i + o)
    fu_limit = arch.tiles // f if f else io_limit
    if fu_limit <= io_limit:
        return ReplicationPlan(fu_limit, fu_limit, io_limit, "fu-limited")
    return ReplicationPlan(io_limit, fu_limit, io_limit, "io-limited")


@dataclass(frozen=True)
class Block:
    name: str
    kind: str  # fu | in | out
    copy: int
    node: int
    index: int | None = None
    steps: tuple[Step, ...] = ()
    label: str = ""

    @property
    def n_ports(self) -> int:
        if self.kind == "in":
            return 0
        if self.kind == "out":
            return 1
        return _step_ports(self.steps)


@dataclass(frozen=True)
class Net:
    source: str
    sinks: tuple[tuple[str, int], ...]

    @property
    def name(self) -> str:
        return self.source


@dataclass(frozen=True)
class Netlist:
    name: str
    copies: int
    blocks: dict[str, Block]
    nets: tuple[Net, ...]
    _by_sink: dict = field(default=None, init=False, repr=False, compare=False)

    def blocks_of(self, kind: str) -> list[Block]:
        return [b for b in self.blocks.values() if b.kind == kind]

    def driver(self, block: str, port: int) -> str:
        """Name of the block driving ``block``'s input ``port``."""
        if self._by_sink is None:
            object.__setattr__(self, "_by_sink", {s: n.source for n in self.nets for s in n.sinks})
        return self._by_sink[(block, port)]


def _block_name(copy: int, nid: int) -> str:
    return f"c{copy}_n{nid}"


def replicate(fudfg: FuDfg, plan: ReplicationPlan | int) -> Netlist:
    """Instantiate ``plan.copies`` disjoint copies of the FU-aware graph."""
    copies = plan if isinstance(plan, int) else plan.copies
    if copies < 1:
        raise DoesNotFit("replication factor must be at least 1")
    kind_of = {"invar": "in", "outvar": "out", "fu": "fu"}
    blocks: dict[str, Block] = {}
    nets: list[Net] = []
    for k in range(copies):
        for nid in sorted(fudfg.nodes):
            n = fudfg.nodes[nid]
            name = _block_name(k, nid)
            blocks[name] = Block(name, kind_of[n.kind], k, nid, n.index, n.steps,
                                 n.label if n.kind == "fu" else "")
        for nid in sorted(fudfg.nodes):
            cons = sorted(fudfg.consumers(nid), key=lambda e: (e.dst, e.port))
            if cons:
                nets.append(Net(_block_name(k, nid),
                                tuple((_block_name(k, e.dst), e.port) for e in cons)))
    return Netlist(fudfg.name, copies, blocks, tuple(nets))


def export_netlist(netlist: Netlist) -> str:
    """Text form: a header, one ``block`` line per block, one ``net`` line per net."""
    lines = [f"netlist {netlist.name} copies={netlist.copies}"]
    for b in netlist.blocks.values():
        line = f"block {b.name} kind={b.kind} copy={b.copy} node={b.node}"
        if b.kind == "fu":
            line += f" ops={format_steps(b.steps)} label={b.label}"
        else:
            line += f" index={b.index}"
        lines.append(line)
    for n in netlist.nets:
        sinks = " ".join(f"{blk}:{port}" for blk, port in n.sinks)
        lines.append(f"net {n.source} -> {sinks}")
    return "\n".join(lines) + "\n"


def import_netlist(text: str) -> Netlist:
    name, copies = None, 0
    blocks: dict[str, Block] = {}
    nets = []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        try:
            if parts[0] == "netlist":
                name = parts[1]
                copies = int(parts[2].split("=", 1)[1])
            elif parts[0] == "block":
                attrs = dict(p.split("=", 1) for p in parts[2:])
                steps = parse_steps(attrs.get("ops", ""))
                index = int(attrs["index"]) if "index" in attrs else None
                blocks[parts[1]] = Block(parts[1], attrs["kind"], int(attrs["copy"]), int(attrs["node"]),
                                         index, steps, attrs.get("label", ""))
            elif parts[0] == "net":
                if parts[2] != "->":
                    raise ValueError("expected '->'")
                sinks = tuple((s.rsplit(":", 1)[0], int(s.rsplit(":", 1)[1])) for s in parts[3:])
                nets.append(Net(parts[1], sinks))
            else:
                raise ValueError(f"unknown record {parts[0]!r}")
        except (IndexError, KeyError, ValueError) as exc:
            raise ValueError(f"netlist line {lineno}: {exc}") from None
    if name is None:
        raise ValueError("netlist header missing")
    return Netlist(name, copies, blocks, tuple(nets))
