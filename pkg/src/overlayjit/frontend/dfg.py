"""Dataflow graphs: lowering from the kernel AST and native optimisation."""

from __future__ import annotations

import heapq
import re
from collections import defaultdict
from dataclasses import dataclass

from ..errors import UnsupportedConstruct
from ..intmath import DEFAULT_WIDTH, wrap
from .kernel import BinOp, KernelAST, Let, Load, Local, Neg, Num, Store

__all__ = ["DfgNode", "Edge", "GraphView", "Dfg", "lower_to_dfg", "optimize_dfg", "parse_label"]

OPCODES = ("add", "sub", "mul", "rsub")
COMMUTATIVE = ("add", "mul")


@dataclass(frozen=True)
class DfgNode:
    id: int
    kind: str  # "invar" | "outvar" | "operation"
    opcode: str | None = None
    immediate: int | None = None
    index: int | None = None  # position among the kernel's input/output params

    @property
    def stem(self) -> str:
        if self.kind == "invar":
            return f"I{self.index}"
        if self.kind == "outvar":
            return f"O{self.index}"
        if self.immediate is None:
            return self.opcode
        return f"{self.opcode}_Imm_{self.immediate}"

    @property
    def label(self) -> str:
        return f"{self.stem}_N{self.id}"

    @property
    def arity(self) -> int:
        if self.kind == "invar":
            return 0
        if self.kind == "outvar" or self.immediate is not None:
            return 1
        return 2


_LABEL_RE = re.compile(r"^(?:(?P<io>[IO])(?P<idx>\d+)|(?P<op>add|sub|mul|rsub)(?:_Imm_(?P<imm>-?\d+))?)_N(?P<id>\d+)$")


def parse_label(label: str) -> DfgNode:
    """Inverse of :attr:`DfgNode.label`; raises ValueError on a foreign label."""
    m = _LABEL_RE.match(label)
    if not m:
        raise ValueError(f"unrecognised node label {label!r}")
    nid = int(m["id"])
    if m["io"]:
        kind = "invar" if m["io"] == "I" else "outvar"
        return DfgNode(nid, kind, index=int(m["idx"]))
    imm = int(m["imm"]) if m["imm"] is not None else None
    if m["op"] == "rsub" and imm is None:
        raise ValueError(f"rsub requires an immediate: {label!r}")
    return DfgNode(nid, "operation", m["op"], imm)


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    port: int


class GraphView:
    """Read-only graph queries shared by :class:`Dfg` and FU-aware graphs.

    Subclasses provide ``name``, ``nodes`` (id -> node with a ``kind``) and
    ``edges`` (a tuple of :class:`Edge`).
    """

    def _successors(self):
        succ = self.__dict__.get("_succ_cache")
        if succ is None:
            succ = defaultdict(list)
            for e in self.edges:
                succ[e.src].append(e)
            succ = dict(succ)
            object.__setattr__(self, "_succ_cache", succ)
        return succ

    def operands(self, nid: int) -> list[int]:
        ins = sorted((e for e in self.edges if e.dst == nid), key=lambda e: e.port)
        return [e.src for e in ins]

    def consumers(self, nid: int) -> list[Edge]:
        return list(self._successors().get(nid, ()))

    def of_kind(self, kind: str) -> list:
        return [n for _, n in sorted(self.nodes.items()) if n.kind == kind]

    @property
    def invars(self):
        return self.of_kind("invar")

    @property
    def outvars(self):
        return self.of_kind("outvar")

    def topo_order(self) -> list[int]:
        succ = self._successors()
        indeg = {nid: 0 for nid in self.nodes}
        for e in self.edges:
            indeg[e.dst] += 1
        ready = [n for n, d in indeg.items() if d == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            n = heapq.heappop(ready)
            order.append(n)
            for e in succ.get(n, ()):
                indeg[e.dst] -= 1
                if indeg[e.dst] == 0:
                    heapq.heappush(ready, e.dst)
        if len(order) != len(self.nodes):
            raise ValueError(f"graph {self.name!r} contains a cycle")
        return order


@dataclass(frozen=True)
class Dfg(GraphView):
    name: str
    nodes: dict[int, DfgNode]
    edges: tuple[Edge, ...]

    @property
    def operations(self):
        return self.of_kind("operation")

    def validate(self) -> None:
        """Check structural invariants; raises ValueError."""
        ports = defaultdict(list)
        for e in self.edges:
            if e.src not in self.nodes or e.dst not in self.nodes:
                raise ValueError(f"edge {e} references a missing node")
            ports[e.dst].append(e.port)
        for nid, node in self.nodes.items():
            if node.kind not in ("invar", "outvar", "operation"):
                raise ValueError(f"node {nid} has unknown kind {node.kind!r}")
            if node.kind == "operation" and node.opcode not in OPCODES:
                raise ValueError(f"node {nid} has unknown opcode {node.opcode!r}")
            if sorted(ports.get(nid, [])) != list(range(node.arity)):
                raise ValueError(f"node {node.label} expects {node.arity} inputs, got ports {sorted(ports.get(nid, []))}")
            if node.kind == "outvar" and self.consumers(nid):
                raise ValueError(f"outvar {node.label} has consumers")
        self.topo_order()


# -- lowering -------------------------------------------------------------------

class _Builder:
    def __init__(self):
        self.nodes: dict[int, DfgNode] = {}
        self.edges: list[Edge] = []

    def add(self, kind, opcode=None, immediate=None, index=None, srcs=()):
        nid = len(self.nodes) + 1
        self.nodes[nid] = DfgNode(nid, kind, opcode, immediate, index)
        for port, s in enumerate(srcs):
            self.edges.append(Edge(s, nid, port))
        return nid


def lower_to_dfg(ast: KernelAST, width: int = DEFAULT_WIDTH) -> Dfg:
    """Lower a kernel AST to a DFG, canonicalising literal operands to immediates.

    Node ids follow creation order, which is a topological order of first use.
    """
    b = _Builder()
    in_index = {p: k for k, p in enumerate(ast.inputs)}
    out_index = {p: k for k, p in enumerate(ast.outputs)}
    loads: dict[str, int] = {}
    env: dict[str, tuple[str, int]] = {}

    def lower(e):
        if isinstance(e, Num):
            return ("c", wrap(e.value, width))
        if isinstance(e, Local):
            return env[e.name]
        if isinstance(e, Load):
            if e.param not in loads:
                loads[e.param] = b.add("invar", index=in_index[e.param])
            return ("n", loads[e.param])
        if isinstance(e, Neg):
            kind, v = lower(e.operand)
            if kind == "c":
                return ("c", wrap(-v, width))
            return ("n", b.add("operation", "rsub", 0, srcs=[v]))
        if isinstance(e, BinOp):
            lk, lv = lower(e.lhs)
            rk, rv = lower(e.rhs)
            if lk == "c" and rk == "c":
                return ("c", _fold(e.op, lv, rv, width))
            if rk == "c":
                return ("n", b.add("operation", e.op, rv, srcs=[lv]))
            if lk == "c":
                op = "rsub" if e.op == "sub" else e.op
                return ("n", b.add("operation", op, lv, srcs=[rv]))
            return ("n", b.add("operation", e.op, srcs=[lv, rv]))
        raise TypeError(f"unexpected AST node {e!r}")

    for stmt in ast.body:
        if isinstance(stmt, Let):
            env[stmt.name] = lower(stmt.expr)
        elif isinstance(stmt, Store):
            kind, v = lower(stmt.expr)
            if kind == "c":
                raise UnsupportedConstruct("constant output", f"{stmt.param}[{ast.index_var}] is a literal")
            b.add("outvar", index=out_index[stmt.param], srcs=[v])
    return Dfg(ast.name, b.nodes, tuple(b.edges))


def _fold(op, a, b, width):
    if op == "add":
        return wrap(a + b, width)
    if op == "sub":
        return wrap(a - b, width)
    return wrap(a * b, width)


# -- optimisation ---------------------------------------------------------------

def _affine(node: DfgNode):
    """(sign, offset) for add/sub/rsub immediates: x -> sign*x + offset."""
    if node.opcode == "add":
        return 1, node.immediate
    if node.opcode == "sub":
        return 1, -node.immediate
    return -1, node.immediate


def _is_identity(node: DfgNode, width: int) -> bool:
    if node.kind != "operation" or node.immediate is None:
        return False
    imm = wrap(node.immediate, width)
    return (node.opcode in ("add", "sub") and imm == 0) or (node.opcode == "mul" and imm == 1)


class _Work:
    """Mutable view of a DFG used while rewriting."""

    def __init__(self, dfg: Dfg):
        self.name = dfg.name
        self.nodes = dict(dfg.nodes)
        self.srcs = {nid: dfg.operands(nid) for nid in dfg.nodes}

    def users(self):
        u = defaultdict(list)
        for nid in sorted(self.srcs):
            for s in self.srcs[nid]:
                u[s].append(nid)
        return u

    def replace_uses(self, old, new):
        for nid, srcs in self.srcs.items():
            self.srcs[nid] = [new if s == old else s for s in srcs]

    def topo(self):
        edges = [Edge(s, d, p) for d, srcs in self.srcs.items() for p, s in enumerate(srcs)]
        return Dfg(self.name, self.nodes, tuple(edges)).topo_order()

    def freeze(self) -> Dfg:
        edges = [Edge(s, d, p) for d in sorted(self.srcs) for p, s in enumerate(self.srcs[d])]
        return Dfg(self.name, dict(sorted(self.nodes.items())), tuple(edges))


def _bypass_identities(w: _Work, width) -> bool:
    changed = False
    for nid in w.topo():
        node = w.nodes[nid]
        if _is_identity(node, width):
            w.replace_uses(nid, w.srcs[nid][0])
            changed = True
    return changed


def _fold_immediate_chains(w: _Work, width) -> bool:
    users = w.users()
    for nid in w.topo():
        node = w.nodes[nid]
        if node.kind != "operation" or node.immediate is None:
            continue
        (src,) = w.srcs[nid]
        inner = w.nodes[src]
        if inner.kind != "operation" or inner.immediate is None or len(users[src]) != 1:
            continue
        if node.opcode == "mul" and inner.opcode == "mul":
            merged = DfgNode(nid, "operation", "mul", wrap(node.immediate * inner.immediate, width))
        elif node.opcode != "mul" and inner.opcode != "mul":
            s1, c1 = _affine(inner)
            s2, c2 = _affine(node)
            sign, off = s1 * s2, wrap(s2 * c1 + c2, width)
            if sign == -1:
                merged = DfgNode(nid, "operation", "rsub", off)
            elif off < 0:
                merged = DfgNode(nid, "operation", "sub", wrap(-off, width))
            else:
                merged = DfgNode(nid, "operation", "add", off)
        else:
            continue
        w.nodes[nid] = merged
        w.srcs[nid] = list(w.srcs[src])
        return True
    return False


def _constant_values(w: _Work, width) -> dict[int, int]:
    const: dict[int, int] = {}
    for nid in w.topo():
        node = w.nodes[nid]
        if node.kind != "operation":
            continue
        srcs = w.srcs[nid]
        if node.immediate is not None:
            if node.opcode == "mul" and wrap(node.immediate, width) == 0:
                const[nid] = 0
            elif srcs[0] in const:
                v = const[srcs[0]]
                if node.opcode == "rsub":
                    const[nid] = wrap(node.immediate - v, width)
                else:
                    const[nid] = _fold(node.opcode, v, node.immediate, width)
        elif srcs[0] in const and srcs[1] in const:
            const[nid] = _fold(node.opcode, const[srcs[0]], const[srcs[1]], width)
        elif node.opcode == "mul" and (srcs[0] in const and const[srcs[0]] == 0 or
                                       srcs[1] in const and const[srcs[1]] == 0):
            const[nid] = 0
    return const


def _propagate_constants(w: _Work, width) -> bool:
    const = _constant_values(w, width)
    for nid in w.topo():
        node = w.nodes[nid]
        if node.kind != "operation" or node.immediate is not None or nid in const:
            continue
        a, b = w.srcs[nid]
        if b in const:
            w.nodes[nid] = DfgNode(nid, "operation", node.opcode, const[b])
            w.srcs[nid] = [a]
            return True
        if a in const:
            op = "rsub" if node.opcode == "sub" else node.opcode
            w.nodes[nid] = DfgNode(nid, "operation", op, const[a])
            w.srcs[nid] = [b]
            return True
    return False


def _cse(w: _Work) -> bool:
    seen: dict[tuple, int] = {}
    changed = False
    for nid in w.topo():
        node = w.nodes[nid]
        if node.kind != "operation":
            continue
        srcs = w.srcs[nid]
        key_srcs = tuple(sorted(srcs)) if node.opcode in COMMUTATIVE else tuple(srcs)
        key = (node.opcode, node.immediate, key_srcs)
        if key in seen:
            w.replace_uses(nid, seen[key])
            changed = True
        else:
            seen[key] = nid
    return changed


def _dce(w: _Work) -> bool:
    live = set()
    stack = [nid for nid, n in w.nodes.items() if n.kind == "outvar"]
    while stack:
        n = stack.pop()
        if n in live:
            continue
        live.add(n)
        stack.extend(w.srcs[n])
    dead = set(w.nodes) - live
    for nid in dead:
        del w.nodes[nid]
        del w.srcs[nid]
    return bool(dead)


def _renumber(w: _Work) -> None:
    mapping = {old: new for new, old in enumerate(sorted(w.nodes), start=1)}
    w.nodes = {mapping[o]: DfgNode(mapping[o], n.kind, n.opcode, n.immediate, n.index)
               for o, n in w.nodes.items()}
    w.srcs = {mapping[o]: [mapping[s] for s in srcs] for o, srcs in w.srcs.items()}


def optimize_dfg(dfg: Dfg, width: int = DEFAULT_WIDTH) -> Dfg:
    """Constant folding, common-subexpression and dead-node elimination.

    Runs every rewrite to a fixed point and then compacts node ids, so
    ``optimize_dfg(optimize_dfg(g)) == optimize_dfg(g)``.
    """
    w = _Work(dfg)
    while True:
        changed = _bypass_identities(w, width)
        changed |= _propagate_constants(w, width)
        changed |= _fold_immediate_chains(w, width)
        changed |= _cse(w)
        changed |= _dce(w)
        if not changed:
            break
    _renumber(w)
    return w.freeze()
