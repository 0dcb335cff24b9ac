"""Reference evaluators used as oracles for every compiler stage."""

from __future__ import annotations

from collections.abc import Mapping, Sequence

from ..frontend.dfg import Dfg
from ..frontend.kernel import BinOp, KernelAST, Let, Load, Local, Neg, Num
from ..intmath import DEFAULT_WIDTH, apply, wrap


def interpret_kernel(ast: KernelAST, inputs: Mapping[str, Sequence[int]],
                     width: int = DEFAULT_WIDTH) -> dict[str, list[int]]:
    """Evaluate the kernel element-wise, straight from the AST.

    Arithmetic is done on unbounded Python integers and the result of each
    statement is wrapped to ``width`` bits, which is exact for a ring.
    """
    lengths = {len(inputs[p]) for p in ast.inputs if p in inputs}
    missing = [p for p in ast.inputs if p not in inputs and _is_loaded(ast, p)]
    if missing:
        raise KeyError(f"no input data for {', '.join(missing)}")
    n = lengths.pop() if lengths else 0
    if lengths:
        raise ValueError("input vectors differ in length")
    out = {p: [] for p in ast.outputs}
    for i in range(n):
        env: dict[str, int] = {}

        def ev(e):
            if isinstance(e, Num):
                return e.value
            if isinstance(e, Local):
                return env[e.name]
            if isinstance(e, Load):
                return inputs[e.param][i]
            if isinstance(e, Neg):
                return -ev(e.operand)
            l, r = ev(e.lhs), ev(e.rhs)
            return l + r if e.op == "add" else l - r if e.op == "sub" else l * r

        for stmt in ast.body:
            v = wrap(ev(stmt.expr), width)
            if isinstance(stmt, Let):
                env[stmt.name] = v
            else:
                out[stmt.param].append(v)
    return out


def _is_loaded(ast, param) -> bool:
    def walk(e):
        if isinstance(e, Load):
            return e.param == param
        if isinstance(e, BinOp):
            return walk(e.lhs) or walk(e.rhs)
        if isinstance(e, Neg):
            return walk(e.operand)
        return False
    return any(walk(s.expr) for s in ast.body)


def _eval_steps(steps, ports, width):
    results = []
    for s in steps:
        vals = []
        for kind, v in (s.a, s.b):
            vals.append(ports[v] if kind == "p" else results[v] if kind == "s" else v)
        results.append(apply(s.opcode, vals[0], vals[1], width))
    return results[-1] if results else 0


def evaluate_dfg(dfg: Dfg, inputs: Mapping[int, int], width: int = DEFAULT_WIDTH) -> dict[int, int]:
    """Evaluate a DFG (or FU-aware DFG) on one input vector.

    ``inputs`` maps invar index to value; the result maps outvar index to value.
    """
    values: dict[int, int] = {}
    out: dict[int, int] = {}
    for nid in dfg.topo_order():
        node = dfg.nodes[nid]
        srcs = [values[s] for s in dfg.operands(nid)]
        if node.kind == "invar":
            values[nid] = wrap(inputs[node.index], width)
        elif node.kind == "outvar":
            out[node.index] = srcs[0]
        elif node.kind == "fu":
            values[nid] = _eval_steps(node.steps, srcs, width)
        elif node.immediate is None:
            values[nid] = apply(node.opcode, srcs[0], srcs[1], width)
        elif node.opcode == "rsub":
            values[nid] = wrap(node.immediate - srcs[0], width)
        else:
            values[nid] = apply(node.opcode, srcs[0], node.immediate, width)
    return out


def evaluate_fu_steps(steps, ports, width: int = DEFAULT_WIDTH) -> int:
    return _eval_steps(steps, ports, width)


def evaluate_netlist(netlist, inputs: Mapping[tuple[int, int], int], width: int = DEFAULT_WIDTH) -> dict[tuple[int, int], int]:
    """Evaluate every copy of a replicated netlist on one cycle's inputs.

    ``inputs`` is keyed by ``(copy, input index)``; outputs by ``(copy, output index)``.
    """
    values: dict[str, int] = {}
    out = {}
    pending = dict(netlist.blocks)
    while pending:
        progressed = False
        for name in list(pending):
            b = pending[name]
            try:
                ports = [values[netlist.driver(name, p)] for p in range(b.n_ports)]
            except KeyError:
                continue
            if b.kind == "in":
                values[name] = wrap(inputs[(b.copy, b.index)], width)
            elif b.kind == "out":
                out[(b.copy, b.index)] = ports[0]
            else:
                values[name] = _eval_steps(b.steps, ports, width)
            del pending[name]
            progressed = True
        if not progressed:
            raise ValueError("netlist has a combinational cycle or a dangling input")
    return out
