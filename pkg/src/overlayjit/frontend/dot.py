"""DOT interchange for DFGs.

The dialect is a flat ``digraph``: one node statement per node carrying
``ntype`` and ``label`` attributes, one ``src -> dst;`` statement per edge.
Edges are written grouped by consumer in port order, so reading them back
in file order recovers operand positions.  An explicit ``[port=k]`` edge
attribute is also accepted on import.
"""

from __future__ import annotations

import re

from ..errors import DotParseError, UnknownNtype
from .dfg import Dfg, DfgNode, Edge, parse_label

NTYPES = ("invar", "outvar", "operation")

_HEADER_RE = re.compile(r"^\s*digraph\s+(\w+)\s*\{(.*)\}\s*$", re.DOTALL)
_NODE_RE = re.compile(r"^N(\d+)\s*\[(.*)\]$", re.DOTALL)
_EDGE_RE = re.compile(r"^N(\d+)\s*->\s*N(\d+)\s*(?:\[(.*)\])?$", re.DOTALL)
_ATTR_RE = re.compile(r'(\w+)\s*=\s*(?:"([^"]*)"|([^,\s]+))')


def _edge_order(g) -> list[Edge]:
    return sorted(g.edges, key=lambda e: (e.dst, e.port, e.src))


def export_dot(dfg) -> str:
    """Serialise a :class:`Dfg` (or an FU-aware graph with the same surface)."""
    lines = [f"digraph {dfg.name} {{"]
    for nid in sorted(dfg.nodes):
        node = dfg.nodes[nid]
        ntype = "operation" if node.kind in ("operation", "fu") else node.kind
        lines.append(f'N{nid} [ntype="{ntype}", label="{node.label}"];')
    for e in _edge_order(dfg):
        lines.append(f"N{e.src} -> N{e.dst};")
    if len(lines) == 1:
        return f"digraph {dfg.name} {{ }}\n"
    lines.append("}")
    return "\n".join(lines) + "\n"


def _statements(body: str):
    body = re.sub(r"//[^\n]*|/\*.*?\*/", "", body, flags=re.DOTALL)
    # semicolons inside quoted labels are not part of the dialect
    for stmt in body.replace("\n", " ").split(";"):
        stmt = stmt.strip()
        if stmt:
            yield stmt


def import_dot(text: str) -> Dfg:
    """Parse the DOT dialect written by :func:`export_dot` into a :class:`Dfg`."""
    m = _HEADER_RE.match(text)
    if not m:
        raise DotParseError("expected 'digraph <name> { ... }'")
    name, body = m.group(1), m.group(2)
    nodes: dict[int, DfgNode] = {}
    raw_edges: list[tuple[int, int, int | None]] = []
    for stmt in _statements(body):
        if "->" in stmt:
            em = _EDGE_RE.match(stmt)
            if not em:
                raise DotParseError(f"malformed edge statement {stmt!r}")
            attrs = dict((k, v or w) for k, v, w in _ATTR_RE.findall(em.group(3) or ""))
            port = int(attrs["port"]) if "port" in attrs else None
            raw_edges.append((int(em.group(1)), int(em.group(2)), port))
            continue
        nm = _NODE_RE.match(stmt)
        if not nm:
            raise DotParseError(f"malformed node statement {stmt!r}")
        nid = int(nm.group(1))
        attrs = dict((k, v or w) for k, v, w in _ATTR_RE.findall(nm.group(2)))
        if "ntype" not in attrs or "label" not in attrs:
            raise DotParseError(f"node N{nid} lacks ntype/label")
        if attrs["ntype"] not in NTYPES:
            raise UnknownNtype(f"node N{nid} has unknown ntype {attrs['ntype']!r}")
        try:
            node = parse_label(attrs["label"])
        except ValueError as exc:
            raise DotParseError(str(exc)) from None
        if node.id != nid:
            raise DotParseError(f"label {attrs['label']!r} does not match node id N{nid}")
        if node.kind != attrs["ntype"]:
            raise DotParseError(f"label {attrs['label']!r} contradicts ntype {attrs['ntype']!r}")
        if nid in nodes:
            raise DotParseError(f"duplicate node N{nid}")
        nodes[nid] = node

    next_port: dict[int, int] = {}
    edges = []
    for src, dst, port in raw_edges:
        if src not in nodes or dst not in nodes:
            raise DotParseError(f"edge N{src} -> N{dst} references an undeclared node")
        if port is None:
            port = next_port.get(dst, 0)
        next_port[dst] = port + 1
        edges.append(Edge(src, dst, port))
    g = Dfg(name, dict(sorted(nodes.items())), tuple(edges))
    try:
        g.validate()
    except ValueError as exc:
        raise DotParseError(str(exc)) from None
    return g
