"""Island-style overlay description and its routing-resource graph.

Coordinates: tile ``(x, y)`` with ``0 <= x < cols`` and ``0 <= y < rows``.
Horizontal channel segments ``CHANX(x, y)`` run below tile row ``y``
(``0 <= y <= rows``); vertical segments ``CHANY(x, y)`` run left of tile
column ``x`` (``0 <= x <= cols``).  Each tile owns the two channels touching
its south-west corner (its two connection boxes) and the switch box at that
corner.  Switch boxes use the disjoint pattern: track ``t`` only connects to
track ``t`` on the other sides.

Perimeter pads are numbered counter-clockwise starting at the south-west
corner: south edge left to right, east edge bottom to top, north edge right
to left, west edge top to bottom.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import InvalidParameter

__all__ = ["OverlayArch", "build_arch", "load_arch", "parse_arch", "dump_arch", "RrNode", "RrGraph", "build_rr_graph",
           "perimeter_pads", "pad_position"]

FU_INPUTS = 2


@dataclass(frozen=True)
class OverlayArch:
    rows: int = 8
    cols: int = 8
    channel_width: int = 4
    dsps_per_fu: int = 2
    data_width: int = 32
    fu_pipeline_latency: int | None = None
    max_delay_chain: int = 16
    fmax_mhz: float = 300.0
    io_ports_per_edge_tile: int = field(default=1, init=False)

    def __post_init__(self):
        if self.fu_pipeline_latency is None:
            object.__setattr__(self, "fu_pipeline_latency", 3 * self.dsps_per_fu)

    @property
    def tiles(self) -> int:
        return self.rows * self.cols

    @property
    def io_pins(self) -> int:
        return 2 * (self.rows + self.cols)

    @property
    def dsps(self) -> int:
        return self.tiles * self.dsps_per_fu

    def fingerprint(self) -> tuple:
        return (self.rows, self.cols, self.channel_width, self.dsps_per_fu,
                self.data_width, self.fu_pipeline_latency, self.max_delay_chain)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("io_ports_per_edge_tile")
        return d


_INT_KEYS = ("rows", "cols", "channel_width", "dsps_per_fu", "data_width",
             "fu_pipeline_latency", "max_delay_chain")


def build_arch(**params) -> OverlayArch:
    """Validate parameters and return an :class:`OverlayArch`."""
    known = {f.name for f in fields(OverlayArch) if f.init}
    unknown = set(params) - known
    if unknown:
        raise InvalidParameter(f"unknown architecture parameter(s): {', '.join(sorted(unknown))}")
    for key in _INT_KEYS:
        v = params.get(key)
        if v is not None and (isinstance(v, bool) or not isinstance(v, int)):
            raise InvalidParameter(f"{key} must be an integer, got {v!r}")
    arch = OverlayArch(**params)
    if arch.rows < 1 or arch.cols < 1:
        raise InvalidParameter("rows and cols must be positive")
    if arch.rows > 255 or arch.cols > 255:
        raise InvalidParameter("rows and cols are limited to 255")
    if not 1 <= arch.channel_width <= 16:
        raise InvalidParameter("channel_width must be in 1..16")
    if arch.dsps_per_fu not in (1, 2):
        raise InvalidParameter("dsps_per_fu must be 1 or 2")
    if not 2 <= arch.data_width <= 32:
        raise InvalidParameter("data_width must be in 2..32")
    if not 1 <= arch.fu_pipeline_latency <= 255:
        raise InvalidParameter("fu_pipeline_latency must be in 1..255")
    if not 0 <= arch.max_delay_chain <= 255:
        raise InvalidParameter("max_delay_chain must be in 0..255")
    if not arch.fmax_mhz > 0:
        raise InvalidParameter("fmax_mhz must be positive")
    return arch


def load_arch(path) -> OverlayArch:
    return parse_arch(Path(path).read_text())


def parse_arch(text: str) -> OverlayArch:
    """Parse a ``key=value`` architecture description (``#`` starts a comment)."""
    params = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameter(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            params[key] = float(value) if key == "fmax_mhz" else int(value)
        except ValueError:
            raise InvalidParameter(f"line {lineno}: bad value for {key}: {value!r}") from None
    return build_arch(**params)


def dump_arch(arch: OverlayArch) -> str:
    return "".join(f"{k}={v}\n" for k, v in arch.to_dict().items())


# -- routing-resource graph -------------------------------------------------------

@dataclass(frozen=True)
class RrNode:
    id: int
    kind: str  # CHANX | CHANY | OPIN | IPIN | PAD_OPIN | PAD_IPIN
    x: int
    y: int
    index: int  # track, FU input port, or pad number
    capacity: int = 1


class RrGraph:
    """Immutable routing-resource graph; node ids are dense integers."""

    def __init__(self, arch: OverlayArch):
        self.arch = arch
        self.nodes: list[RrNode] = []
        self.lookup: dict[tuple, int] = {}
        self.fanout: list[list[int]] = []
        self.fanin: list[list[int]] = []
        self.pad_sites: list[tuple[str, int, int]] = []

    def _node(self, kind, x, y, index) -> int:
        nid = len(self.nodes)
        self.nodes.append(RrNode(nid, kind, x, y, index))
        self.lookup[(kind, x, y, index)] = nid
        self.fanout.append([])
        self.fanin.append([])
        return nid

    def _edge(self, a: int, b: int):
        self.fanout[a].append(b)
        self.fanin[b].append(a)

    def __len__(self):
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return sum(len(f) for f in self.fanout)

    def chanx(self, x, y, t):
        return self.lookup[("CHANX", x, y, t)]

    def chany(self, x, y, t):
        return self.lookup[("CHANY", x, y, t)]

    def opin(self, x, y):
        return self.lookup[("OPIN", x, y, 0)]

    def ipin(self, x, y, port):
        return self.lookup[("IPIN", x, y, port)]

    def pad_opin(self, k):
        side, x, y = self.pad_sites[k]
        return self.lookup[("PAD_OPIN", x, y, k)]

    def pad_ipin(self, k):
        side, x, y = self.pad_sites[k]
        return self.lookup[("PAD_IPIN", x, y, k)]

    def pad_channel(self, k) -> tuple[str, int, int]:
        """Channel segment ``(kind, x, y)`` that pad ``k`` attaches to."""
        side, x, y = self.pad_sites[k]
        if side == "S":
            return ("CHANX", x, 0)
        if side == "N":
            return ("CHANX", x, self.arch.rows)
        if side == "W":
            return ("CHANY", 0, y)
        return ("CHANY", self.arch.cols, y)

    def pad_position(self, k) -> tuple[int, int]:
        return pad_position(self.arch, k)

    def tracks(self, kind, x, y) -> list[int]:
        return [self.lookup[(kind, x, y, t)] for t in range(self.arch.channel_width)]


def perimeter_pads(arch: OverlayArch) -> list[tuple[str, int, int]]:
    """``(side, x, y)`` for every pad, ``(x, y)`` being the adjacent tile."""
    rows, cols = arch.rows, arch.cols
    sites = [("S", x, 0) for x in range(cols)]
    sites += [("E", cols - 1, y) for y in range(rows)]
    sites += [("N", x, rows - 1) for x in reversed(range(cols))]
    sites += [("W", 0, y) for y in reversed(range(rows))]
    return sites


def pad_position(arch: OverlayArch, k: int) -> tuple[int, int]:
    """Placement coordinate of pad ``k``: one step outside the tile grid."""
    side, x, y = perimeter_pads(arch)[k]
    return {"S": (x, -1), "N": (x, arch.rows), "W": (-1, y), "E": (arch.cols, y)}[side]


def build_rr_graph(arch: OverlayArch) -> RrGraph:
    """Expand ``arch`` into its routing-resource graph.

    Node ids are assigned in a fixed construction order so identical
    parameters always give identical graphs.
    """
    g = RrGraph(arch)
    R, C, W = arch.rows, arch.cols, arch.channel_width
    for y in range(R + 1):
        for x in range(C):
            for t in range(W):
                g._node("CHANX", x, y, t)
    for x in range(C + 1):
        for y in range(R):
            for t in range(W):
                g._node("CHANY", x, y, t)
    for y in range(R):
        for x in range(C):
            g._node("OPIN", x, y, 0)
            for p in range(FU_INPUTS):
                g._node("IPIN", x, y, p)
    g.pad_sites = perimeter_pads(arch)
    for k, (side, x, y) in enumerate(g.pad_sites):
        g._node("PAD_OPIN", x, y, k)
        g._node("PAD_IPIN", x, y, k)

    # switch boxes at every channel intersection
    for cy in range(R + 1):
        for cx in range(C + 1):
            for t in range(W):
                sides = []
                if cx > 0:
                    sides.append(g.chanx(cx - 1, cy, t))
                if cx < C:
                    sides.append(g.chanx(cx, cy, t))
                if cy > 0:
                    sides.append(g.chany(cx, cy - 1, t))
                if cy < R:
                    sides.append(g.chany(cx, cy, t))
                for a in sides:
                    for b in sides:
                        if a != b:
                            g._edge(a, b)

    # connection boxes: each tile taps its south (CHANX) and west (CHANY) channels
    for y in range(R):
        for x in range(C):
            cb = g.tracks("CHANX", x, y) + g.tracks("CHANY", x, y)
            o = g.opin(x, y)
            for tr in cb:
                g._edge(o, tr)
            for p in range(FU_INPUTS):
                ip = g.ipin(x, y, p)
                for tr in cb:
                    g._edge(tr, ip)

    for k in range(len(g.pad_sites)):
        chan = g.tracks(*g.pad_channel(k))
        for tr in chan:
            g._edge(g.pad_opin(k), tr)
        for tr in chan:
            g._edge(tr, g.pad_ipin(k))

    for lst in g.fanin:
        lst.sort()
    for lst in g.fanout:
        lst.sort()
    return g
