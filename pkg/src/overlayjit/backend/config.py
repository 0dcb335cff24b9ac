"""Overlay configuration records and their canonical byte encoding.

Layout (all fields little-endian, no padding)::

    header  16 bytes   magic "OVLC", version, rows, cols, channel_width,
                       dsps_per_fu, data_width, fu_pipeline_latency,
                       max_delay_chain, step_slots, 3 reserved zero bytes
    tiles   rows*cols records in row-major order (y outer, x inner)
              step_slots x (opcode u8, operand_a u8, operand_b u8, immediate i32)
              delay u8 x 2           one per FU input port
              ipin_select u8 x 2     connection-box mux per FU input
              chanx_select u8 x W    south channel tracks owned by the tile
              chany_select u8 x W    west channel tracks owned by the tile
    pads    2*(rows+cols) records in perimeter order
              mode u8 (0 idle, 1 input, 2 output), copy u16, io_index u8,
              ipin_select u8, chan_select u8 x W (north/east boundary
              channel owned by the pad; zero on south/west pads)

A mux select of 0 leaves the resource undriven; ``k > 0`` picks the
``k``-th entry of the resource's sorted fan-in list in the routing graph.
Opcodes: 0 unused, 1 add, 2 sub, 3 mul.  Operands: 0 unused, 1 port 0,
2 port 1, 3 immediate, ``4 + j`` result of step ``j``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from ..errors import FingerprintMismatch, MalformedBlob
from ..fumap import Step
from ..overlay import FU_INPUTS, OverlayArch, RrGraph, build_rr_graph

MAGIC = b"OVLC"
VERSION = 1
HEADER = struct.Struct("<4s9B3x")
STEP = struct.Struct("<3Bi")
PAD_HEAD = struct.Struct("<BHBB")

_OPCODES = {"add": 1, "sub": 2, "mul": 3}
_OPNAMES = {v: k for k, v in _OPCODES.items()}
PAD_IDLE, PAD_INPUT, PAD_OUTPUT = 0, 1, 2


@dataclass(frozen=True)
class TileConfig:
    steps: tuple[Step, ...]
    delays: tuple[int, ...]
    ipin_select: tuple[int, ...]
    chanx_select: tuple[int, ...]
    chany_select: tuple[int, ...]

    @property
    def idle(self) -> bool:
        return not self.steps


@dataclass(frozen=True)
class PadConfig:
    mode: int
    copy: int
    index: int
    ipin_select: int
    chan_select: tuple[int, ...]


@dataclass(frozen=True)
class Configuration:
    fingerprint: tuple
    tiles: tuple[TileConfig, ...]
    pads: tuple[PadConfig, ...]
    version: int = VERSION

    @property
    def total_bytes(self) -> int:
        return config_size(*self.fingerprint[:4])

    def tile(self, arch: OverlayArch, x: int, y: int) -> TileConfig:
        return self.tiles[y * arch.cols + x]

    @property
    def copies(self) -> int:
        used = [p.copy for p in self.pads if p.mode != PAD_IDLE]
        return max(used) + 1 if used else 0

    def encode(self) -> bytes:
        return encode_config(self)


def step_slots(dsps_per_fu: int) -> int:
    return 2 * dsps_per_fu


def config_size(rows: int, cols: int, channel_width: int, dsps_per_fu: int) -> int:
    """Blob size in bytes; depends only on the architecture dimensions."""
    tile = step_slots(dsps_per_fu) * STEP.size + 2 * FU_INPUTS + 2 * channel_width
    pad = PAD_HEAD.size + channel_width
    return HEADER.size + rows * cols * tile + 2 * (rows + cols) * pad


def _idle_tile(arch) -> TileConfig:
    zeros = (0,) * arch.channel_width
    return TileConfig((), (0, 0), (0, 0), zeros, zeros)


def idle_config(arch: OverlayArch) -> Configuration:
    pad = PadConfig(PAD_IDLE, 0, 0, 0, (0,) * arch.channel_width)
    return Configuration(arch.fingerprint(), (_idle_tile(arch),) * arch.tiles, (pad,) * arch.io_pins)


def generate_config(placement, routing, delays, arch: OverlayArch, rr: RrGraph | None = None) -> Configuration:
    """Turn a balanced PAR result into per-tile and per-pad configuration records."""
    rr = rr or build_rr_graph(arch)
    parent: dict[int, int] = {}
    for tree in routing.trees.values():
        for node, par in tree:
            if par != -1:
                parent[node] = par

    def select(node: int) -> int:
        par = parent.get(node)
        return 0 if par is None else rr.fanin[node].index(par) + 1

    W = arch.channel_width
    at = placement.block_at()
    netlist = placement.netlist
    tiles = []
    for y in range(arch.rows):
        for x in range(arch.cols):
            chanx = tuple(select(rr.chanx(x, y, t)) for t in range(W))
            chany = tuple(select(rr.chany(x, y, t)) for t in range(W))
            name = at.get(("tile", x, y))
            if name is None:
                tiles.append(TileConfig((), (0, 0), (0, 0), chanx, chany))
                continue
            block = netlist.blocks[name]
            d = tuple(delays.delays.get((name, p), 0) for p in range(FU_INPUTS))
            ipins = tuple(select(rr.ipin(x, y, p)) for p in range(FU_INPUTS))
            tiles.append(TileConfig(block.steps, d, ipins, chanx, chany))
    pads = []
    for k, (side, x, y) in enumerate(rr.pad_sites):
        if side in ("N", "E"):
            chan = tuple(select(n) for n in rr.tracks(*rr.pad_channel(k)))
        else:
            chan = (0,) * W
        name = at.get(("pad", k))
        if name is None:
            pads.append(PadConfig(PAD_IDLE, 0, 0, 0, chan))
            continue
        block = netlist.blocks[name]
        if block.kind == "in":
            pads.append(PadConfig(PAD_INPUT, block.copy, block.index, 0, chan))
        else:
            pads.append(PadConfig(PAD_OUTPUT, block.copy, block.index, select(rr.pad_ipin(k)), chan))
    return Configuration(arch.fingerprint(), tuple(tiles), tuple(pads))


def _encode_operand(o) -> int:
    kind, v = o
    if kind == "p":
        return 1 + v
    if kind == "i":
        return 3
    return 4 + v


def encode_config(config: Configuration) -> bytes:
    rows, cols, W, dsps, width, lat, maxd = config.fingerprint
    slots = step_slots(dsps)
    out = [HEADER.pack(MAGIC, config.version, rows, cols, W, dsps, width, lat, maxd, slots)]
    for t in config.tiles:
        if len(t.steps) > slots:
            raise ValueError(f"tile uses {len(t.steps)} steps; only {slots} slots exist")
        for s in t.steps:
            imms = [v for kind, v in (s.a, s.b) if kind == "i"]
            out.append(STEP.pack(_OPCODES[s.opcode], _encode_operand(s.a), _encode_operand(s.b),
                                 imms[0] if imms else 0))
        out.append(bytes(STEP.size * (slots - len(t.steps))))
        out.append(bytes(t.delays) + bytes(t.ipin_select) + bytes(t.chanx_select) + bytes(t.chany_select))
    for p in config.pads:
        out.append(PAD_HEAD.pack(p.mode, p.copy, p.index, p.ipin_select) + bytes(p.chan_select))
    blob = b"".join(out)
    assert len(blob) == config_size(rows, cols, W, dsps)
    return blob


def _bad(msg):
    return MalformedBlob(msg)


def decode_config(blob: bytes, arch: OverlayArch, rr: RrGraph | None = None) -> Configuration:
    """Exact inverse of :func:`encode_config`.

    Rejects blobs built for another architecture with
    :class:`FingerprintMismatch`, and anything truncated, padded or
    non-canonical with :class:`MalformedBlob`.
    """
    blob = bytes(blob)
    if len(blob) < HEADER.size:
        raise _bad(f"blob is {len(blob)} bytes; header alone needs {HEADER.size}")
    magic, version, *fp, slots = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise _bad("bad magic number")
    if version != VERSION:
        raise _bad(f"unsupported version {version}")
    if blob[13:16] != b"\0\0\0":
        raise _bad("reserved header bytes must be zero")
    if tuple(fp) != arch.fingerprint():
        raise FingerprintMismatch(f"blob built for {tuple(fp)}, architecture is {arch.fingerprint()}")
    if slots != step_slots(arch.dsps_per_fu):
        raise _bad("step slot count disagrees with dsps_per_fu")
    expected = config_size(arch.rows, arch.cols, arch.channel_width, arch.dsps_per_fu)
    if len(blob) != expected:
        raise _bad(f"blob is {len(blob)} bytes, expected {expected}")
    rr = rr or build_rr_graph(arch)
    W = arch.channel_width
    lo, hi = -(1 << (arch.data_width - 1)), (1 << (arch.data_width - 1)) - 1
    pos = HEADER.size

    def check_select(value, node, what):
        if value > len(rr.fanin[node]):
            raise _bad(f"{what}: select {value} exceeds fan-in {len(rr.fanin[node])}")
        return value

    tiles = []
    for y in range(arch.rows):
        for x in range(arch.cols):
            steps = []
            ended = False
            for j in range(slots):
                op, a, b, imm = STEP.unpack_from(blob, pos)
                pos += STEP.size
                where = f"tile ({x},{y}) step {j}"
                if op == 0:
                    if a or b or imm:
                        raise _bad(f"{where}: unused slot is not zero")
                    ended = True
                    continue
                if ended:
                    raise _bad(f"{where}: steps must be contiguous")
                if op not in _OPNAMES:
                    raise _bad(f"{where}: bad opcode {op}")
                operands = []
                for code in (a, b):
                    if code in (1, 2):
                        operands.append(("p", code - 1))
                    elif code == 3:
                        operands.append(("i", imm))
                    elif 4 <= code < 4 + j:
                        operands.append(("s", code - 4))
                    else:
                        raise _bad(f"{where}: bad operand code {code}")
                n_imm = (a == 3) + (b == 3)
                if n_imm > 1:
                    raise _bad(f"{where}: at most one immediate per step")
                if n_imm == 0 and imm != 0:
                    raise _bad(f"{where}: immediate set but unused")
                if not lo <= imm <= hi:
                    raise _bad(f"{where}: immediate {imm} exceeds data width")
                steps.append(Step(_OPNAMES[op], operands[0], operands[1]))
            delays = tuple(blob[pos:pos + FU_INPUTS])
            pos += FU_INPUTS
            ipins = tuple(blob[pos:pos + FU_INPUTS])
            pos += FU_INPUTS
            chanx = tuple(blob[pos:pos + W])
            pos += W
            chany = tuple(blob[pos:pos + W])
            pos += W
            if any(d > arch.max_delay_chain for d in delays):
                raise _bad(f"tile ({x},{y}): delay exceeds max_delay_chain")
            if not steps and (any(delays) or any(ipins)):
                raise _bad(f"tile ({x},{y}): idle FU with non-zero input configuration")
            for p, v in enumerate(ipins):
                check_select(v, rr.ipin(x, y, p), f"tile ({x},{y}) ipin {p}")
            for t in range(W):
                check_select(chanx[t], rr.chanx(x, y, t), f"CHANX({x},{y}) track {t}")
                check_select(chany[t], rr.chany(x, y, t), f"CHANY({x},{y}) track {t}")
            tiles.append(TileConfig(tuple(steps), delays, ipins, chanx, chany))
    pads = []
    for k, (side, x, y) in enumerate(rr.pad_sites):
        mode, copy, index, ipin = PAD_HEAD.unpack_from(blob, pos)
        pos += PAD_HEAD.size
        chan = tuple(blob[pos:pos + W])
        pos += W
        if mode not in (PAD_IDLE, PAD_INPUT, PAD_OUTPUT):
            raise _bad(f"pad {k}: bad mode {mode}")
        if mode == PAD_IDLE and (copy or index or ipin):
            raise _bad(f"pad {k}: idle pad with non-zero fields")
        if mode == PAD_INPUT and ipin:
            raise _bad(f"pad {k}: input pad cannot select a driver")
        check_select(ipin, rr.pad_ipin(k), f"pad {k}")
        if side in ("N", "E"):
            for t, n in enumerate(rr.tracks(*rr.pad_channel(k))):
                check_select(chan[t], n, f"pad {k} channel track {t}")
        elif any(chan):
            raise _bad(f"pad {k}: south/west pads own no channel")
        pads.append(PadConfig(mode, copy, index, ipin, chan))
    return Configuration(arch.fingerprint(), tuple(tiles), tuple(pads), version)
