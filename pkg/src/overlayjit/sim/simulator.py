"""Cycle-accurate functional model of a configured overlay.

Only the decoded configuration and the architecture are consulted; the
compiler's netlist and placement are never looked at, so agreement with the
interpreter is a genuine end-to-end check of the configuration.

Timing model, per clock cycle ``c``:

* input pads present element ``c`` of their stream (valid) or 0 (invalid);
* routing muxes are combinational, so every track and pin sees its source
  in the same cycle;
* each FU input passes through a shift register of the configured depth,
  the FU evaluates its steps on the delayed operands and the result leaves
  a pipeline of ``fu_pipeline_latency`` registers;
* output pads sample their pin at the end of the cycle.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

from ..backend.config import PAD_INPUT, PAD_OUTPUT, Configuration
from ..errors import ConfigMismatch, InvalidParameter
from ..intmath import apply, wrap
from ..overlay import FU_INPUTS, OverlayArch, RrGraph, build_rr_graph

UNDRIVEN = -1


@dataclass
class SimTrace:
    cycles: int
    outputs: dict[tuple[int, int], list[tuple[int, int]]]  # (copy, index) -> [(cycle, value)]
    first_input_cycle: int | None
    drained: bool
    pins: list[tuple[int, ...]] = field(default_factory=list)  # output pad values per cycle
    pin_keys: tuple[tuple[int, int], ...] = ()

    def values(self, key) -> list[int]:
        return [v for _, v in self.outputs.get(key, [])]

    @property
    def output_latency(self) -> dict[tuple[int, int], int]:
        """Cycles from the first input to each stream's first valid output."""
        if self.first_input_cycle is None:
            return {}
        return {k: s[0][0] - self.first_input_cycle for k, s in self.outputs.items() if s}

    @property
    def pipeline_latency(self) -> int | None:
        lat = self.output_latency
        return min(lat.values()) if lat else None

    @property
    def steady_state_ii(self) -> int | None:
        """Largest gap between consecutive valid outputs on any stream.

        ``None`` when no stream produced two results, i.e. there is nothing
        to measure.
        """
        gaps = [b[0] - a[0] for s in self.outputs.values() for a, b in zip(s, s[1:])]
        return max(gaps) if gaps else None

    def to_jsonl(self) -> str:
        """One JSON object per cycle with the output pad values."""
        lines = [json.dumps({"keys": [list(k) for k in self.pin_keys]})]
        for c, vals in enumerate(self.pins):
            lines.append(json.dumps({"cycle": c, "out": list(vals)}))
        return "\n".join(lines) + "\n"


class _Machine:
    def __init__(self, config: Configuration, arch: OverlayArch, rr: RrGraph):
        if tuple(config.fingerprint) != arch.fingerprint():
            raise ConfigMismatch("configuration was generated for a different architecture")
        if len(config.tiles) != arch.tiles or len(config.pads) != arch.io_pins:
            raise ConfigMismatch("configuration record counts do not match the architecture")
        self.arch, self.rr, self.width = arch, rr, arch.data_width
        self.config = config
        self.select = self._collect_selects(config)
        self._source: dict[int, int] = {}

        self.inputs: dict[int, tuple[int, int]] = {}   # pad_opin node -> stream key
        self.outputs: list[tuple[tuple[int, int], int]] = []  # (key, source node)
        for k, p in enumerate(config.pads):
            key = (p.copy, p.index)
            if p.mode == PAD_INPUT:
                if key in self.inputs.values():
                    raise ConfigMismatch(f"two pads drive input stream {key}")
                self.inputs[rr.pad_opin(k)] = key
            elif p.mode == PAD_OUTPUT:
                src = self.source(rr.pad_ipin(k))
                if src == UNDRIVEN:
                    raise ConfigMismatch(f"output pad {k} for stream {key} is not driven")
                self.outputs.append((key, src))

        L = arch.fu_pipeline_latency
        self.fus = []
        for i, t in enumerate(config.tiles):
            if t.idle:
                continue
            x, y = i % arch.cols, i // arch.cols
            used = sorted({v for s in t.steps for kind, v in (s.a, s.b) if kind == "p"})
            srcs = []
            for p in range(FU_INPUTS):
                src = self.source(rr.ipin(x, y, p))
                if p in used and src == UNDRIVEN:
                    raise ConfigMismatch(f"FU at ({x},{y}) reads port {p}, which is not driven")
                srcs.append(src)
            lines = [deque([(0, False)] * t.delays[p]) for p in range(FU_INPUTS)]
            pipe = deque([(0, False)] * L)
            self.fus.append((rr.opin(x, y), t.steps, used, srcs, lines, pipe))

    def _collect_selects(self, config) -> dict[int, int]:
        rr, arch = self.rr, self.arch
        sel: dict[int, int] = {}

        def put(node, value):
            if value:
                if value > len(rr.fanin[node]):
                    raise ConfigMismatch(f"mux select {value} out of range for {rr.nodes[node].kind}")
                sel[node] = rr.fanin[node][value - 1]

        for i, t in enumerate(config.tiles):
            x, y = i % arch.cols, i // arch.cols
            for p, v in enumerate(t.ipin_select):
                put(rr.ipin(x, y, p), v)
            for tr, v in enumerate(t.chanx_select):
                put(rr.chanx(x, y, tr), v)
            for tr, v in enumerate(t.chany_select):
                put(rr.chany(x, y, tr), v)
        for k, p in enumerate(config.pads):
            put(rr.pad_ipin(k), p.ipin_select)
            for node, v in zip(rr.tracks(*rr.pad_channel(k)), p.chan_select):
                put(node, v)
        return sel

    def source(self, node: int) -> int:
        """Follow mux selects back to the driving OPIN or pad, detecting loops."""
        if node in self._source:
            return self._source[node]
        seen, walk = set(), []
        n = node
        while True:
            if n in self._source:
                src = self._source[n]
                break
            kind = self.rr.nodes[n].kind
            if kind in ("OPIN", "PAD_OPIN"):
                src = n
                break
            if n in seen:
                raise ConfigMismatch(f"combinational loop through routing node {n}")
            seen.add(n)
            walk.append(n)
            if n not in self.select:
                src = UNDRIVEN
                break
            n = self.select[n]
        for m in walk:
            self._source[m] = src
        return src

    def busy(self) -> bool:
        return any(v for _, _, _, _, lines, pipe in self.fus
                   for q in (*lines, pipe) for _, v in q)

    def run(self, streams: dict[tuple[int, int], list[int]], max_cycles: int, record_pins: bool) -> SimTrace:
        n = len(next(iter(streams.values()))) if streams else 0
        W = self.width
        pad_streams = {node: [wrap(v, W) for v in streams[key]] for node, key in self.inputs.items()}
        out = {key: [] for key, _ in self.outputs}
        pins: list[tuple[int, ...]] = []
        cycle = 0
        drained = False
        while cycle < max_cycles:
            signal: dict[int, tuple[int, bool]] = {UNDRIVEN: (0, False)}
            for node, data in pad_streams.items():
                signal[node] = (data[cycle], True) if cycle < n else (0, False)
            for opin, _, _, _, _, pipe in self.fus:
                signal[opin] = pipe[0] if pipe else (0, False)
            for opin, steps, used, srcs, lines, pipe in self.fus:
                operands = []
                for p in range(FU_INPUTS):
                    v = signal.get(srcs[p], (0, False))
                    lines[p].append(v)
                    v = lines[p].popleft()
                    operands.append(v)
                valid = all(operands[p][1] for p in used)
                ports = [o[0] for o in operands]
                results = []
                for s in steps:
                    a, b = (ports[v] if k == "p" else results[v] if k == "s" else v for k, v in (s.a, s.b))
                    results.append(apply(s.opcode, a, b, W))
                pipe.append((results[-1] if results else 0, valid))
                pipe.popleft()
            row = []
            for key, src in self.outputs:
                v, ok = signal.get(src, (0, False))
                if ok:
                    out[key].append((cycle, v))
                row.append(v if ok else 0)
            if record_pins:
                pins.append(tuple(row))
            cycle += 1
            if cycle >= n and not self.busy():
                drained = True
                break
        return SimTrace(cycle, out, 0 if n else None, drained, pins, tuple(k for k, _ in self.outputs))


def simulate(config: Configuration, arch: OverlayArch, streams: dict[tuple[int, int], list[int]],
             max_cycles: int | None = None, rr: RrGraph | None = None, record_pins: bool = True) -> SimTrace:
    """Stream ``streams`` (keyed by ``(copy, input index)``) through the overlay.

    All streams must have the same length; one element enters per cycle.
    The run stops once inputs are exhausted and every pipeline register and
    delay line is empty, or after ``max_cycles``.
    """
    rr = rr or build_rr_graph(arch)
    m = _Machine(config, arch, rr)
    wanted = set(m.inputs.values())
    missing = wanted - set(streams)
    if missing:
        raise ConfigMismatch(f"no stream supplied for configured inputs {sorted(missing)}")
    extra = set(streams) - wanted
    if extra:
        raise ConfigMismatch(f"streams {sorted(extra)} have no configured input pad")
    lengths = {len(s) for s in streams.values()}
    if len(lengths) > 1:
        raise InvalidParameter("all input streams must have the same length")
    n = lengths.pop() if lengths else 0
    if max_cycles is None:
        depth = arch.tiles * (arch.fu_pipeline_latency + FU_INPUTS * arch.max_delay_chain)
        max_cycles = n + depth + 1
    return m.run(streams, max_cycles, record_pins)
