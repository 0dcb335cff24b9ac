"""Trace checking against the interpreter, and throughput accounting."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import NotSteadyState
from ..frontend.kernel import KernelAST
from ..intmath import DEFAULT_WIDTH
from ..overlay import OverlayArch
from .reference import interpret_kernel
from .simulator import SimTrace

# Each DSP slice is credited with a multiply, a pre-add and a post-add/sub per cycle.
OPS_PER_DSP = 3


@dataclass(frozen=True)
class Mismatch:
    copy: int
    output: int
    index: int
    expected: int | None
    actual: int | None


@dataclass(frozen=True)
class Verdict:
    passed: bool
    checked: int
    mismatch: Mismatch | None = None
    reason: str = ""

    def __bool__(self):
        return self.passed

    def to_dict(self) -> dict:
        d = {"passed": self.passed, "checked": self.checked, "reason": self.reason}
        if self.mismatch:
            d["mismatch"] = self.mismatch.__dict__.copy()
        return d


def verify(trace: SimTrace, ast: KernelAST, streams: dict[tuple[int, int], list[int]],
           width: int = DEFAULT_WIDTH) -> Verdict:
    """Compare every output stream of ``trace`` with the interpreter, element by element.

    ``streams`` uses the simulator's ``(copy, input index)`` keys; outputs
    are matched by position in the stream, not by cycle.
    """
    copies = sorted({c for c, _ in streams} | {c for c, _ in trace.outputs})
    checked = 0
    for copy in copies:
        data = {p: streams[(copy, i)] for i, p in enumerate(ast.inputs) if (copy, i) in streams}
        n = len(next(iter(data.values()))) if data else len(trace.values((copy, 0)))
        # inputs the optimiser found dead get no pad; any filler gives the same result
        for p in ast.inputs:
            data.setdefault(p, [0] * n)
        expected = interpret_kernel(ast, data, width)
        for j, p in enumerate(ast.outputs):
            want = expected[p]
            got = trace.values((copy, j))
            for k, (e, a) in enumerate(zip(want, got)):
                if e != a:
                    return Verdict(False, checked, Mismatch(copy, j, k, e, a), "value mismatch")
                checked += 1
            if len(got) != len(want):
                k = min(len(got), len(want))
                return Verdict(False, checked,
                               Mismatch(copy, j, k, want[k] if k < len(want) else None,
                                        got[k] if k < len(got) else None),
                               f"expected {len(want)} outputs, got {len(got)}")
    return Verdict(True, checked)


@dataclass(frozen=True)
class ThroughputReport:
    copies: int
    ops_per_kernel: int
    ii: int
    ops_per_cycle: float
    fmax_mhz: float
    gops: float
    peak_gops: float
    utilization: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def peak_gops(arch: OverlayArch, fmax_mhz: float | None = None) -> float:
    f = arch.fmax_mhz if fmax_mhz is None else fmax_mhz
    return OPS_PER_DSP * arch.dsps_per_fu * arch.tiles * f / 1000.0


def throughput(copies: int, ops_per_kernel: int, fmax_mhz: float, arch: OverlayArch | None = None,
               ii: int = 1) -> ThroughputReport:
    """Throughput at a given initiation interval, no simulation needed."""
    if ii < 1:
        raise NotSteadyState(f"initiation interval must be >= 1, got {ii}")
    opc = copies * ops_per_kernel / ii
    gops = opc * fmax_mhz / 1000.0
    peak = peak_gops(arch, fmax_mhz) if arch is not None else 0.0
    return ThroughputReport(copies, ops_per_kernel, ii, opc, fmax_mhz, gops, peak,
                            gops / peak if peak else 0.0)


def measure_throughput(trace: SimTrace, arch: OverlayArch, ops_per_kernel: int, copies: int,
                       fmax_mhz: float | None = None) -> ThroughputReport:
    ii = trace.steady_state_ii
    if ii is None:
        raise NotSteadyState("trace has fewer than two results on every output stream")
    f = arch.fmax_mhz if fmax_mhz is None else fmax_mhz
    return throughput(copies, ops_per_kernel, f, arch, ii)
