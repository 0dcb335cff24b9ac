"""Bundled benchmark kernels and the published reference numbers."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cache
from importlib import resources
from pathlib import Path

from ..frontend import lower_to_dfg, parse_kernel

NAMES = ("chebyshev", "sgfilter", "mibench", "qspline", "poly1", "poly2")


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    source: str
    ops_per_kernel: int
    expected_copies: int  # on the 8x8 two-DSP overlay


@cache
def reference() -> dict:
    return json.loads(resources.files(__name__).joinpath("reference.json").read_text())


def kernel_source(name: str) -> str:
    return resources.files(__name__).joinpath(f"{name}.cl").read_text()


def load_benchmark(name: str) -> BenchmarkSpec:
    src = kernel_source(name)
    ops = len(lower_to_dfg(parse_kernel(src)).operations)
    return BenchmarkSpec(name, src, ops, reference()["benchmarks"][name]["copies"])


def load_corpus(names=NAMES) -> list[BenchmarkSpec]:
    return [load_benchmark(n) for n in names]


def load_directory(path) -> list[BenchmarkSpec]:
    """Every ``*.cl`` file in ``path``; expected copies come from the reference table when known."""
    known = reference()["benchmarks"]
    specs = []
    for f in sorted(Path(path).glob("*.cl")):
        src = f.read_text()
        ops = len(lower_to_dfg(parse_kernel(src)).operations)
        specs.append(BenchmarkSpec(f.stem, src, ops, known.get(f.stem, {}).get("copies", 0)))
    return specs
