import random
from functools import lru_cache
from pathlib import Path

import pytest

from overlayjit import corpus
from overlayjit.overlay import build_arch
from overlayjit.pipeline import compile_kernel

GOLDEN = Path(__file__).parent / "golden"

IDENTITY = "__kernel void id(__global int *A, __global int *B){int i=get_global_id(0); B[i]=A[i];}"


@lru_cache(maxsize=None)
def compiled(name: str, seed: int = 1, **arch_kw):
    """Compile a corpus kernel once per session (PAR dominates test time)."""
    return compile_kernel(corpus.kernel_source(name), build_arch(**arch_kw), seed=seed)


def random_streams(result, n=1000, seed=0):
    rng = random.Random(seed)
    w = result.arch.data_width
    lo, hi = -(1 << (w - 1)), (1 << (w - 1)) - 1
    return {(b.copy, b.index): [rng.randint(lo, hi) for _ in range(n)]
            for b in sorted(result.netlist.blocks_of("in"), key=lambda b: b.name)}


@pytest.fixture
def cheb_src():
    return corpus.kernel_source("chebyshev")


@pytest.fixture
def golden():
    return GOLDEN


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
