from .reference import evaluate_dfg, evaluate_fu_steps, evaluate_netlist, interpret_kernel
from .simulator import SimTrace, simulate
from .verify import Mismatch, ThroughputReport, Verdict, measure_throughput, peak_gops, throughput, verify

__all__ = [
    "interpret_kernel", "evaluate_dfg", "evaluate_fu_steps", "evaluate_netlist",
    "SimTrace", "simulate", "verify", "Verdict", "Mismatch",
    "ThroughputReport", "measure_throughput", "throughput", "peak_gops",
]
