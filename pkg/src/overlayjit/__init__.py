"""Compiler, place-and-route and simulator for a DSP-block FPGA overlay."""

from .backend import balance_latency, decode_config, encode_config, generate_config
from .errors import OverlayError
from .frontend import export_dot, import_dot, lower_to_dfg, optimize_dfg, parse_kernel
from .fumap import FuCapabilityModel, chain_for_multidsp, compute_replication, fuse_for_fu, replicate
from .overlay import OverlayArch, build_arch, build_rr_graph, load_arch
from .par import ParSeed, audit_routing, place, route
from .pipeline import CompileResult, compile_kernel, map_kernel
from .sim import interpret_kernel, measure_throughput, simulate, verify

__version__ = "0.1.0"

__all__ = [
    "parse_kernel", "lower_to_dfg", "optimize_dfg", "export_dot", "import_dot",
    "FuCapabilityModel", "fuse_for_fu", "chain_for_multidsp", "compute_replication", "replicate",
    "OverlayArch", "build_arch", "load_arch", "build_rr_graph",
    "ParSeed", "place", "route", "audit_routing",
    "balance_latency", "generate_config", "encode_config", "decode_config",
    "interpret_kernel", "simulate", "verify", "measure_throughput",
    "compile_kernel", "map_kernel", "CompileResult", "OverlayError",
]
