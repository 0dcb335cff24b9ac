from .kernel import KernelAST, parse_kernel
from .dfg import Dfg, DfgNode, Edge, lower_to_dfg, optimize_dfg
from .dot import export_dot, import_dot

__all__ = [
    "KernelAST", "parse_kernel",
    "Dfg", "DfgNode", "Edge", "lower_to_dfg", "optimize_dfg",
    "export_dot", "import_dot",
]
