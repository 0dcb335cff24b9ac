from .placer import ParSeed, Placement, dump_placement, load_placement, place, placement_cost
from .report import format_report, par_report
from .router import RouterOptions, Routing, audit_routing, dump_routing, load_routing, route

__all__ = [
    "ParSeed", "Placement", "place", "placement_cost", "dump_placement", "load_placement",
    "RouterOptions", "Routing", "route", "audit_routing", "dump_routing", "load_routing",
    "par_report", "format_report",
]
