"""Summary statistics for a finished place-and-route run."""

from __future__ import annotations

from collections import Counter

from ..overlay import RrGraph
from .placer import Placement
from .router import Routing

TRACK_KINDS = ("CHANX", "CHANY")


def par_report(placement: Placement | None, routing: Routing | None, rr: RrGraph | None = None,
               elapsed_ms: dict | None = None) -> dict:
    """Wirelength, channel utilisation histogram, per-net hops and timings.

    ``channel_utilization`` maps "tracks in use" to the number of channel
    segments with that many used tracks; its weighted sum equals
    ``wirelength``, the total number of track segments used.
    """
    elapsed = dict(elapsed_ms or {})
    elapsed.setdefault("place", 0.0)
    elapsed.setdefault("route", 0.0)
    report = {
        "nets": 0,
        "blocks": 0,
        "placement_cost": 0,
        "wirelength": 0,
        "channel_utilization": {},
        "net_hops": {},
        "max_hops": 0,
        "iterations": 0,
        "elapsed_ms": {k: round(v, 3) for k, v in elapsed.items()},
    }
    report["elapsed_ms"]["total"] = round(elapsed["place"] + elapsed["route"], 3)
    if placement is not None:
        report["blocks"] = len(placement.sites)
        report["placement_cost"] = placement.cost
    if routing is None or rr is None:
        return report

    per_segment = Counter()
    hops = {}
    for name, tree in routing.trees.items():
        tracks = [n for n, _ in tree if rr.nodes[n].kind in TRACK_KINDS]
        hops[name] = len(tracks)
        for n in tracks:
            node = rr.nodes[n]
            per_segment[(node.kind, node.x, node.y)] += 1
    all_segments = {(n.kind, n.x, n.y) for n in rr.nodes if n.kind in TRACK_KINDS}
    hist = Counter(per_segment.get(seg, 0) for seg in all_segments)
    report.update(
        nets=len(routing.trees),
        wirelength=sum(hops.values()),
        channel_utilization={int(k): v for k, v in sorted(hist.items())},
        net_hops=dict(sorted(hops.items())),
        max_hops=max(hops.values(), default=0),
        iterations=routing.iterations,
    )
    return report


def format_report(report: dict) -> str:
    lines = [
        f"blocks            {report['blocks']}",
        f"nets              {report['nets']}",
        f"placement cost    {report['placement_cost']}",
        f"wirelength        {report['wirelength']} track segments",
        f"router iterations {report['iterations']}",
        f"max net hops      {report['max_hops']}",
        "channel use       " + ", ".join(f"{k} tracks: {v}" for k, v in report["channel_utilization"].items()),
        "elapsed (ms)      " + ", ".join(f"{k}={v}" for k, v in report["elapsed_ms"].items()),
    ]
    return "\n".join(lines) + "\n"
