"""PNG figures for the report commands (matplotlib, headless)."""

from __future__ import annotations

from pathlib import Path

from matplotlib import colormaps
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure
from matplotlib.patches import Rectangle

_STYLE = {2: ("tab:blue", "o"), 1: ("tab:red", "s")}


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    FigureCanvasAgg(fig)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    return path


def plot_scaling(rows_by_dsps: dict[int, list], path, title: str = "Throughput scaling by replication") -> Path:
    """GOPS against overlay size, one line per FU type; infeasible sizes are skipped."""
    fig = Figure(figsize=(6.4, 4.4))
    ax = fig.add_subplot()
    for dsps, rows in sorted(rows_by_dsps.items(), reverse=True):
        ok = [r for r in rows if r.status == "ok"]
        color, marker = _STYLE.get(dsps, ("tab:gray", "^"))
        ax.plot([r.n for r in ok], [r.gops for r in ok], marker=marker, color=color,
                label=f"{dsps}-DSP FU overlay")
        for r in ok:
            ax.annotate(f"x{r.copies}", (r.n, r.gops), textcoords="offset points", xytext=(0, 6),
                        ha="center", fontsize=8, color=color)
    ax.set_xlabel("Overlay size N (N x N tiles)")
    ax.set_ylabel("Kernel throughput (GOPS)")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(loc="upper left", frameon=False)
    return _save(fig, path)


def plot_bench(rows: list, path) -> Path:
    """Measured PAR time per benchmark beside the reference columns, log scale."""
    fig = Figure(figsize=(7.5, 4.4))
    ax = fig.add_subplot()
    names = [f"{r.name}({r.copies or r.expected_copies})" for r in rows]
    series = [
        ("Vivado x86 (reference)", [r.ref_vivado_x86_s for r in rows], "tab:blue"),
        ("Overlay PAR x86 (reference)", [r.ref_overlay_x86_s for r in rows], "tab:green"),
        ("Overlay PAR Zynq (reference)", [r.ref_overlay_zynq_s for r in rows], "tab:red"),
        ("This run", [r.par_s if r.status == "ok" else 0.0 for r in rows], "tab:orange"),
    ]
    width = 0.2
    for k, (label, vals, color) in enumerate(series):
        xs = [i + (k - 1.5) * width for i in range(len(rows))]
        ax.bar(xs, [v if v > 0 else float("nan") for v in vals], width, label=label, color=color)
    ax.set_xticks(range(len(rows)), names, rotation=20)
    ax.set_yscale("log")
    ax.set_ylabel("PAR time (s)")
    ax.grid(axis="y", alpha=0.3, which="both")
    ax.legend(fontsize=8, frameon=False, ncol=2)
    return _save(fig, path)


def plot_placement(placement, path) -> Path:
    """Tiles coloured by kernel copy, pads marked on the perimeter."""
    arch = placement.arch
    fig = Figure(figsize=(5, 5))
    ax = fig.add_subplot()
    cmap = colormaps["tab20"]
    nl = placement.netlist
    for name, site in placement.sites.items():
        b = nl.blocks[name]
        x, y = placement.position(name)
        c = cmap(b.copy % 20)
        if site[0] == "tile":
            ax.add_patch(_rect(x, y, c))
            ax.text(x, y, str(b.copy), ha="center", va="center", fontsize=7)
        else:
            ax.plot(x, y, marker="v" if b.kind == "in" else "^", color=c, markersize=6)
    for x in range(arch.cols):
        for y in range(arch.rows):
            ax.add_patch(_rect(x, y, "none", edge="0.7"))
    ax.set_xlim(-1.5, arch.cols + 0.5)
    ax.set_ylim(-1.5, arch.rows + 0.5)
    ax.set_aspect("equal")
    ax.set_title(f"{nl.name}: {nl.copies} copies on {arch.rows}x{arch.cols}")
    ax.set_xticks([])
    ax.set_yticks([])
    return _save(fig, path)


def _rect(x, y, color, edge="black"):
    return Rectangle((x - 0.4, y - 0.4), 0.8, 0.8, facecolor=color, edgecolor=edge, linewidth=0.6)
