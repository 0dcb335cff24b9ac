"""Simulated-annealing placement of FU netlists onto overlay tiles and pads."""

from __future__ import annotations

import logging
import math
import random
import statistics
from dataclasses import dataclass

from ..errors import DoesNotFit
from ..fumap import Netlist
from ..overlay import OverlayArch, pad_position

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParSeed:
    """Seed and annealing schedule knobs (all must be positive)."""

    seed: int = 1
    initial_temp_mult: float = 20.0
    inner_num: float = 1.0
    cooling_factor: float = 0.95
    exit_threshold: float = 0.005

    def __post_init__(self):
        for name in ("initial_temp_mult", "inner_num", "cooling_factor", "exit_threshold"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class Placement:
    netlist: Netlist
    arch: OverlayArch
    sites: dict[str, tuple]  # block -> ("tile", x, y) | ("pad", k)
    cost: int

    def position(self, block: str) -> tuple[int, int]:
        site = self.sites[block]
        if site[0] == "tile":
            return site[1], site[2]
        return pad_position(self.arch, site[1])

    def block_at(self) -> dict[tuple, str]:
        return {site: b for b, site in self.sites.items()}


def net_pins(netlist: Netlist) -> list[list[str]]:
    return [[n.source] + sorted({b for b, _ in n.sinks}) for n in netlist.nets]


def hpwl(positions) -> int:
    xs = [p[0] for p in positions]
    ys = [p[1] for p in positions]
    return max(xs) - min(xs) + max(ys) - min(ys)


def placement_cost(placement: Placement) -> int:
    """Summed half-perimeter bounding box over all nets, recomputed from scratch."""
    return sum(hpwl([placement.position(b) for b in pins]) for pins in net_pins(placement.netlist))


def accept_move(delta: float, temperature: float, rng: random.Random) -> bool:
    """Metropolis criterion; at zero temperature only non-worsening moves pass."""
    if delta <= 0:
        return True
    if temperature <= 0:
        return False
    return rng.random() < math.exp(-delta / temperature)


class _Annealer:
    def __init__(self, netlist: Netlist, arch: OverlayArch, seed: ParSeed):
        self.arch = arch
        self.seed = seed
        self.rng = random.Random(seed.seed)
        self.blocks = sorted(netlist.blocks)
        self.kind = {b: ("tile" if netlist.blocks[b].kind == "fu" else "pad") for b in self.blocks}
        self.nets = net_pins(netlist)
        self.block_nets: dict[str, list[int]] = {b: [] for b in self.blocks}
        for i, pins in enumerate(self.nets):
            for b in pins:
                self.block_nets[b].append(i)
        self.tile_sites = [("tile", x, y) for y in range(arch.rows) for x in range(arch.cols)]
        self.pad_sites = [("pad", k) for k in range(arch.io_pins)]
        self.pad_xy = [pad_position(arch, k) for k in range(arch.io_pins)]

    def xy(self, site):
        return (site[1], site[2]) if site[0] == "tile" else self.pad_xy[site[1]]

    def initial(self):
        fus = [b for b in self.blocks if self.kind[b] == "tile"]
        ios = [b for b in self.blocks if self.kind[b] == "pad"]
        tiles = list(self.tile_sites)
        pads = list(self.pad_sites)
        self.rng.shuffle(tiles)
        self.rng.shuffle(pads)
        self.site = dict(zip(fus, tiles))
        self.site.update(zip(ios, pads))
        self.occupant = {s: b for b, s in self.site.items()}
        self.net_cost = [self.cost_of(i) for i in range(len(self.nets))]
        self.cost = sum(self.net_cost)

    def cost_of(self, i) -> int:
        return hpwl([self.xy(self.site[b]) for b in self.nets[i]])

    def propose(self, rlim):
        b = self.blocks[self.rng.randrange(len(self.blocks))]
        cur = self.site[b]
        cx, cy = self.xy(cur)
        r = max(1, int(rlim))
        if self.kind[b] == "tile":
            x = min(self.arch.cols - 1, max(0, cx + self.rng.randint(-r, r)))
            y = min(self.arch.rows - 1, max(0, cy + self.rng.randint(-r, r)))
            target = ("tile", x, y)
        else:
            near = [k for k, (px, py) in enumerate(self.pad_xy) if abs(px - cx) <= r and abs(py - cy) <= r]
            target = ("pad", near[self.rng.randrange(len(near))])
        if target == cur:
            return None
        return b, target

    def apply(self, b, target):
        """Move ``b`` to ``target`` (swapping any occupant); return (delta, undo)."""
        other = self.occupant.get(target)
        src = self.site[b]
        affected = set(self.block_nets[b])
        if other is not None:
            affected.update(self.block_nets[other])
        self.site[b] = target
        self.occupant[target] = b
        if other is not None:
            self.site[other] = src
            self.occupant[src] = other
        else:
            del self.occupant[src]
        delta = 0
        changes = []
        for i in affected:
            new = self.cost_of(i)
            changes.append((i, self.net_cost[i]))
            delta += new - self.net_cost[i]
            self.net_cost[i] = new
        self.cost += delta
        return delta, (b, other, src, target, changes)

    def undo(self, token, delta):
        b, other, src, target, changes = token
        self.site[b] = src
        self.occupant[src] = b
        if other is not None:
            self.site[other] = target
            self.occupant[target] = other
        else:
            del self.occupant[target]
        for i, old in changes:
            self.net_cost[i] = old
        self.cost -= delta

    def try_move(self, rlim, temperature) -> int | None:
        prop = self.propose(rlim)
        if prop is None:
            return None
        delta, token = self.apply(*prop)
        if accept_move(delta, temperature, self.rng):
            return delta
        self.undo(token, delta)
        return None

    def run(self) -> int:
        self.initial()
        n = len(self.blocks)
        if not self.nets or n < 2:
            return 0
        max_r = max(self.arch.rows, self.arch.cols) + 1
        samples = []
        for _ in range(n):
            if self.try_move(max_r, math.inf) is not None:
                samples.append(self.cost)
        spread = statistics.pstdev(samples) if len(samples) > 1 else 0.0
        temperature = self.seed.initial_temp_mult * spread
        moves = max(1, int(self.seed.inner_num * n ** (4 / 3)))
        rlim = float(max_r)
        temps = 0
        while temperature > 0 and temperature >= self.seed.exit_threshold * self.cost / len(self.nets):
            accepted = 0
            for _ in range(moves):
                if self.try_move(rlim, temperature) is not None:
                    accepted += 1
            rate = accepted / moves
            if rate > 0.96:
                temperature *= 0.5
            elif rate > 0.8:
                temperature *= 0.9
            elif rate > 0.15 or rlim > 1:
                temperature *= self.seed.cooling_factor
            else:
                temperature *= 0.8
            rlim = min(max_r, max(1.0, rlim * (1 - 0.44 + rate)))
            temps += 1
        for _ in range(moves):
            self.try_move(1, 0.0)
        log.debug("annealed %d blocks over %d temperatures, cost %d", n, temps, self.cost)
        return temps


def place(netlist: Netlist, arch: OverlayArch, seed: ParSeed | None = None) -> Placement:
    """Anneal a legal placement minimising total half-perimeter wirelength.

    Deterministic for a given ``seed``.  Raises :class:`DoesNotFit` when the
    netlist has more FU blocks than tiles or more I/O blocks than pads.
    """
    seed = seed or ParSeed()
    n_fu = len(netlist.blocks_of("fu"))
    n_io = len(netlist.blocks) - n_fu
    if n_fu > arch.tiles:
        raise DoesNotFit(f"{n_fu} FU blocks exceed {arch.tiles} tiles")
    if n_io > arch.io_pins:
        raise DoesNotFit(f"{n_io} I/O blocks exceed {arch.io_pins} perimeter pads")
    ann = _Annealer(netlist, arch, seed)
    ann.run()
    placement = Placement(netlist, arch, {b: ann.site[b] for b in ann.blocks}, 0)
    return Placement(netlist, arch, placement.sites, placement_cost(placement))


def dump_placement(placement: Placement) -> str:
    """Text dump: one ``<block> tile <x> <y>`` or ``<block> pad <k>`` line per block,
    followed by an ASCII picture of the grid as ``#`` comments."""
    a = placement.arch
    lines = [f"placement {placement.netlist.name} arch={a.rows}x{a.cols} cost={placement.cost}"]
    for b in sorted(placement.sites):
        s = placement.sites[b]
        lines.append(f"{b} tile {s[1]} {s[2]}" if s[0] == "tile" else f"{b} pad {s[1]}")
    lines.extend("# " + row for row in render_grid(placement))
    return "\n".join(lines) + "\n"


def load_placement(text: str, netlist: Netlist, arch: OverlayArch) -> Placement:
    sites = {}
    cost = 0
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "placement":
            cost = int(parts[-1].split("=", 1)[1])
        elif parts[1] == "tile":
            sites[parts[0]] = ("tile", int(parts[2]), int(parts[3]))
        else:
            sites[parts[0]] = ("pad", int(parts[2]))
    return Placement(netlist, arch, sites, cost)


def render_grid(placement: Placement) -> list[str]:
    """ASCII picture: each tile shows the copy index of its FU, ``.`` when idle."""
    a = placement.arch
    grid = [["." for _ in range(a.cols)] for _ in range(a.rows)]
    for b, s in placement.sites.items():
        if s[0] == "tile":
            copy = placement.netlist.blocks[b].copy
            grid[s[2]][s[1]] = _copy_char(copy)
    return ["".join(row) for row in reversed(grid)]


def _copy_char(k: int) -> str:
    chars = "0123456789abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    return chars[k] if k < len(chars) else "*"
