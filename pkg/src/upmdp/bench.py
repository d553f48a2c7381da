"""Built-in benchmark models.

``example_pmc`` is the eight-state parametric Markov chain with parameter
``v`` used as the running example.  ``gen_uav`` builds a grid-world UAV
model: the UAV moves one cell per step in one of six directions, after which
the wind pushes it one further cell in the current wind direction with a
probability that depends on the zone (an x-axis slab) and the direction.
Those push probabilities are the model parameters.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .pmdp import PMdp
from .polynomial import Polynomial, parse_expr
from .sampling import UniformBox

__all__ = ["example_pmc", "example_distribution", "UavConfig", "gen_uav", "PRESETS", "WIND"]


def example_pmc() -> PMdp:
    params = ("v",)
    edges = {
        0: [(1, "1-v"), (4, "v")],
        1: [(2, "0.1*(1-v)"), (7, "v+0.9*(1-v)")],
        2: [(3, "v"), (7, "1-v")],
        3: [(3, "1")],
        4: [(5, "0.5*v^2"), (6, "1-0.5*v^2")],
        5: [(3, "1-v"), (6, "v")],
        6: [(6, "1")],
        7: [(7, "1")],
    }
    transitions = {(s, "a"): [(t, parse_expr(e, params)) for t, e in row]
                   for s, row in edges.items()}
    labels = [(f"s{s}",) for s in range(8)]
    labels[3] = ("s3", "target")
    return PMdp("example", params, 8, 0, transitions, "target", labels)


def example_distribution(lo: float = 0.01, hi: float = 0.99) -> UniformBox:
    """Uniform ``v``, kept away from 0 and 1 where the example stops being graph-preserving."""
    return UniformBox({"v": (lo, hi)})


# Wind directions and their unit displacement in (x, y, z).  North is +y, west is -x.
WIND = {"N": (0, 1, 0), "S": (0, -1, 0), "E": (1, 0, 0), "W": (-1, 0, 0)}
MOVES = {"north": (0, 1, 0), "south": (0, -1, 0), "east": (1, 0, 0), "west": (-1, 0, 0),
         "up": (0, 0, 1), "down": (0, 0, -1)}

# Distribution of the next wind direction (independent of the current one).
PRESETS = {
    "uniform": {"N": Fraction(1, 4), "S": Fraction(1, 4), "E": Fraction(1, 4), "W": Fraction(1, 4)},
    "north-biased": {"N": Fraction(2, 5), "S": Fraction(1, 5), "E": Fraction(1, 5), "W": Fraction(1, 5)},
    "west-biased": {"N": Fraction(1, 5), "S": Fraction(1, 5), "E": Fraction(1, 5), "W": Fraction(2, 5)},
}
_BIASED = {"north-biased": "N", "west-biased": "W"}


def _default_obstacles():
    # full-height ridge across y = 2..4 cut by a one-cell-wide canyon at x = 2.  Inside the
    # canyon every move is exposed to cross winds, so the goal cannot be reached risk-free
    return frozenset((x, y, z) for x in range(6) for y in (2, 3, 4) for z in range(3) if x != 2)


@dataclass(frozen=True)
class UavConfig:
    grid: tuple[int, int, int] = (6, 6, 3)
    obstacles: frozenset = field(default_factory=_default_obstacles)
    target: frozenset = frozenset({(0, 5, 0), (0, 5, 1)})
    start: tuple[int, int, int] = (0, 0, 0)
    zones: int = 3
    param_range: tuple[float, float] = (0.05, 0.95)
    weather_preset: str = "uniform"
    wind: Mapping[str, float] | None = None  # overrides the preset's wind distribution

    def __post_init__(self):
        nx, ny, nz = self.grid
        if min(self.grid) < 1:
            raise ValueError("grid dimensions must be positive")
        if not 1 <= self.zones <= nx:
            raise ValueError("zones must lie in [1, nx]")
        lo, hi = self.param_range
        if not 0.0 < lo < hi < 1.0:
            raise ValueError("param_range must satisfy 0 < lo < hi < 1")
        if self.weather_preset not in PRESETS:
            raise ValueError(f"unknown weather preset {self.weather_preset!r}")
        if self.wind is not None:
            if set(self.wind) - set(WIND) or any(w < 0 for w in self.wind.values()):
                raise ValueError("wind distribution must map N/S/E/W to nonnegative weights")
            if sum(self.wind.values()) != 1:
                raise ValueError("wind distribution must sum to 1")
        cells = set(self.obstacles) | set(self.target) | {self.start}
        for c in cells:
            if not all(0 <= c[i] < self.grid[i] for i in range(3)):
                raise ValueError(f"cell {c} outside the grid")
        if not self.target:
            raise ValueError("target set is empty")
        if set(self.target) & set(self.obstacles):
            raise ValueError("target cells overlap obstacles")
        if self.start in self.obstacles:
            raise ValueError("start cell is an obstacle")

    def zone(self, x: int) -> int:
        return x * self.zones // self.grid[0]

    def wind_distribution(self) -> dict:
        if self.wind is None:
            return dict(PRESETS[self.weather_preset])
        return {d: Fraction(self.wind[d]) for d in WIND if self.wind.get(d, 0)}

    def parameters(self) -> list[str]:
        return [f"p_z{z}_{d}" for z in range(self.zones) for d in WIND]


def gen_uav(cfg: UavConfig | None = None):
    """UAV grid-world pMDP and the matching distribution over push probabilities."""
    cfg = cfg or UavConfig()
    nx, ny, nz = cfg.grid
    params = cfg.parameters()
    one = Polynomial.constant(1, params)
    wind_next = cfg.wind_distribution()
    winds = list(WIND)

    cells = [(x, y, z) for x in range(nx) for y in range(ny) for z in range(nz)
             if (x, y, z) not in cfg.obstacles and (x, y, z) not in cfg.target]
    index = {}
    labels = []
    for c in cells:
        for d in winds:
            index[(c, d)] = len(labels)
            labels.append((f"x{c[0]}y{c[1]}z{c[2]}{d}",))
    crash, goal, start = len(labels), len(labels) + 1, len(labels) + 2
    labels += [("crash",), ("goal", "target"), ("start",)]

    def inside(c):
        return all(0 <= c[i] < cfg.grid[i] for i in range(3))

    def shift(c, delta):
        return (c[0] + delta[0], c[1] + delta[1], c[2] + delta[2])

    def with_wind(cell, weight: Polynomial, row: dict):
        """Spread ``weight`` of landing in ``cell`` over the next wind directions."""
        if cell in cfg.target:
            row[goal] = row.get(goal, 0) + weight
            return
        for d2 in wind_next:
            key = index[(cell, d2)]
            row[key] = row.get(key, 0) + weight * Polynomial.constant(wind_next[d2], params)

    transitions = {}
    rewards = {}
    for c in cells:
        for d in winds:
            s = index[(c, d)]
            for a, delta in MOVES.items():
                row: dict[int, Polynomial] = {}
                moved = shift(c, delta)
                if not inside(moved) or moved in cfg.obstacles:
                    row[crash] = one
                elif moved in cfg.target:
                    row[goal] = one
                else:
                    pushed = shift(moved, WIND[d])
                    p = Polynomial.variable(f"p_z{cfg.zone(moved[0])}_{d}", params)
                    if not inside(pushed):
                        with_wind(moved, one, row)
                    elif pushed in cfg.obstacles:
                        row[crash] = row.get(crash, 0) + p
                        with_wind(moved, one - p, row)
                    else:
                        with_wind(pushed, p, row)
                        with_wind(moved, one - p, row)
                transitions[(s, a)] = [(t, poly) for t, poly in sorted(row.items())]
                rewards[(s, a)] = 1.0
    transitions[(crash, "stay")] = [(crash, one)]
    transitions[(goal, "stay")] = [(goal, one)]
    rewards[(crash, "stay")] = 0.0
    rewards[(goal, "stay")] = 0.0
    # the initial wind direction is drawn from the preset
    if cfg.start in cfg.target:
        transitions[(start, "start")] = [(goal, one)]
    else:
        transitions[(start, "start")] = [
            (index[(cfg.start, d)], Polynomial.constant(w, params)) for d, w in wind_next.items()]
    rewards[(start, "start")] = 0.0

    name = f"uav-{nx}x{ny}x{nz}-{cfg.weather_preset}"
    model = PMdp(name, params, len(labels), start, transitions, "target", labels, rewards)
    return model, _uav_distribution(cfg)


def _uav_distribution(cfg: UavConfig) -> UniformBox:
    lo, hi = cfg.param_range
    box = {}
    strong = _BIASED.get(cfg.weather_preset)
    for z in range(cfg.zones):
        for d in WIND:
            # the favoured wind direction also blows harder: upper half of the range
            box[f"p_z{z}_{d}"] = ((lo + hi) / 2, hi) if d == strong else (lo, hi)
    return UniformBox(box)
