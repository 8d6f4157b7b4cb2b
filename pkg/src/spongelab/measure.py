"""Exact and interval-valued measure computations on sponges.

Ball volumes are bracketed by classifying grid cells against the ball with
exact rational predicates: cells fully inside contribute their exact sponge
mass, straddling cells contribute an enclosure, and straddlers can be refined
through real grid levels to tighten the bracket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .sponge import (
    BoxQ,
    SpongeError,
    SpongeSpec,
    contains,
    scale,
)


@dataclass(frozen=True)
class IntervalQ:
    """Rational enclosure [lo, hi] of a true value."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def __add__(self, other: "IntervalQ") -> "IntervalQ":
        return IntervalQ(self.lo + other.lo, self.hi + other.hi)

    def scaled(self, c: Fraction) -> "IntervalQ":
        if c >= 0:
            return IntervalQ(self.lo * c, self.hi * c)
        return IntervalQ(self.hi * c, self.lo * c)

    def encloses(self, other: "IntervalQ") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def contains_value(self, v: Fraction) -> bool:
        return self.lo <= v <= self.hi

    @staticmethod
    def point(v: Fraction) -> "IntervalQ":
        return IntervalQ(v, v)


def tile_density(
    spec: SpongeSpec, k: int, K: int, tail_sum_bound: Fraction = Fraction(0)
) -> IntervalQ:
    """Enclosure of lambda(T cap S)/lambda(T) for a live level-k tile.

    The exact truncated product P = prod_{i=k+1}^{K} (1 - 1/n_i^d) is the upper
    endpoint.  The lower endpoint multiplies in a rational lower bound for
    exp(-2 * tail_sum_bound), where tail_sum_bound dominates sum_{i>K} 1/n_i^d
    (zero when the sequence is exhausted).
    """
    if not (0 <= k <= K <= len(spec.n)):
        raise SpongeError(f"need 0 <= k <= K <= {len(spec.n)}, got k={k}, K={K}")
    if tail_sum_bound < 0:
        raise SpongeError("tail sum bound must be nonnegative")
    p = Fraction(1)
    for ni in spec.n[k:K]:
        p *= 1 - Fraction(1, ni**spec.d)
    # exp(-x) >= 1 - x, so 1 - 2*tail is a valid rational stand-in at the low end.
    tail_factor = max(Fraction(0), 1 - 2 * tail_sum_bound)
    return IntervalQ(p * tail_factor, p)


def _cell_live_through(spec: SpongeSpec, coords: tuple[int, ...], level: int, through: int) -> bool:
    """Liveness of a level-`level` cell checked only against stages 1..through."""
    gs = spec.grid_size(level)
    divisor = gs
    for i in range(min(level, through)):
        divisor //= spec.n[i]
        c = spec.central_index(i + 1)
        if all((a // divisor) % spec.n[i] == c for a in coords):
            return False
    return True


def _ball_cell_mass(
    spec: SpongeSpec,
    x: tuple[Fraction, ...],
    r: Fraction,
    level: int,
    live_through: int,
    density_of_level: Callable[[int], IntervalQ],
    refine: int,
) -> IntervalQ:
    """Enclosure of the weighted live-cell mass inside the closed ball B(x, r)."""
    gs = spec.grid_size(level)
    r2 = r * r
    lo_idx = []
    hi_idx = []
    for xi in x:
        lo_idx.append(max(0, math.floor((xi - r) * gs)))
        hi_idx.append(min(gs - 1, math.ceil((xi + r) * gs)))
    if any(a > b for a, b in zip(lo_idx, hi_idx)):
        return IntervalQ.point(Fraction(0))

    cell_vol = Fraction(1, gs) ** spec.d
    density = density_of_level(level)
    total_lo = Fraction(0)
    total_hi = Fraction(0)

    def cells() -> Sequence[tuple[int, ...]]:
        ranges = [range(a, b + 1) for a, b in zip(lo_idx, hi_idx)]
        out = [()]
        for rng in ranges:
            out = [c + (v,) for c in out for v in rng]
        return out

    straddlers: list[tuple[int, ...]] = []
    for coords in cells():
        near2 = Fraction(0)
        far2 = Fraction(0)
        outside = False
        for a, xi in zip(coords, x):
            lo_c = Fraction(a, gs)
            hi_c = Fraction(a + 1, gs)
            if xi < lo_c:
                g = lo_c - xi
                near2 += g * g
            elif xi > hi_c:
                g = xi - hi_c
                near2 += g * g
            if near2 > r2:
                outside = True
                break
            far2 += max(xi - lo_c, hi_c - xi) ** 2
        if outside or near2 > r2:
            continue
        if not _cell_live_through(spec, coords, level, live_through):
            continue
        if far2 <= r2:
            piece = density.scaled(cell_vol)
            total_lo += piece.lo
            total_hi += piece.hi
        else:
            straddlers.append(coords)

    if straddlers and refine > 0 and level < len(spec.n):
        nk = spec.n[level]
        for coords in straddlers:
            sub_lo = tuple(a * nk for a in coords)
            sub = _ball_cell_mass_window(
                spec, x, r, level + 1, live_through, density_of_level, refine - 1,
                sub_lo, tuple(v + nk - 1 for v in sub_lo),
            )
            total_lo += sub.lo
            total_hi += sub.hi
    else:
        for _ in straddlers:
            total_hi += density.hi * cell_vol
    return IntervalQ(total_lo, total_hi)


def _ball_cell_mass_window(
    spec: SpongeSpec,
    x: tuple[Fraction, ...],
    r: Fraction,
    level: int,
    live_through: int,
    density_of_level: Callable[[int], IntervalQ],
    refine: int,
    win_lo: tuple[int, ...],
    win_hi: tuple[int, ...],
) -> IntervalQ:
    """Same as _ball_cell_mass but restricted to an index window at `level`."""
    gs = spec.grid_size(level)
    r2 = r * r
    cell_vol = Fraction(1, gs) ** spec.d
    density = density_of_level(level)
    total_lo = Fraction(0)
    total_hi = Fraction(0)
    ranges = [range(a, b + 1) for a, b in zip(win_lo, win_hi)]
    coords_list = [()]
    for rng in ranges:
        coords_list = [c + (v,) for c in coords_list for v in rng]
    straddlers = []
    for coords in coords_list:
        near2 = Fraction(0)
        far2 = Fraction(0)
        outside = False
        for a, xi in zip(coords, x):
            lo_c = Fraction(a, gs)
            hi_c = Fraction(a + 1, gs)
            if xi < lo_c:
                g = lo_c - xi
                near2 += g * g
            elif xi > hi_c:
                g = xi - hi_c
                near2 += g * g
            if near2 > r2:
                outside = True
                break
            far2 += max(xi - lo_c, hi_c - xi) ** 2
        if outside or near2 > r2:
            continue
        if not _cell_live_through(spec, coords, level, live_through):
            continue
        if far2 <= r2:
            total_lo += density.lo * cell_vol
            total_hi += density.hi * cell_vol
        else:
            straddlers.append(coords)
    if straddlers and refine > 0 and level < len(spec.n):
        nk = spec.n[level]
        for coords in straddlers:
            sub_lo = tuple(a * nk for a in coords)
            sub = _ball_cell_mass_window(
                spec, x, r, level + 1, live_through, density_of_level, refine - 1,
                sub_lo, tuple(v + nk - 1 for v in sub_lo),
            )
            total_lo += sub.lo
            total_hi += sub.hi
    else:
        for _ in straddlers:
            total_hi += density.hi * cell_vol
    return IntervalQ(total_lo, total_hi)


def ball_sponge_volume(
    spec: SpongeSpec,
    x: Sequence,
    r,
    depth: int,
    tail_sum_bound: Fraction = Fraction(0),
    refine: int = 1,
) -> IntervalQ:
    """Enclosure of the sponge mass lambda(S_K cap B(x,r)), enumerating at `depth`."""
    x = tuple(Fraction(v) for v in x)
    r = Fraction(r)
    if r <= 0:
        raise SpongeError("radius must be positive")
    if not contains(spec, x, depth):
        raise SpongeError("center is not a pre-sponge point")
    K = spec.K

    def density_of_level(level: int) -> IntervalQ:
        return tile_density(spec, min(level, K), K, tail_sum_bound)

    return _ball_cell_mass(spec, x, r, depth, K, density_of_level, refine)


def ball_presponge_volume(
    spec: SpongeSpec,
    x: Sequence,
    r,
    level: int,
    enum_depth: Optional[int] = None,
    refine: int = 1,
) -> IntervalQ:
    """Enclosure of lambda(S_level cap B(x,r)); deeper stages are not removed."""
    x = tuple(Fraction(v) for v in x)
    r = Fraction(r)
    if enum_depth is None:
        enum_depth = level
    if enum_depth < level:
        raise SpongeError("enumeration depth must be at least the pre-sponge level")

    def density_of_level(_level: int) -> IntervalQ:
        return IntervalQ.point(Fraction(1))

    return _ball_cell_mass(spec, x, r, enum_depth, level, density_of_level, refine)


@dataclass(frozen=True)
class DensityReport:
    """Value of the N-fold obstacle density at one (point, radius) query."""

    point: tuple[Fraction, ...]
    radius: Fraction
    value: Fraction
    excluded: tuple[int, ...]

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("density is nonnegative")


@dataclass(frozen=True)
class Obstacle:
    """Removed region with a known volume; level and corner break exclusion ties."""

    box: BoxQ
    volume: Fraction
    level: int = 0

    @staticmethod
    def from_box(box: BoxQ, level: int = 0) -> "Obstacle":
        return Obstacle(box=box, volume=box.volume(), level=level)


def sponge_obstacles(spec: SpongeSpec, depth: int) -> list[Obstacle]:
    """Removed boxes of stages 1..depth as density obstacles."""
    from .sponge import removed_boxes

    out = []
    for k in range(1, depth + 1):
        for b in removed_boxes(spec, k):
            out.append(Obstacle.from_box(b, level=k))
    return out


class ObstacleIndex:
    """Integer-scaled obstacle table for fast, exact ball-intersection scans."""

    def __init__(self, obstacles: Sequence[Obstacle]):
        import numpy as np

        self.obstacles = list(obstacles)
        denoms = [1]
        for ob in self.obstacles:
            for v in (*ob.box.lo, *ob.box.hi):
                denoms.append(v.denominator)
        self.grid = math.lcm(*denoms)
        if self.obstacles:
            self.lo = np.array(
                [[int(v * self.grid) for v in ob.box.lo] for ob in self.obstacles],
                dtype=np.int64,
            )
            self.hi = np.array(
                [[int(v * self.grid) for v in ob.box.hi] for ob in self.obstacles],
                dtype=np.int64,
            )
        else:
            self.lo = np.zeros((0, 0), dtype=np.int64)
            self.hi = np.zeros((0, 0), dtype=np.int64)

    def hits(self, x: tuple[Fraction, ...], r: Fraction) -> list[int]:
        """Indices of obstacles meeting the open ball B(x, r), decided exactly."""
        import numpy as np

        if not self.obstacles:
            return []
        m = math.lcm(self.grid, r.denominator, *[v.denominator for v in x])
        f = m // self.grid
        # int64 stays exact while d*m^2 < 2^63; otherwise fall back to objects
        lo, hi = (self.lo, self.hi) if m <= 1 << 30 else (
            self.lo.astype(object), self.hi.astype(object))
        xs = np.array([int(v * m) for v in x], dtype=lo.dtype)
        gap = np.maximum(lo * f - xs[None, :], xs[None, :] - hi * f)
        gap = np.maximum(gap, 0)
        d2 = (gap * gap).sum(axis=1)
        r_scaled = int(r * m)
        return [int(i) for i in np.nonzero(d2 < r_scaled * r_scaled)[0]]


def n_fold_density(
    obstacles: Sequence[Obstacle] | ObstacleIndex,
    x: Sequence,
    r,
    N: int,
    d: Optional[int] = None,
) -> DensityReport:
    """inf over exclusion sets I with |I| <= N of sum_{R not in I} vol(R)/r^d.

    Realized by deleting the N largest volumes among obstacles meeting the open
    ball; ties break by lowest level then lexicographic box corner.
    """
    x = tuple(Fraction(v) for v in x)
    r = Fraction(r)
    if r <= 0:
        raise SpongeError("radius must be positive")
    if N < 0:
        raise SpongeError("N must be nonnegative")
    if d is None:
        d = len(x)
    index = obstacles if isinstance(obstacles, ObstacleIndex) else ObstacleIndex(obstacles)
    hits = [(i, index.obstacles[i]) for i in index.hits(x, r)]
    hits.sort(key=lambda item: (-item[1].volume, item[1].level, item[1].box.lo))
    excluded = tuple(i for i, _ in hits[:N])
    total = sum((ob.volume for _, ob in hits[N:]), Fraction(0))
    return DensityReport(point=x, radius=r, value=total / r**d, excluded=excluded)


def sup_n_fold_density(
    obstacles: Sequence[Obstacle] | ObstacleIndex,
    samples: Sequence[Sequence],
    r,
    N: int,
    d: Optional[int] = None,
) -> tuple[Fraction, tuple[Fraction, ...]]:
    """Max of the N-fold density over sample points, with its witness."""
    index = obstacles if isinstance(obstacles, ObstacleIndex) else ObstacleIndex(obstacles)
    best = Fraction(-1)
    witness = None
    for p in samples:
        rep = n_fold_density(index, p, r, N, d=d)
        if rep.value > best:
            best, witness = rep.value, rep.point
    return best, witness


@dataclass
class AhlforsScan:
    """Min/max of the volume ratio vol(B(x,r) cap S)/r^d over a sample grid."""

    c_min: float
    c_max: float
    regularity_bound: float
    within_bound: bool
    worst_low: tuple  # (point, radius) attaining c_min
    worst_high: tuple
    rows: list = field(default_factory=list)


def ahlfors_regularity_constant(spec: SpongeSpec) -> float:
    """2 (8 sqrt d)^d / c0 with c0 the full truncated density product."""
    c0 = Fraction(1)
    for ni in spec.n[: spec.K]:
        c0 *= 1 - Fraction(1, ni**spec.d)
    return 2.0 * (8.0 * math.sqrt(spec.d)) ** spec.d / float(c0)


def ahlfors_scan(
    spec: SpongeSpec,
    samples: Sequence[Sequence],
    radii: Sequence,
    depth: int,
    refine: int = 1,
) -> AhlforsScan:
    if not samples:
        raise SpongeError("need at least one sample point")
    if not radii:
        raise SpongeError("need at least one radius")
    c_min = math.inf
    c_max = -math.inf
    worst_low = worst_high = None
    rows = []
    for p in samples:
        for r in radii:
            vol = ball_sponge_volume(spec, p, r, depth, refine=refine)
            ratio = float(vol.midpoint) / float(Fraction(r)) ** spec.d
            rows.append((tuple(Fraction(v) for v in p), Fraction(r), vol.lo, vol.hi, ratio))
            if ratio < c_min:
                c_min, worst_low = ratio, (p, r)
            if ratio > c_max:
                c_max, worst_high = ratio, (p, r)
    bound = ahlfors_regularity_constant(spec) ** 2
    return AhlforsScan(
        c_min=c_min,
        c_max=c_max,
        regularity_bound=bound,
        within_bound=(c_min > 0 and c_max / c_min <= bound),
        worst_low=worst_low,
        worst_high=worst_high,
        rows=rows,
    )


@dataclass
class FillingCheck:
    """Worst measured density ratio mu(Omega_r cap B \\ S)/mu(Omega_r cap B)."""

    level: int
    radius: Fraction
    epsilon: Fraction
    worst_ratio: IntervalQ
    passed: bool
    witness: Optional[tuple[Fraction, ...]]
    rows: list = field(default_factory=list)


def select_filling_level(spec: SpongeSpec, r: Fraction, delta: Fraction) -> int:
    """The k with (2 sqrt d / delta) s_{k+1} <= r < (2 sqrt d / delta) s_k.

    Both comparisons are decided exactly on squares: (2 sqrt d / delta) s <= r
    iff 4 d s^2 <= delta^2 r^2.
    """
    if not (0 < delta < 1):
        raise SpongeError("delta must lie in (0,1)")
    lhs = 4 * spec.d
    for k in range(0, spec.K):
        s_k = scale(spec, k)
        s_k1 = scale(spec, k + 1)
        if lhs * s_k1 * s_k1 <= delta * delta * r * r < lhs * s_k * s_k:
            return k
    needed = "larger truncation depth" if lhs * scale(spec, spec.K) ** 2 > delta**2 * r**2 else "k=0 unavailable: radius too large"
    raise SpongeError(f"no admissible level for r={r}, delta={delta} ({needed})")


def filling_density_check(
    spec: SpongeSpec,
    r,
    delta,
    epsilon,
    sample_points: Sequence[Sequence],
    refine: int = 1,
    tail_sum_bound: Fraction = Fraction(0),
) -> FillingCheck:
    """Check the density half of the filling condition at scale r.

    Omega_r is the level-k pre-sponge for the k selected by the scale rule; the
    sponge is the spec truncation S_K.  Ratios are interval-valued; the check
    passes when every upper endpoint stays below epsilon.
    """
    r = Fraction(r)
    delta = Fraction(delta)
    epsilon = Fraction(epsilon)
    if not (0 < epsilon < 1):
        raise SpongeError("epsilon must lie in (0,1)")
    k = select_filling_level(spec, r, delta)
    enum_depth = min(spec.K, k + 2)
    worst = IntervalQ.point(Fraction(0))
    witness = None
    rows = []
    for p in sample_points:
        pt = tuple(Fraction(v) for v in p)
        if not contains(spec, pt, spec.K):
            raise SpongeError(f"sample {pt} is not a sponge point")
        omega = ball_presponge_volume(spec, pt, r, k, enum_depth=enum_depth, refine=refine)
        sponge_vol = ball_sponge_volume(
            spec, pt, r, enum_depth, tail_sum_bound=tail_sum_bound, refine=refine
        )
        if omega.lo <= 0:
            raise SpongeError(f"degenerate filling mass at {pt}")
        ratio_lo = max(Fraction(0), (omega.lo - sponge_vol.hi) / omega.lo)
        ratio_hi = min(Fraction(1), max(Fraction(0), (omega.hi - sponge_vol.lo) / omega.hi))
        ratio = IntervalQ(min(ratio_lo, ratio_hi), ratio_hi)
        rows.append((pt, ratio.lo, ratio.hi))
        if ratio.hi > worst.hi:
            worst = ratio
            witness = pt
    return FillingCheck(
        level=k,
        radius=r,
        epsilon=epsilon,
        worst_ratio=worst,
        passed=worst.hi < epsilon,
        witness=witness,
        rows=rows,
    )
