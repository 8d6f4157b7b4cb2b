"""Exact-rational construction and queries for Euclidean Sierpinski sponges.

The sponge over a scale sequence n = (n_1, n_2, ...) of odd integers >= 3 is
built by repeatedly subdividing each surviving cube of [0,1]^d into n_k^d
subcubes and deleting the open central one.  Everything here is exact: scales
are Fractions, tiles are integer-addressed cells, and separation claims are
decided on squared distances so no square root is ever taken inexactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterator, Optional, Sequence


class SpongeError(ValueError):
    """Invalid sponge parameters or out-of-range query."""


@dataclass(frozen=True)
class SpongeSpec:
    """Dimension d >= 2, odd scale factors n_i >= 3, truncation depth K <= len(n)."""

    d: int
    n: tuple[int, ...]
    K: int

    def __post_init__(self):
        if self.d < 2:
            raise SpongeError(f"dimension must be >= 2, got {self.d}")
        if not self.n:
            raise SpongeError("scale sequence must be nonempty")
        for ni in self.n:
            if ni < 3 or ni % 2 == 0:
                raise SpongeError(f"scale factors must be odd and >= 3, got {ni}")
        if not (0 <= self.K <= len(self.n)):
            raise SpongeError(f"truncation depth {self.K} outside [0, {len(self.n)}]")

    def grid_size(self, k: int) -> int:
        """Number of level-k cells per axis, prod_{i<=k} n_i."""
        self._check_level(k)
        out = 1
        for ni in self.n[:k]:
            out *= ni
        return out

    def central_index(self, k: int) -> int:
        """Per-axis index of the removed central subcube at stage k (1-based)."""
        if not (1 <= k <= len(self.n)):
            raise SpongeError(f"stage {k} outside [1, {len(self.n)}]")
        return (self.n[k - 1] - 1) // 2

    def _check_level(self, k: int) -> None:
        if not (0 <= k <= self.K):
            raise SpongeError(f"level {k} outside [0, {self.K}]")

    def to_json(self) -> str:
        return json.dumps({"d": self.d, "n": list(self.n), "K": self.K})

    @classmethod
    def from_json(cls, text: str) -> "SpongeSpec":
        obj = json.loads(text)
        return cls(d=int(obj["d"]), n=tuple(int(v) for v in obj["n"]), K=int(obj["K"]))


def scale(spec: SpongeSpec, k: int) -> Fraction:
    """Side length s_k = prod_{i<=k} 1/n_i of a level-k cell, exactly."""
    return Fraction(1, spec.grid_size(k))


PointQ = tuple  # d exact rational coordinates


@dataclass(frozen=True)
class TileId:
    """Level-k cell with integer coordinates a, occupying prod_j [a_j s_k, (a_j+1) s_k]."""

    level: int
    coords: tuple[int, ...]

    def box(self, spec: SpongeSpec) -> "BoxQ":
        s = scale(spec, self.level)
        lo = tuple(a * s for a in self.coords)
        return BoxQ(lo=lo, hi=tuple(v + s for v in lo))

    def center(self, spec: SpongeSpec) -> PointQ:
        s = scale(spec, self.level)
        return tuple(Fraction(2 * a + 1, 1) * s / 2 for a in self.coords)


@dataclass(frozen=True)
class BoxQ:
    """Closed axis-aligned box with exact rational endpoints, lo_j < hi_j."""

    lo: tuple[Fraction, ...]
    hi: tuple[Fraction, ...]

    def __post_init__(self):
        if any(a >= b for a, b in zip(self.lo, self.hi)):
            raise SpongeError("degenerate box: needs lo_j < hi_j on every axis")

    @property
    def d(self) -> int:
        return len(self.lo)

    def volume(self) -> Fraction:
        v = Fraction(1)
        for a, b in zip(self.lo, self.hi):
            v *= b - a
        return v

    def side(self) -> Fraction:
        return self.hi[0] - self.lo[0]

    def contains_interior(self, p: Sequence[Fraction]) -> bool:
        return all(a < x < b for a, x, b in zip(self.lo, p, self.hi))

    def dist2_to_point(self, p: Sequence[Fraction]) -> Fraction:
        total = Fraction(0)
        for a, b, x in zip(self.lo, self.hi, p):
            if x < a:
                total += (a - x) ** 2
            elif x > b:
                total += (x - b) ** 2
        return total

    def max_dist2_to_point(self, p: Sequence[Fraction]) -> Fraction:
        total = Fraction(0)
        for a, b, x in zip(self.lo, self.hi, p):
            total += max(x - a, b - x) ** 2
        return total

    def dist2_to_box(self, other: "BoxQ") -> Fraction:
        total = Fraction(0)
        for a1, b1, a2, b2 in zip(self.lo, self.hi, other.lo, other.hi):
            gap = max(a2 - b1, a1 - b2)
            if gap > 0:
                total += gap * gap
        return total

    def dist_to_unit_boundary(self) -> Fraction:
        """Distance to the boundary of [0,1]^d (box assumed inside the unit cube)."""
        return min(min(a, 1 - b) for a, b in zip(self.lo, self.hi))

    def intersects_open_ball(self, x: Sequence[Fraction], r: Fraction) -> bool:
        return self.dist2_to_point(x) < r * r


def _digits(spec: SpongeSpec, coord: int, level: int) -> Iterator[int]:
    """Base-(n_1,...,n_level) digits of a level-`level` coordinate, most significant first."""
    divisor = spec.grid_size(level)
    for i in range(level):
        divisor //= spec.n[i]
        yield (coord // divisor) % spec.n[i]


def tile_is_live(spec: SpongeSpec, tile: TileId) -> bool:
    """A tile survives iff no ancestor has the all-central local index."""
    spec._check_level(tile.level)
    digit_rows = [list(_digits(spec, a, tile.level)) for a in tile.coords]
    for i in range(tile.level):
        c = spec.central_index(i + 1)
        if all(row[i] == c for row in digit_rows):
            return False
    return True


def iter_live_tiles(spec: SpongeSpec, depth: int) -> Iterator[TileId]:
    """Enumerate live tiles lazily, level by level (no materialized tree)."""
    spec._check_level(depth)

    def descend(level: int, coords: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
        if level == depth:
            yield coords
            return
        nk = spec.n[level]
        c = spec.central_index(level + 1)
        for local in product(range(nk), repeat=spec.d):
            if all(v == c for v in local):
                continue
            child = tuple(a * nk + v for a, v in zip(coords, local))
            yield from descend(level + 1, child)

    for coords in descend(0, (0,) * spec.d):
        yield TileId(level=depth, coords=coords)


def live_tile_count(spec: SpongeSpec, depth: int) -> int:
    """prod_{i<=depth} (n_i^d - 1)."""
    spec._check_level(depth)
    count = 1
    for ni in spec.n[:depth]:
        count *= ni**spec.d - 1
    return count


def removed_boxes(spec: SpongeSpec, k: int) -> list[BoxQ]:
    """Central boxes deleted at stage k, one per live tile at level k-1."""
    if k < 1:
        raise SpongeError("nothing is removed at stage 0")
    spec._check_level(k)
    nk = spec.n[k - 1]
    c = spec.central_index(k)
    s = scale(spec, k)
    out = []
    for tile in iter_live_tiles(spec, k - 1):
        lo = tuple((a * nk + c) * s for a in tile.coords)
        out.append(BoxQ(lo=lo, hi=tuple(v + s for v in lo)))
    return out


def all_removed_boxes(spec: SpongeSpec, depth: int) -> list[BoxQ]:
    """Removed boxes of every stage 1..depth."""
    out: list[BoxQ] = []
    for k in range(1, depth + 1):
        out.extend(removed_boxes(spec, k))
    return out


def contains(spec: SpongeSpec, p: Sequence, depth: int) -> bool:
    """Whether p lies in the level-`depth` pre-sponge.

    The pre-sponge is a union of closed cubes, so points on the boundary of a
    removed box are members; only open interiors are excluded.
    """
    spec._check_level(depth)
    p = tuple(Fraction(x) for x in p)
    if len(p) != spec.d:
        raise SpongeError(f"point has {len(p)} coordinates, expected {spec.d}")
    if any(x < 0 or x > 1 for x in p):
        raise SpongeError("point outside the unit cube")
    for level in range(1, depth + 1):
        gs = spec.grid_size(level)
        c = spec.central_index(level)
        interior = True
        for x in p:
            v = x * gs
            if v.denominator != 1:
                cell = v.numerator // v.denominator
            else:
                interior = False  # on a level-`level` gridline: not in any open cell
                break
            if cell % spec.n[level - 1] != c:
                interior = False
                break
        if interior:
            return False
    return True


def _fraction_sqrt(value: Fraction) -> Optional[Fraction]:
    """Exact square root of a nonnegative rational, or None if irrational."""
    if value < 0:
        return None
    pn, pd = value.numerator, value.denominator
    rn, rd = math.isqrt(pn), math.isqrt(pd)
    if rn * rn == pn and rd * rd == pd:
        return Fraction(rn, rd)
    return None


@dataclass(frozen=True)
class SeparationWitness:
    """Minimizing pair for the removed-box separation scan.

    ``dist`` is the exact rational distance when the squared minimum is a
    perfect square (always the case for axis-aligned minima), else None.
    """

    dist2: Fraction
    dist: Optional[Fraction]
    first: BoxQ | str
    second: BoxQ | str


def min_separation_witness(spec: SpongeSpec, depth: int) -> SeparationWitness:
    """Exhaustive exact minimum distance among removed boxes and the cube boundary.

    Distances are squared integers at the common grid denominator; the pairwise
    scan is vectorized (int64 is exact here: entries never exceed grid_size^2).
    """
    if depth < 1:
        raise SpongeError("separation needs depth >= 1")
    import numpy as np

    boxes = all_removed_boxes(spec, depth)
    gs = spec.grid_size(depth)
    m = len(boxes)
    lo = np.array([[int(v * gs) for v in b.lo] for b in boxes], dtype=np.int64)
    hi = np.array([[int(v * gs) for v in b.hi] for b in boxes], dtype=np.int64)

    best: Optional[int] = None
    best_pair: tuple[int, int] | None = None
    block = 512
    for i0 in range(0, m, block):
        i1 = min(i0 + block, m)
        gap = np.maximum(
            lo[None, :, :] - hi[i0:i1, None, :],
            lo[i0:i1, None, :] - hi[None, :, :],
        )
        np.maximum(gap, 0, out=gap)
        d2 = (gap * gap).sum(axis=2)
        # mask the diagonal and the already-scanned half
        rows = np.arange(i0, i1)[:, None]
        cols = np.arange(m)[None, :]
        d2[cols <= rows] = np.iinfo(np.int64).max
        flat = int(d2.argmin())
        val = int(d2.ravel()[flat])
        if best is None or val < best:
            best = val
            best_pair = (i0 + flat // m, flat % m)

    bound_gap = np.minimum(lo.min(axis=1), (gs - hi).min(axis=1))
    boundary_idx = int(bound_gap.argmin())
    best_boundary = int(bound_gap[boundary_idx]) ** 2
    if best is None or best_boundary <= best:
        dist2 = Fraction(best_boundary, gs * gs)
        first: BoxQ | str = boxes[boundary_idx]
        second: BoxQ | str = "unit-cube-boundary"
    else:
        assert best_pair is not None
        dist2 = Fraction(best, gs * gs)
        first, second = boxes[best_pair[0]], boxes[best_pair[1]]
    return SeparationWitness(dist2=dist2, dist=_fraction_sqrt(dist2), first=first, second=second)


def min_separation(spec: SpongeSpec, depth: int) -> Fraction:
    """Exact minimum separation distance; raises if it happens to be irrational."""
    witness = min_separation_witness(spec, depth)
    if witness.dist is None:
        raise SpongeError(
            f"minimum separation is irrational, squared value {witness.dist2}"
        )
    return witness.dist
