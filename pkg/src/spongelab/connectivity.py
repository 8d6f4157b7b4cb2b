"""Tile-adjacency graphs and connectivity machinery.

Implements the discrete substrate for the curve-based arguments: shortest and
penalized obstacle-avoiding paths (bicriteria label search over the tile
graph, with optional gap jumps), discrete centered maximal functions with tile
masses, quasiconvexity scans, curve patching through a prescribed subset, and
the sampled connectivity function.

Length bookkeeping inside the search runs on a lattice of s_k/2 units (edges
are exactly 2 units; jump chords round up), so label sets stay finite and the
returned fragment is always re-measured exactly before anything is reported.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .sponge import SpongeError, SpongeSpec, TileId, iter_live_tiles, live_tile_count, scale


class GraphError(ValueError):
    """Invalid graph query or resource cap exceeded."""


@dataclass
class TileGraph:
    """Face-adjacency graph of live tiles at one level."""

    spec: SpongeSpec
    level: int
    coords: list[tuple[int, ...]]
    index: dict[tuple[int, ...], int]
    adjacency: list[list[int]]
    s: Fraction
    masses: list[Fraction]

    def __len__(self) -> int:
        return len(self.coords)

    def center(self, v: int) -> tuple[Fraction, ...]:
        return tuple(Fraction(2 * a + 1, 2) * self.s for a in self.coords[v])

    def dist2(self, u: int, v: int) -> Fraction:
        return sum(
            ((2 * a + 1) - (2 * b + 1)) ** 2
            for a, b in zip(self.coords[u], self.coords[v])
        ) * self.s * self.s / 4

    def dist(self, u: int, v: int) -> float:
        return math.sqrt(float(self.dist2(u, v)))

    def total_mass(self) -> Fraction:
        return sum(self.masses, Fraction(0))

    def tile(self, v: int) -> TileId:
        return TileId(self.level, self.coords[v])


def build_tile_graph(spec: SpongeSpec, level: int, max_vertices: int = 100_000) -> TileGraph:
    """Graph over live level-`level` tiles; edges join tiles sharing a (d-1)-face."""
    expected = live_tile_count(spec, level)
    if expected > max_vertices:
        raise GraphError(
            f"{expected} live tiles exceed the cap of {max_vertices}; raise max_vertices"
        )
    coords = sorted(t.coords for t in iter_live_tiles(spec, level))
    index = {c: i for i, c in enumerate(coords)}
    adjacency: list[list[int]] = [[] for _ in coords]
    for i, c in enumerate(coords):
        for axis in range(spec.d):
            nb = list(c)
            nb[axis] += 1
            j = index.get(tuple(nb))
            if j is not None:
                adjacency[i].append(j)
                adjacency[j].append(i)
    s = scale(spec, level)
    masses = [s**spec.d] * len(coords)
    return TileGraph(
        spec=spec, level=level, coords=coords, index=index,
        adjacency=adjacency, s=s, masses=masses,
    )


def bfs_hops(graph: TileGraph, source: int, targets: Optional[set[int]] = None) -> dict[int, int]:
    """Unweighted hop counts from source (all edges have length s)."""
    hops = {source: 0}
    queue = deque([source])
    remaining = set(targets) if targets is not None else None
    if remaining is not None:
        remaining.discard(source)
    while queue:
        u = queue.popleft()
        for v in graph.adjacency[u]:
            if v not in hops:
                hops[v] = hops[u] + 1
                queue.append(v)
                if remaining is not None:
                    remaining.discard(v)
                    if not remaining:
                        return hops
    return hops


@dataclass
class QuasiconvexityScan:
    """Max of graph distance over Euclidean distance across vertex pairs."""

    ratio: float
    ratio_sq: Fraction  # exact square of the reported maximum
    witness: Optional[tuple[int, int]]
    disconnected: list[tuple[int, int]]

    @property
    def connected(self) -> bool:
        return not self.disconnected


def quasiconvexity_scan(
    graph: TileGraph, pairs: Optional[Sequence[tuple[int, int]]] = None
) -> QuasiconvexityScan:
    """Scan pairs (all pairs when omitted) for the worst detour ratio.

    Comparisons run on exact squared ratios; identical vertices are skipped.
    """
    best_sq = Fraction(0)
    witness = None
    disconnected: list[tuple[int, int]] = []
    if pairs is None:
        sources = range(len(graph))
    else:
        sources = sorted({p[0] for p in pairs})
    wanted = None if pairs is None else {}
    if pairs is not None:
        for x, y in pairs:
            wanted.setdefault(x, set()).add(y)
    for x in sources:
        hops = bfs_hops(graph, x)
        targets = range(x + 1, len(graph)) if pairs is None else sorted(wanted[x])
        for y in targets:
            if y == x:
                continue
            if y not in hops:
                disconnected.append((x, y))
                continue
            glen = hops[y] * graph.s
            ratio_sq = glen * glen / graph.dist2(x, y)
            if ratio_sq > best_sq:
                best_sq, witness = ratio_sq, (x, y)
    return QuasiconvexityScan(
        ratio=math.sqrt(float(best_sq)),
        ratio_sq=best_sq,
        witness=witness,
        disconnected=disconnected,
    )


@dataclass
class PathFragment:
    """Vertex walk with optional jump (gap) markers on consecutive pairs.

    ``jumps[i]`` is True when the step vertices[i] -> vertices[i+1] is a gap
    chord rather than a graph edge.
    """

    graph: TileGraph
    vertices: list[int]
    jumps: list[bool]

    def __post_init__(self):
        if len(self.jumps) != max(0, len(self.vertices) - 1):
            raise GraphError("need one jump flag per consecutive pair")
        for (u, v), is_jump in zip(zip(self.vertices, self.vertices[1:]), self.jumps):
            if not is_jump and v not in self.graph.adjacency[u]:
                raise GraphError(f"vertices {u},{v} are not adjacent and not marked as a jump")

    def edge_length_total(self) -> Fraction:
        return sum(
            (self.graph.s for j in self.jumps if not j), Fraction(0)
        )

    def gap(self) -> float:
        """Total gap size: sum of jump chord lengths."""
        return sum(
            self.graph.dist(u, v)
            for (u, v), j in zip(zip(self.vertices, self.vertices[1:]), self.jumps)
            if j
        )

    def length(self) -> float:
        """Len = edge lengths plus jump chord lengths."""
        return float(self.edge_length_total()) + self.gap()

    def obstacle_length(self, obstacle: set[int]) -> Fraction:
        """Exact time spent in the obstacle: s per edge with both ends inside,
        s/2 per edge with one end inside; gaps contribute nothing."""
        total = Fraction(0)
        half = self.graph.s / 2
        for (u, v), is_jump in zip(zip(self.vertices, self.vertices[1:]), self.jumps):
            if is_jump:
                continue
            total += half * ((u in obstacle) + (v in obstacle))
        return total

    def to_jsonable(self) -> dict:
        return {
            "level": self.graph.level,
            "tiles": [list(self.graph.coords[v]) for v in self.vertices],
            "jumps": list(self.jumps),
        }


@dataclass
class Infeasible:
    """Search ended without a fragment inside the budget."""

    reason: str
    witness: Optional[tuple[int, int]] = None

    def __bool__(self) -> bool:
        return False


def _chord_units(graph: TileGraph, u: int, v: int) -> int:
    """Jump chord length rounded up to s/2 units (never undercounts)."""
    d2 = graph.dist2(u, v)
    q = graph.s / 2
    units = math.isqrt(int(d2 / (q * q)))
    while units * units * q * q < d2:
        units += 1
    return units


def penalized_geodesic(
    graph: TileGraph,
    x: int,
    y: int,
    obstacle: Iterable[int],
    budget_factor: Fraction,
    allow_jumps: bool = False,
) -> PathFragment | Infeasible:
    """Fragment from x to y minimizing obstacle length plus gap, within budget.

    Among fragments with Len <= budget_factor * d(x, y), a bicriteria
    label-correcting search returns one minimizing the penalty
    (obstacle length + gap), breaking ties by length.  Lengths and penalties
    live on the s/2 lattice; jump chords round up, so the returned fragment
    honours the true budget whenever the quantized search does.
    """
    budget_factor = Fraction(budget_factor)
    if budget_factor < 1:
        raise GraphError("budget factor must be at least 1")
    E = set(obstacle)
    if x == y:
        return PathFragment(graph, [x], [])
    q = graph.s / 2
    d_xy2 = graph.dist2(x, y)
    # largest unit count with (units * q)^2 <= (budget * d)^2, decided exactly
    limit2 = budget_factor * budget_factor * d_xy2
    budget_units = math.isqrt(int(limit2 / (q * q)))
    while (budget_units + 1) * (budget_units + 1) * q * q <= limit2:
        budget_units += 1

    # Pareto label sets per vertex: (penalty_units, length_units)
    labels: dict[int, list[tuple[int, int]]] = {x: [(0, 0)]}
    parents: dict[tuple[int, int, int], tuple[int, int, int, bool]] = {}
    heap: list[tuple[int, int, int]] = [(0, 0, x)]
    n_vertices = len(graph)

    def dominated(v: int, pen: int, length: int) -> bool:
        for p, l in labels.get(v, ()):
            if p <= pen and l <= length:
                return True
        return False

    def push(v: int, pen: int, length: int, parent: tuple[int, int, int], jump: bool) -> None:
        if length > budget_units or dominated(v, pen, length):
            return
        lst = labels.setdefault(v, [])
        lst[:] = [(p, l) for p, l in lst if not (pen <= p and length <= l)]
        lst.append((pen, length))
        parents[(v, pen, length)] = (*parent, jump)
        heapq.heappush(heap, (pen, length, v))

    while heap:
        pen, length, u = heapq.heappop(heap)
        if (pen, length) not in labels.get(u, ()):
            continue
        if u == y:
            break
        half_u = 1 if u in E else 0
        for v in graph.adjacency[u]:
            step_pen = half_u + (1 if v in E else 0)
            push(v, pen + step_pen, length + 2, (u, pen, length), False)
        if allow_jumps:
            for v in range(n_vertices):
                if v == u:
                    continue
                units = _chord_units(graph, u, v)
                if length + units <= budget_units:
                    push(v, pen + units, length + units, (u, pen, length), True)

    finals = labels.get(y, [])
    if not finals:
        if allow_jumps:
            # the trivial two-point fragment has true Len = d(x,y) <= budget,
            # even when chord quantization kept it out of the label search
            return PathFragment(graph, [x, y], [True])
        reachable = bfs_hops(graph, x)
        reason = (
            "endpoints lie in different components"
            if y not in reachable
            else "no fragment within the length budget"
        )
        return Infeasible(reason=reason, witness=(x, y))

    pen, length = min(finals)
    vertices = [y]
    jump_flags = []
    key = (y, pen, length)
    while key in parents:
        pu, ppen, plen, jump = parents[key]
        vertices.append(pu)
        jump_flags.append(jump)
        key = (pu, ppen, plen)
    vertices.reverse()
    jump_flags.reverse()
    return PathFragment(graph, vertices, jump_flags)


def _sqrt_upper(v2: Fraction) -> Fraction:
    """A rational upper bound for sqrt(v2)."""
    r = Fraction(math.isqrt(v2.numerator * v2.denominator), v2.denominator)
    while r * r < v2:
        r += Fraction(1, 1 << 20)
    return r


def shortest_path(graph: TileGraph, x: int, y: int) -> Optional[list[int]]:
    """Plain BFS shortest vertex path (all edge lengths equal)."""
    if x == y:
        return [x]
    prev = {x: -1}
    queue = deque([x])
    while queue:
        u = queue.popleft()
        for v in graph.adjacency[u]:
            if v not in prev:
                prev[v] = u
                if v == y:
                    path = [y]
                    while path[-1] != x:
                        path.append(prev[path[-1]])
                    return path[::-1]
                queue.append(v)
    return None


def discrete_maximal(
    graph: TileGraph, f: Sequence[Fraction], x: int, s: Fraction
) -> Fraction:
    """Centered maximal function sup_{0 < rho < s} avg_{B(x, rho)} f.

    Balls are the Euclidean center-distance balls realized on the vertex set;
    the supremum runs over the finitely many distinct ball compositions.
    """
    s = Fraction(s)
    if s <= 0:
        raise GraphError("maximal function scale must be positive")
    if any(v < 0 for v in f):
        raise GraphError("maximal function expects f >= 0")
    s2 = s * s
    dists = sorted(
        (graph.dist2(x, v), v) for v in range(len(graph))
    )
    best = Fraction(0)
    mass = Fraction(0)
    num = Fraction(0)
    i = 0
    n = len(dists)
    while i < n:
        d2 = dists[i][0]
        if d2 >= s2:
            break
        # absorb the whole distance shell at once
        while i < n and dists[i][0] == d2:
            v = dists[i][1]
            mass += graph.masses[v]
            num += graph.masses[v] * f[v]
            i += 1
        avg = num / mass
        if avg > best:
            best = avg
    return best


def measured_doubling(graph: TileGraph, max_radius2: Optional[Fraction] = None) -> Fraction:
    """Largest mass(B(x, 2r)) / mass(B(x, r)) over vertices and realized radii."""
    import bisect

    best = Fraction(1)
    for x in range(len(graph)):
        pairs = sorted((graph.dist2(x, v), v) for v in range(len(graph)))
        dists = [d2 for d2, _ in pairs]
        prefix: list[Fraction] = []
        total = Fraction(0)
        for _, v in pairs:
            total += graph.masses[v]
            prefix.append(total)
        for d2 in dists:
            if max_radius2 is not None and d2 > max_radius2:
                break
            # closed ball at radius sqrt(d2) versus closed ball at 2 sqrt(d2)
            hi = bisect.bisect_right(dists, 4 * d2)
            lo = bisect.bisect_right(dists, d2)
            ratio = prefix[hi - 1] / prefix[lo - 1]
            if ratio > best:
                best = ratio
    return best


@dataclass
class ConnectivityProbe:
    """Measured outcome of one obstacle-avoidance probe.

    All achieved quantities are recomputed from the returned fragment, never
    trusted from the search bookkeeping.
    """

    x: int
    y: int
    obstacle: frozenset[int]
    p: Fraction
    tau: Fraction
    fragment: Optional[PathFragment]
    achieved_C: Optional[float]
    achieved_delta: Optional[float]
    feasible: bool
    infeasible_reason: Optional[str] = None
    witness: Optional[tuple[int, int]] = None

    def meets(self, C_target: float, delta_target: float, slack: float = 1e-12) -> bool:
        if not self.feasible:
            return False
        return (
            self.achieved_C <= C_target + slack
            and self.achieved_delta <= delta_target + slack
        )


def max_connectivity_probe(
    graph: TileGraph,
    x: int,
    y: int,
    obstacle: Iterable[int],
    p: Fraction,
    C_target: Fraction,
    allow_jumps: bool = False,
) -> ConnectivityProbe:
    """Probe the obstacle-avoidance inequality for one pair and obstacle.

    tau is the larger endpoint maximal function of the obstacle indicator at
    scale C_target * d(x, y); achieved delta solves
    obstacle_length + gap = delta * tau^(1/p) * d(x, y).
    """
    E = frozenset(obstacle)
    p = Fraction(p)
    C_target = Fraction(C_target)
    indicator = [Fraction(1) if v in E else Fraction(0) for v in range(len(graph))]
    d_xy = graph.dist(x, y)
    radius = C_target * _sqrt_upper(graph.dist2(x, y))
    tau = max(
        discrete_maximal(graph, indicator, x, radius),
        discrete_maximal(graph, indicator, y, radius),
    )
    if tau >= 1:
        raise GraphError("endpoint maximal function must be < 1 for a probe")
    result = penalized_geodesic(graph, x, y, E, C_target, allow_jumps=allow_jumps)
    if isinstance(result, Infeasible):
        return ConnectivityProbe(
            x=x, y=y, obstacle=E, p=p, tau=tau, fragment=None,
            achieved_C=None, achieved_delta=None, feasible=False,
            infeasible_reason=result.reason, witness=result.witness,
        )
    length = result.length()
    penalty = float(result.obstacle_length(E)) + result.gap()
    achieved_C = length / d_xy if d_xy > 0 else 1.0
    if penalty == 0:
        achieved_delta = 0.0
    elif tau == 0:
        achieved_delta = math.inf
    else:
        achieved_delta = penalty / (float(tau) ** (1 / float(p)) * d_xy)
    return ConnectivityProbe(
        x=x, y=y, obstacle=E, p=p, tau=tau, fragment=result,
        achieved_C=achieved_C, achieved_delta=achieved_delta, feasible=True,
    )


def replay_exponent_upgrade(
    probe: ConnectivityProbe, q: Fraction, delta: Fraction, tau0: Fraction
) -> bool:
    """Check that the probe's fragment passes the (q, delta) inequality at level tau0.

    Given an achieved pair at exponent p, the same fragment must satisfy
    penalty <= delta * tau^(1/q) * d(x,y) whenever tau <= tau0.
    """
    if not probe.feasible:
        return False
    if probe.tau > tau0:
        return True  # hypothesis empty: nothing to check at this level
    d_xy = probe.fragment.graph.dist(probe.x, probe.y)
    penalty = float(probe.fragment.obstacle_length(probe.obstacle)) + probe.fragment.gap()
    if probe.tau == 0:
        return penalty == 0
    return penalty <= float(delta) * float(probe.tau) ** (1 / float(q)) * d_xy + 1e-12


def patch_curve(
    graph: TileGraph, path: PathFragment, allowed: Iterable[int]
) -> PathFragment | Infeasible:
    """Replace every maximal excursion outside `allowed` by a shortest path inside it.

    Endpoints must lie in the allowed set; jump steps inside an excursion are
    patched away together with it.
    """
    Y = set(allowed)
    verts = path.vertices
    if verts[0] not in Y or verts[-1] not in Y:
        raise GraphError("path endpoints must lie in the allowed set")

    sub_adj = {v: [w for w in graph.adjacency[v] if w in Y] for v in Y}

    def shortest_in_y(a: int, b: int) -> Optional[list[int]]:
        if a == b:
            return [a]
        prev = {a: -1}
        queue = deque([a])
        while queue:
            u = queue.popleft()
            for w in sub_adj[u]:
                if w not in prev:
                    prev[w] = u
                    if w == b:
                        out = [b]
                        while out[-1] != a:
                            out.append(prev[out[-1]])
                        return out[::-1]
                    queue.append(w)
        return None

    new_vertices = [verts[0]]
    new_jumps: list[bool] = []
    i = 0
    while i < len(verts) - 1:
        j = i + 1
        if verts[j] in Y:
            new_vertices.append(verts[j])
            new_jumps.append(path.jumps[i])
            i = j
            continue
        while verts[j] not in Y:
            j += 1  # endpoints in Y guarantee termination
        detour = shortest_in_y(verts[i], verts[j])
        if detour is None:
            return Infeasible(
                reason="excursion endpoints are disconnected inside the allowed set",
                witness=(verts[i], verts[j]),
            )
        new_vertices.extend(detour[1:])
        new_jumps.extend([False] * (len(detour) - 1))
        i = j
    return PathFragment(graph, new_vertices, new_jumps)


@dataclass
class AlphaSample:
    x: int
    y: int
    obstacle: frozenset[int]


def alpha_estimate(
    graph: TileGraph,
    L: Fraction,
    tau: Fraction,
    p: Fraction,
    samples: Sequence[AlphaSample],
    C: Optional[Fraction] = None,
) -> float:
    """Sampled connectivity function.

    Max over admissible samples (endpoint maximal functions of the obstacle
    below tau^p) of the min over fragments with Len <= L d(x,y) of
    (obstacle length + gap)/d(x,y).  The trivial two-point fragment keeps the
    value at most 1.
    """
    L = Fraction(L)
    tau = Fraction(tau)
    p = Fraction(p)
    if L < 1 or not (0 < tau <= 1):
        raise GraphError("need L >= 1 and tau in (0, 1]")
    if C is None:
        C = L
    best = 0.0
    if p.denominator == 1:
        tau_gate = tau ** int(p)
    else:
        from .constants import qpow_interval

        tau_gate = qpow_interval(tau, p).lo  # conservative admission gate
    for sample in samples:
        indicator = [
            Fraction(1) if v in sample.obstacle else Fraction(0)
            for v in range(len(graph))
        ]
        radius = Fraction(C) * _sqrt_upper(graph.dist2(sample.x, sample.y))
        m = max(
            discrete_maximal(graph, indicator, sample.x, radius),
            discrete_maximal(graph, indicator, sample.y, radius),
        )
        if m >= tau_gate:
            continue
        result = penalized_geodesic(
            graph, sample.x, sample.y, sample.obstacle, L, allow_jumps=True
        )
        if isinstance(result, Infeasible):
            value = 1.0  # the trivial fragment bound
        else:
            d_xy = graph.dist(sample.x, sample.y)
            value = (
                float(result.obstacle_length(sample.obstacle)) + result.gap()
            ) / d_xy
        best = max(best, min(value, 1.0))
    return best
