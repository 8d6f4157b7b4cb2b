from fractions import Fraction

import pytest

from spongelab.measure import (
    DensityReport,
    IntervalQ,
    Obstacle,
    ahlfors_scan,
    ball_presponge_volume,
    ball_sponge_volume,
    filling_density_check,
    n_fold_density,
    select_filling_level,
    sponge_obstacles,
    tile_density,
)
from spongelab.sponge import SpongeError, SpongeSpec, live_tile_count, scale

F = Fraction


def test_interval_basics():
    iv = IntervalQ(F(1, 3), F(1, 2))
    assert iv.width == F(1, 6)
    assert iv.midpoint == F(5, 12)
    assert iv.encloses(IntervalQ(F(2, 5), F(9, 20)))
    with pytest.raises(ValueError):
        IntervalQ(F(1), F(0))


def test_tile_density_exact_product():
    spec = SpongeSpec(d=2, n=(3, 5), K=2)
    iv = tile_density(spec, 0, 2)
    assert iv.hi == F(192, 225)
    assert iv.lo == F(192, 225)  # exhausted tail
    assert tile_density(spec, 2, 2).hi == 1  # empty product
    with pytest.raises(SpongeError):
        tile_density(spec, 0, 3)


def test_tile_density_tail_bracket():
    spec = SpongeSpec(d=2, n=(3, 3), K=2)
    iv = tile_density(spec, 0, 2, tail_sum_bound=F(1, 100))
    assert iv.hi == F(64, 81)
    assert iv.lo == F(64, 81) * (1 - F(2, 100))
    assert iv.lo <= iv.hi


def test_tile_density_measure_zero_regime():
    spec = SpongeSpec(d=2, n=(3,) * 12, K=12)
    iv = tile_density(spec, 0, 12)
    assert iv.hi == F(8, 9) ** 12
    assert float(iv.hi) < 0.25


def test_tile_density_pixel_mass_invariant():
    # upper endpoint times lambda(T) equals deep live count times s^d, exactly
    for spec in (SpongeSpec(d=2, n=(3, 3, 3, 3), K=4), SpongeSpec(d=2, n=(3, 5, 3), K=3)):
        for k in range(spec.K + 1):
            dens = tile_density(spec, k, spec.K).hi
            lhs = dens * scale(spec, k) ** spec.d * live_tile_count(spec, k)
            rhs = live_tile_count(spec, spec.K) * scale(spec, spec.K) ** spec.d
            assert lhs == rhs


def test_ball_volume_covers_whole_carpet():
    spec = SpongeSpec(d=2, n=(3,), K=1)
    iv = ball_sponge_volume(spec, (0, 0), F(3, 2), depth=1)
    assert iv.lo == iv.hi == F(8, 9)


def test_ball_volume_inside_single_tile():
    import math

    spec = SpongeSpec(d=2, n=(3, 3), K=2)
    # ball strictly inside the live level-2 tile [0,1/9]^2, which is fully in S_2
    x, r = (F(1, 18), F(1, 18)), F(1, 36)
    iv = ball_sponge_volume(spec, x, r, depth=2)
    true_area = math.pi * float(r) ** 2
    assert 0 <= float(iv.lo) <= true_area <= float(iv.hi) <= float(F(1, 81))


def test_ball_volume_nesting_in_depth():
    spec = SpongeSpec(d=2, n=(3, 3, 3), K=3)
    x, r = (F(0), F(0)), F(1, 5)
    outer = ball_sponge_volume(spec, x, r, depth=1, refine=0)
    middle = ball_sponge_volume(spec, x, r, depth=2, refine=0)
    inner = ball_sponge_volume(spec, x, r, depth=3, refine=0)
    assert outer.encloses(middle)
    assert middle.encloses(inner)
    assert inner.width < outer.width


def test_ball_presponge_matches_full_grid():
    spec = SpongeSpec(d=2, n=(3, 3), K=2)
    iv = ball_presponge_volume(spec, (0, 0), F(3, 2), level=1, enum_depth=1)
    assert iv.lo == iv.hi == F(8, 9)
    iv2 = ball_presponge_volume(spec, (0, 0), F(3, 2), level=2, enum_depth=2)
    assert iv2.lo == iv2.hi == F(64, 81)


def test_n_fold_density_carpet_values():
    spec = SpongeSpec(d=2, n=(3, 3), K=2)
    obstacles = sponge_obstacles(spec, 2)
    rep = n_fold_density(obstacles, (0, 0), 2, N=0)
    assert rep.value == F(17, 324)
    rep1 = n_fold_density(obstacles, (0, 0), 2, N=1)
    assert rep1.value == F(2, 81)
    assert len(rep1.excluded) == 1
    rep_all = n_fold_density(obstacles, (0, 0), 2, N=9)
    assert rep_all.value == 0


def test_n_fold_density_monotonicity():
    spec = SpongeSpec(d=2, n=(3, 3, 3), K=3)
    obstacles = sponge_obstacles(spec, 3)
    x, r = (F(1, 9), F(1, 9)), F(1, 2)
    values = [n_fold_density(obstacles, x, r, N=N).value for N in range(6)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    # removing obstacles can only decrease the density
    smaller = n_fold_density(obstacles[: len(obstacles) // 2], x, r, N=0).value
    assert smaller <= values[0]


def test_n_fold_density_empty():
    rep = n_fold_density([], (0, 0), 1, N=0, d=2)
    assert rep.value == 0 and rep.excluded == ()


def test_n_fold_density_decay_for_summable_sequence():
    # sup_x s_1(x, s_{k-1}/6) decreases across k for n_i = 2i+1: at radius
    # s_{k-1}/6 at most one obstacle of level <= k is nearby (separation), and
    # N=1 discounts it, leaving only the summable deeper-level mass.
    from spongelab.measure import ObstacleIndex, sup_n_fold_density
    from spongelab.sponge import contains

    spec = SpongeSpec(d=2, n=(3, 5, 7, 9), K=4)
    index = ObstacleIndex(sponge_obstacles(spec, 4))
    samples = [
        (F(a, 15), F(b, 15))
        for a in range(16)
        for b in range(16)
        if contains(spec, (F(a, 15), F(b, 15)), 2)
    ]
    sups = []
    for k in (2, 3, 4):
        r = scale(spec, k - 1) / 6
        sups.append(sup_n_fold_density(index, samples, r, N=1)[0])
    assert sups[0] > sups[1] > sups[2]


def test_ahlfors_scan_single_sample():
    spec = SpongeSpec(d=2, n=(3, 3), K=2)
    scan = ahlfors_scan(spec, [(0, 0)], [F(1, 2)], depth=2)
    assert scan.c_min == scan.c_max
    assert scan.within_bound


def test_ahlfors_scan_upper_bound_trivial():
    spec = SpongeSpec(d=2, n=(3, 5, 3), K=3)
    samples = [(0, 0), (F(1, 2), 0), (F(1, 15), F(8, 15)), (1, 1)]
    radii = [F(1, 10), F(1, 4), F(1, 2)]
    scan = ahlfors_scan(spec, samples, radii, depth=3)
    assert scan.c_max <= 2**spec.d
    assert scan.c_min > 0
    with pytest.raises(SpongeError):
        ahlfors_scan(spec, [], radii, depth=2)


def test_filling_level_selection():
    spec = SpongeSpec(d=2, n=(3, 3, 3, 3), K=4)
    delta = F(1, 2)
    # (2 sqrt d / delta) = 4 sqrt 2 ~ 5.657; r = 5.657*s_2 picks k=1
    r = F(63, 100)  # between 4*sqrt(2)/9 ~ 0.6285 and 4*sqrt(2)/3 ~ 1.886
    assert select_filling_level(spec, r, delta) == 1
    with pytest.raises(SpongeError):
        select_filling_level(spec, F(10), delta)  # k=0 unavailable
    with pytest.raises(SpongeError):
        select_filling_level(spec, F(1, 10**6), delta)  # beyond truncation


def test_filling_density_obstacle_free_regime():
    # huge factors: deeper stages remove almost nothing, ratio interval near 0
    spec = SpongeSpec(d=2, n=(3, 101, 101), K=3)
    r = F(1, 4)
    check = filling_density_check(spec, r, F(1, 2), F(1, 5), [(0, 0), (1, 0)], refine=1)
    assert check.level == 1
    assert check.worst_ratio.lo == 0 or check.worst_ratio.lo < F(1, 1000)
    assert check.passed


def test_filling_density_reports_worst_witness():
    spec = SpongeSpec(d=2, n=(3, 3, 3), K=3)
    r = F(1, 4)
    check = filling_density_check(spec, r, F(1, 2), F(99, 100), [(0, 0), (F(1, 3), F(2, 3))])
    assert check.witness in {(F(0), F(0)), (F(1, 3), F(2, 3))}
    assert 0 <= check.worst_ratio.lo <= check.worst_ratio.hi <= 1
