from fractions import Fraction
from itertools import combinations, product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spongelab.sponge import (
    BoxQ,
    SpongeError,
    SpongeSpec,
    TileId,
    all_removed_boxes,
    contains,
    iter_live_tiles,
    live_tile_count,
    min_separation,
    min_separation_witness,
    removed_boxes,
    scale,
    tile_is_live,
)

F = Fraction


def brute_force_min_separation(spec, depth):
    """Independent oracle: pairwise box distances via Fractions, no scaling tricks."""
    boxes = all_removed_boxes(spec, depth)
    best = None
    for a, b in combinations(boxes, 2):
        d2 = a.dist2_to_box(b)
        if best is None or d2 < best:
            best = d2
    for b in boxes:
        d2 = b.dist_to_unit_boundary() ** 2
        if d2 < best:
            best = d2
    return best


def test_spec_validation():
    with pytest.raises(SpongeError):
        SpongeSpec(d=1, n=(3,), K=1)
    with pytest.raises(SpongeError):
        SpongeSpec(d=2, n=(4,), K=1)  # even factor
    with pytest.raises(SpongeError):
        SpongeSpec(d=2, n=(3,), K=2)  # K beyond sequence
    SpongeSpec(d=2, n=(3, 5), K=2)


def test_spec_json_roundtrip():
    spec = SpongeSpec(d=3, n=(3, 5, 7), K=2)
    assert SpongeSpec.from_json(spec.to_json()) == spec


def test_scale_exact_values():
    spec = SpongeSpec(d=2, n=(3, 3, 3), K=3)
    assert scale(spec, 0) == 1
    assert scale(spec, 3) == F(1, 27)
    spec2 = SpongeSpec(d=2, n=(3, 5), K=2)
    assert scale(spec2, 2) == F(1, 15)
    with pytest.raises(SpongeError):
        scale(spec2, 3)


def test_removed_boxes_first_stage():
    spec = SpongeSpec(d=2, n=(3,), K=1)
    boxes = removed_boxes(spec, 1)
    assert boxes == [BoxQ(lo=(F(1, 3), F(1, 3)), hi=(F(2, 3), F(2, 3)))]

    spec3 = SpongeSpec(d=3, n=(5,), K=1)
    (box,) = removed_boxes(spec3, 1)
    assert box == BoxQ(lo=(F(2, 5),) * 3, hi=(F(3, 5),) * 3)

    with pytest.raises(SpongeError):
        removed_boxes(spec, 0)


def test_removed_boxes_second_stage_enumeration():
    spec = SpongeSpec(d=2, n=(3, 3), K=2)
    boxes = removed_boxes(spec, 2)
    assert len(boxes) == 8
    # one per surviving level-1 tile; the tile at [0,1/3]^2 contributes [1/9,2/9]^2
    assert BoxQ(lo=(F(1, 9), F(1, 9)), hi=(F(2, 9), F(2, 9))) in boxes
    # all centered inside distinct live level-1 tiles
    level1 = {t.coords for t in iter_live_tiles(spec, 1)}
    parents = set()
    for b in boxes:
        parent = tuple(int(v * 3) for v in b.lo)
        parents.add(parent)
        assert parent in level1
    assert len(parents) == 8


def test_removed_boxes_pairwise_disjoint():
    for spec in (SpongeSpec(d=2, n=(3, 3, 3), K=3), SpongeSpec(d=3, n=(3, 3), K=2)):
        boxes = all_removed_boxes(spec, spec.K)
        for a, b in combinations(boxes, 2):
            assert a.dist2_to_box(b) > 0


def test_contains_basic():
    spec = SpongeSpec(d=2, n=(3,), K=1)
    assert not contains(spec, (F(1, 2), F(1, 2)), 1)  # center of removed square
    assert contains(spec, (0, 0), 1)  # corner never removed
    assert contains(spec, (F(1, 3), F(1, 2)), 1)  # boundary of removed box
    with pytest.raises(SpongeError):
        contains(spec, (2, 0), 1)


def test_contains_monotone_in_depth():
    spec = SpongeSpec(d=2, n=(3, 5, 3), K=3)
    pts = [
        (F(a, 45), F(b, 45)) for a in range(0, 46, 5) for b in range(0, 46, 5)
    ] + [(F(7, 45), F(22, 45)), (F(22, 45), F(22, 45)), (F(1, 7), F(2, 7))]
    for p in pts:
        for k in range(spec.K):
            if contains(spec, p, k + 1):
                assert contains(spec, p, k)


@given(
    a=st.integers(min_value=0, max_value=45),
    b=st.integers(min_value=0, max_value=45),
    q=st.integers(min_value=46, max_value=200),
)
@settings(max_examples=60, deadline=None)
def test_contains_monotone_property(a, b, q):
    spec = SpongeSpec(d=2, n=(3, 5, 3), K=3)
    p = (F(a, q), F(b, q))
    results = [contains(spec, p, k) for k in range(spec.K + 1)]
    # once excluded, stays excluded at deeper truncation
    for earlier, later in zip(results, results[1:]):
        assert earlier or not later


def test_live_tile_count_matches_enumeration():
    cases = [
        (SpongeSpec(d=2, n=(3, 3), K=2), 2, 64),
        (SpongeSpec(d=2, n=(3,), K=1), 0, 1),
        (SpongeSpec(d=3, n=(3,), K=1), 1, 26),
        (SpongeSpec(d=2, n=(3, 5), K=2), 2, 8 * 24),
    ]
    for spec, depth, expected in cases:
        assert live_tile_count(spec, depth) == expected
        tiles = list(iter_live_tiles(spec, depth))
        assert len(tiles) == expected
        assert len({t.coords for t in tiles}) == expected
        assert all(tile_is_live(spec, t) for t in tiles)


def test_tile_is_live_rejects_removed():
    spec = SpongeSpec(d=2, n=(3, 3), K=2)
    assert not tile_is_live(spec, TileId(1, (1, 1)))
    assert not tile_is_live(spec, TileId(2, (1, 1)))  # central child of corner tile
    assert not tile_is_live(spec, TileId(2, (4, 4)))  # inside the removed level-1 box
    assert tile_is_live(spec, TileId(2, (4, 0)))
    assert tile_is_live(spec, TileId(2, (0, 0)))


def test_min_separation_values():
    spec = SpongeSpec(d=2, n=(3,), K=1)
    assert min_separation(spec, 1) == F(1, 3)

    spec2 = SpongeSpec(d=2, n=(3, 3), K=2)
    w = min_separation_witness(spec2, 2)
    assert w.dist == F(1, 9)
    # equality s_1/3 is attained, e.g. between this level-2 box and the level-1 box
    a = BoxQ(lo=(F(1, 9), F(4, 9)), hi=(F(2, 9), F(5, 9)))
    b = BoxQ(lo=(F(1, 3), F(1, 3)), hi=(F(2, 3), F(2, 3)))
    assert a in all_removed_boxes(spec2, 2) and b in all_removed_boxes(spec2, 2)
    assert a.dist2_to_box(b) == F(1, 81)


def test_min_separation_matches_brute_force():
    for spec, depth in [
        (SpongeSpec(d=2, n=(3, 5), K=2), 2),
        (SpongeSpec(d=3, n=(3, 3), K=2), 2),
        (SpongeSpec(d=2, n=(5, 3, 3), K=3), 3),
    ]:
        w = min_separation_witness(spec, depth)
        assert w.dist2 == brute_force_min_separation(spec, depth)


def test_min_separation_lower_bound_exact():
    # guaranteed >= s_{depth-1}/3, exhaustively for small specs in d=2,3
    specs = [
        SpongeSpec(d=2, n=(3, 3, 3, 3), K=4),
        SpongeSpec(d=2, n=(3, 5, 7, 3), K=4),
        SpongeSpec(d=3, n=(3, 3), K=2),
        SpongeSpec(d=3, n=(5, 3), K=2),
    ]
    for spec in specs:
        for depth in range(1, spec.K + 1):
            w = min_separation_witness(spec, depth)
            bound = scale(spec, depth - 1) / 3
            assert w.dist2 >= bound * bound


def test_tile_box_and_center():
    spec = SpongeSpec(d=2, n=(3, 3), K=2)
    t = TileId(2, (4, 7))
    assert t.box(spec) == BoxQ(lo=(F(4, 9), F(7, 9)), hi=(F(5, 9), F(8, 9)))
    assert t.center(spec) == (F(1, 2), F(15, 18))
