"""Geometry, parity, enumeration, and counting-bound tests.

Pinned constants come from tests/oracles/gen_small_oracles.py, which
recomputes everything from raw arrays without importing this package.
"""

import math

import numpy as np
import pytest

from plaquette.lattice import (
    FIXED,
    PERIODIC,
    PLUS,
    BudgetExceededError,
    LatticeSpec,
    Rectangle,
    SpinConfig,
    count_by_defect_number,
    critical_length,
    defect_count,
    defect_map,
    defect_pattern_count_bound,
    enumerate_configs,
    ground_states,
    hamiltonian,
    invert_defects,
    parity_check,
    reading_order_key,
    relative_weight,
)

HIST_L2_PLUS = {0: 1, 4: 9, 6: 6}
HIST_L3_PLUS = {0: 1, 4: 36, 6: 96, 8: 246, 10: 96, 12: 36, 16: 1}
HIST_TORUS3 = {0: 32, 4: 288, 6: 192}


def random_config(spec, rng):
    bits = rng.integers(0, 2, size=(spec.side, spec.side))
    return SpinConfig._from_frozen(spec, (1 - 2 * bits).astype(np.int8))


def test_single_flip_defect_block():
    spec = LatticeSpec(2, PLUS)
    cfg = SpinConfig.all_plus(spec).flip([(1, 1)])
    assert set(defect_map(cfg).defects()) == {(0, 0), (1, 0), (0, 1), (1, 1)}


def test_overlapping_flips_cancel():
    # blocks of (1,1) and (2,2) share plaquette (1,1), toggled twice
    spec = LatticeSpec(2, PLUS)
    cfg = SpinConfig.all_plus(spec).flip([(1, 1), (2, 2)])
    assert set(defect_map(cfg).defects()) == {
        (0, 0), (1, 0), (0, 1), (2, 1), (1, 2), (2, 2),
    }


def test_periodic_flip_wraps():
    spec = LatticeSpec(3, PERIODIC)
    cfg = SpinConfig.all_plus(spec).flip([(0, 0)])
    assert set(defect_map(cfg).defects()) == {(0, 0), (2, 0), (0, 2), (2, 2)}


def test_reading_order():
    spec = LatticeSpec(2, PLUS)
    assert sorted(spec.sites(), key=reading_order_key) == [
        (1, 2), (2, 2), (1, 1), (2, 1),
    ]


def test_text_roundtrip_orientation():
    spec = LatticeSpec(2, PLUS)
    cfg = SpinConfig.all_plus(spec).flip([(1, 1)])
    assert cfg.to_text() == "++\n-+"
    assert SpinConfig.from_text(spec, cfg.to_text()) == cfg


def test_text_roundtrip_random():
    rng = np.random.default_rng(0)
    for spec in (LatticeSpec(4, PLUS), LatticeSpec(4, PERIODIC)):
        for _ in range(25):
            cfg = random_config(spec, rng)
            assert SpinConfig.from_text(spec, cfg.to_text()) == cfg


def test_hamiltonian_and_weight():
    spec = LatticeSpec(3, PLUS)
    cfg = SpinConfig.all_plus(spec)
    n_plaq = 16
    assert hamiltonian(cfg) == -n_plaq / 2.0
    rng = np.random.default_rng(1)
    for _ in range(20):
        cfg = random_config(spec, rng)
        n = defect_count(cfg)
        assert hamiltonian(cfg) == -n_plaq / 2.0 + n
        assert relative_weight(cfg, 1.3) == pytest.approx(math.exp(-1.3 * n), rel=1e-12)


def test_parity_holds_on_every_reachable_pattern():
    for spec in (LatticeSpec(2, PLUS), LatticeSpec(2, PERIODIC)):
        for cfg in enumerate_configs(spec):
            assert parity_check(spec, defect_map(cfg))


def test_parity_rejects_single_defect():
    spec = LatticeSpec(2, PLUS)
    p = np.ones((3, 3), dtype=np.int8)
    p[1, 1] = -1
    assert not parity_check(spec, p)


def test_parity_respects_fixed_frame():
    # a frame with one minus spin flips the sign targets of two rows/cols
    theta = np.ones((4, 4), dtype=np.int8)
    theta[0, 1] = -1
    spec = LatticeSpec(2, FIXED, theta=theta)
    cfg = SpinConfig.all_plus(spec)
    d = defect_map(cfg)
    assert d.count == 2
    assert parity_check(spec, d)


def test_invert_defects_bijection_L3():
    spec = LatticeSpec(3, PLUS)
    seen = set()
    for cfg in enumerate_configs(spec):
        d = defect_map(cfg)
        assert invert_defects(spec, d) == cfg
        seen.add(d.plaq.tobytes())
    assert len(seen) == 512


def test_invert_defects_periodic_fibre():
    spec = LatticeSpec(3, PERIODIC)
    zero = np.ones((3, 3), dtype=np.int8)
    found = set()
    for a in range(4):
        col0 = np.array([1, 1 - 2 * (a & 1), 1 - 2 * ((a >> 1) & 1)], dtype=np.int8)
        for b in range(4):
            row0 = np.array([1, 1 - 2 * (b & 1), 1 - 2 * ((b >> 1) & 1)], dtype=np.int8)
            cfg = invert_defects(spec, zero, anchor=(col0, row0))
            assert defect_map(cfg).count == 0
            found.add(cfg.spins.tobytes())
    # anchors with spin (0,0) pinned to +1 give half the ground manifold
    assert len(found) == 16
    assert found <= {g.spins.tobytes() for g in ground_states(spec)}


def test_invert_defects_rejects_bad_parity():
    spec = LatticeSpec(2, PLUS)
    p = np.ones((3, 3), dtype=np.int8)
    p[0, 0] = -1
    with pytest.raises(ValueError):
        invert_defects(spec, p)


def test_defect_histograms_pinned():
    assert count_by_defect_number(LatticeSpec(2, PLUS)) == HIST_L2_PLUS
    assert count_by_defect_number(LatticeSpec(3, PLUS)) == HIST_L3_PLUS
    assert count_by_defect_number(LatticeSpec(3, PERIODIC)) == HIST_TORUS3


def test_no_two_defect_states():
    assert count_by_defect_number(LatticeSpec(3, PLUS)).get(2, 0) == 0
    assert count_by_defect_number(LatticeSpec(4, PLUS)).get(2, 0) == 0
    assert count_by_defect_number(LatticeSpec(3, PERIODIC)).get(2, 0) == 0


def test_four_defect_states_are_rectangles():
    spec = LatticeSpec(3, PLUS)
    for cfg in enumerate_configs(spec):
        d = defect_map(cfg)
        if d.count != 4:
            continue
        pts = d.defects()
        cols = sorted({x for x, _ in pts})
        rows = sorted({y for _, y in pts})
        assert len(cols) == 2 and len(rows) == 2
        assert set(pts) == {(c, r) for c in cols for r in rows}


def test_counting_bound_formula():
    spec = LatticeSpec(3, PLUS)
    hist = count_by_defect_number(spec)
    for n, cnt in hist.items():
        if n:
            assert cnt <= defect_pattern_count_bound(spec, n)
    with pytest.raises(ValueError):
        defect_pattern_count_bound(spec, 3)


def test_counting_bound_periodic_prefix():
    spec = LatticeSpec(3, PERIODIC)
    hist = count_by_defect_number(spec)
    assert defect_pattern_count_bound(spec, 0) == 2.0 ** 5
    for n, cnt in hist.items():
        assert cnt <= defect_pattern_count_bound(spec, n)


def test_ground_states_counts():
    assert len(ground_states(LatticeSpec(3, PLUS))) == 1
    assert len(ground_states(LatticeSpec(2, PERIODIC))) == 8
    assert len(ground_states(LatticeSpec(3, PERIODIC))) == 32
    assert len(ground_states(LatticeSpec(4, PERIODIC))) == 128


def test_ground_states_are_rank_one():
    for g in ground_states(LatticeSpec(3, PERIODIC)):
        s = g.spins
        assert defect_map(g).count == 0
        assert np.array_equal(np.outer(s[:, 0] * s[0, 0], s[0, :]), s)


def test_critical_length_values():
    assert critical_length(0.0) == 1
    assert critical_length(2.0) == 2
    assert critical_length(2.2) == 3
    assert critical_length(3.0) == 4
    assert critical_length(3.5) == 5


def test_rectangle_corners_and_block():
    R = Rectangle.from_corners(1, 3, 0, 2)
    assert R.corners == ((1, 0), (3, 0), (1, 2), (3, 2))
    assert R.flip_sites() == [
        (2, 1), (2, 2), (3, 1), (3, 2),
    ]
    with pytest.raises(ValueError):
        Rectangle.from_corners(3, 1, 0, 2)


def test_rectangle_sort_key_order():
    # ordered by top row first, then left column, bottom row, right column
    a = Rectangle.from_corners(0, 1, 0, 2)
    b = Rectangle.from_corners(0, 1, 0, 3)
    c = Rectangle.from_corners(1, 2, 0, 2)
    assert sorted([c, b, a]) == [a, c, b]


def test_flip_rectangle_block_toggles_corners():
    rng = np.random.default_rng(5)
    spec = LatticeSpec(5, PLUS)
    for _ in range(40):
        cfg = random_config(spec, rng)
        x1, y1 = rng.integers(0, 4, size=2)
        x2 = int(rng.integers(x1 + 1, 6))
        y2 = int(rng.integers(y1 + 1, 6))
        R = Rectangle.from_corners(int(x1), x2, int(y1), y2)
        before = set(defect_map(cfg).defects())
        after = set(defect_map(cfg.flip(R.flip_sites())).defects())
        assert after == before.symmetric_difference(R.corners)


def test_enumeration_budget():
    with pytest.raises(BudgetExceededError):
        count_by_defect_number(LatticeSpec(3, PLUS), budget=100)


def test_site_bounds_checked():
    spec = LatticeSpec(3, PLUS)
    cfg = SpinConfig.all_plus(spec)
    with pytest.raises(ValueError):
        cfg.flip([(0, 1)])
    with pytest.raises(ValueError):
        cfg.flip([(1, 4)])
    per = SpinConfig.all_plus(LatticeSpec(3, PERIODIC))
    with pytest.raises(ValueError):
        per.flip([(3, 0)])
