import math

import numpy as np
import pytest

from neutral_pressure.bowen import (
    BowenIndex,
    BowenQuery,
    ball_membership,
    ball_sup_sum,
    bowen_distance,
    continuity_modulus,
    potential_sum,
    radius,
    shared_index,
    symbolic_bowen,
    symbolic_threshold,
    within,
)
from neutral_pressure.oracles import forced_cylinder_length
from neutral_pressure.systems import (
    Potential,
    SymbolicPoint,
    circle_maps,
    cylinder_complete,
    full_shift,
    random_sample,
    torus_grid,
)


def test_radius_and_query():
    assert radius(3, 0.5) == pytest.approx(math.exp(-1.5))
    with pytest.raises(ValueError):
        BowenQuery(0, 0.1)
    with pytest.raises(ValueError):
        BowenQuery(2, 0.0)
    q = BowenQuery(2, 1.0, closed=False)
    assert not q.inside(q.radius) and BowenQuery(2, 1.0).inside(q.radius)


def test_bowen_distance_examples():
    assert bowen_distance(circle_maps(2), (0.0,), (0.1,), 2) == pytest.approx(0.2)
    assert bowen_distance(circle_maps(2, 3), (0.0,), (0.1,), 2) == pytest.approx(0.3)
    assert bowen_distance(circle_maps(2), (0.0,), (0.1,), 1) == pytest.approx(0.1)


def test_ball_membership_doubling():
    # d_2(0, 0.4) = max(0.4, 0.2) = 0.4 > e^{-2}
    assert not ball_membership(circle_maps(2), (0.0,), (0.4,), BowenQuery(2, 1.0))


def test_shift_closed_ball_is_a_cylinder():
    shift = full_shift(2, 2)
    n = 4
    q = BowenQuery(n, math.log(2), closed=True)
    Z = cylinder_complete(shift, 2 * n + 1)
    center = Z[0]
    for y in Z:
        agree = y.expand(2 * n - 1) == center.expand(2 * n - 1)
        assert ball_membership(shift, center, y, q) == agree


def test_potential_sum_example():
    f = Potential("affine", 0.0, (1.0,))
    assert potential_sum(circle_maps(2), f, (0.3,), 2) == pytest.approx(0.9)


def test_bowen_distance_is_monotone_in_n():
    sysm = circle_maps(2, 3)
    Z = random_sample(sysm, 20, seed=1)
    for a in Z:
        prev = 0.0
        for n in range(1, 6):
            d = bowen_distance(sysm, Z[0], a, n)
            assert d >= prev
            prev = d


def test_symbolic_bowen_formula():
    assert symbolic_bowen(2, None, 5) == 0.0
    assert symbolic_bowen(2, 3, 5) == 1.0
    assert symbolic_bowen(2, 7, 5) == 2.0**-3
    assert symbolic_bowen(3, 4, 1) == 3.0**-4


def test_within_uses_exact_boundaries():
    shift = full_shift(2, 2)
    for n in range(1, 40):
        r = radius(n, math.log(2))
        assert within(shift, 2.0**-n, r, closed=True)
        assert not within(shift, 2.0**-n, r, closed=False)
        assert within(shift, 2.0**-(n + 1), r, closed=False)


def test_closed_ball_ln2_holds_at_every_depth():
    shift = full_shift(2, 2)
    for n in (3, 11, 17):
        q = BowenQuery(n, math.log(2), closed=True)
        x = SymbolicPoint((), (0,))
        y_in = SymbolicPoint((0,) * (2 * n - 1) + (1,), (0,))
        y_out = SymbolicPoint((0,) * (2 * n - 2) + (1,), (0,))
        assert ball_membership(shift, x, y_in, q)
        assert not ball_membership(shift, x, y_out, q)


@pytest.mark.parametrize("n", range(1, 20))
@pytest.mark.parametrize("eps", [0.05, 0.1, 0.2, math.log(2), 0.5])
@pytest.mark.parametrize("closed", [True, False])
def test_threshold_matches_forced_length(n, eps, closed):
    assert symbolic_threshold(2, n, radius(n, eps), closed) == forced_cylinder_length(n, eps, 2, closed)


@pytest.mark.parametrize("system", [circle_maps(2), circle_maps(2, 3)])
def test_index_matches_scalar_path_on_torus(system):
    Z = torus_grid(system, 64)
    idx = BowenIndex(system, Z, 5)
    f = Potential("affine", 0.1, (1.0,))
    sums = idx.potential_sums(f)
    for i in (0, 7, 33):
        d = idx.dist(i, range(len(Z)), 4)
        for j in range(len(Z)):
            assert d[j] == pytest.approx(bowen_distance(system, Z[i], Z[j], 4), abs=1e-12)
        for n in range(1, 6):
            assert sums[i, n - 1] == pytest.approx(potential_sum(system, f, Z[i], n))


@pytest.mark.parametrize("t", [0.1, 0.3, 0.45, 0.6])
def test_torus_pairs_agree_with_brute_force(t):
    system = circle_maps(2, 3)
    Z = random_sample(system, 150, seed=2)
    idx = BowenIndex(system, Z, 4)
    a, b, d = idx.pairs(4, t)
    got = set(zip(a.tolist(), b.tolist()))
    want = set()
    for i in range(len(Z)):
        dd = idx.dist(i, range(i + 1, len(Z)), 4)
        want.update((i, i + 1 + j) for j in np.flatnonzero(dd <= t).tolist())
    assert got == want
    np.testing.assert_allclose(d, idx.pair_dist(a, b, 4))


@pytest.mark.parametrize("system,Z", [
    (full_shift(2), cylinder_complete(full_shift(2), 10)),
    (circle_maps(2), torus_grid(circle_maps(2), 256)),
])
def test_ball_masses_match_members(system, Z):
    idx = BowenIndex(system, Z, 6)
    w = np.random.default_rng(0).random(len(Z))
    for n, eps in [(3, 0.2), (5, 0.1), (6, 0.3)]:
        t = radius(n, eps)
        masses = idx.ball_masses(n, t, w)
        members = idx.members(n, t)
        for i in range(0, len(Z), 17):
            assert masses[i] == pytest.approx(w[members[i]].sum())
            for j in members[i].tolist():
                assert bowen_distance(system, Z[i], Z[j], n) <= t


def test_symbolic_index_distances():
    shift = full_shift(3, 4)
    Z = random_sample(shift, 40, seed=5, depth=12)
    idx = BowenIndex(shift, Z, 5)
    for i in (0, 11):
        d = idx.dist(i, range(len(Z)), 5)
        for j in range(len(Z)):
            assert d[j] == bowen_distance(shift, Z[i], Z[j], 5)


def test_shared_index_reuse():
    shift = full_shift(2)
    Z = cylinder_complete(shift, 6)
    a = shared_index(shift, Z, 6)
    assert shared_index(shift, Z, 4) is a
    assert shared_index(shift, Z, 8) is not a


def test_ball_sup_sum_dominates_center_value():
    sysm = circle_maps(2)
    Z = torus_grid(sysm, 64)
    f = Potential("affine", 0.0, (1.0,))
    q = BowenQuery(2, 0.5)
    for x in Z[:10]:
        assert ball_sup_sum(sysm, f, x, q, Z) >= potential_sum(sysm, f, x, 2)


def test_continuity_modulus():
    shift = full_shift(2)
    Z = cylinder_complete(shift, 6)
    g = Potential("first_symbol", table=(0.0, 1.0))
    # 2r < 1 forces agreement on the first symbol
    assert continuity_modulus(shift, g, 3, 0.3, Z) == 0.0
    assert continuity_modulus(shift, g, 1, 0.01, Z) == 1.0
    sysm = circle_maps(2)
    grid = torus_grid(sysm, 200)
    f = Potential("affine", 0.0, (0.5,))
    # the affine potential jumps by |coeff| across the seam at 0
    assert continuity_modulus(sysm, f, 3, 0.3, grid) == pytest.approx(0.5 * (1 - 1 / 200))
    with pytest.raises(ValueError):
        continuity_modulus(sysm, f, 3, 0.3, grid, budget=0)


def test_unresolved_symbolic_points_raise():
    shift = full_shift(2)
    with pytest.raises(Exception):
        bowen_distance(shift, SymbolicPoint((0, 1), ()), SymbolicPoint((0, 1, 1), ()), 2)
