import math

import numpy as np
import pytest

from neutral_pressure.oracles import ShiftOracleSpec, forced_cylinder_length, shift_oracle_alpha
from neutral_pressure.packing import (
    CandidatePool,
    PackedBall,
    PackingCollection,
    critical_exponent,
    disjoint_test,
    exhaustive_packing,
    greedy_packing,
    outer_estimate,
    partition_cover,
    premeasure_estimate,
    pressure_report,
    triangle_margin,
    trim_packing_sum,
    verify_collection,
)
from neutral_pressure.systems import (
    Potential,
    SampleSet,
    SymbolicPoint,
    circle_maps,
    cylinder_complete,
    full_shift,
    random_sample,
    torus_grid,
)

ZERO = Potential("constant", 0.0)


def ball(center, depth=1, eps=1.0, fsum=0.0, k=1):
    words = depth if k == 1 else (k**depth - 1) // (k - 1)
    return PackedBall(center, depth, eps, fsum, words)


def test_disjoint_test_examples():
    d = circle_maps(2)
    assert not disjoint_test(d, ball((0.0,)), ball((0.5,)))
    assert not disjoint_test(d, ball((0.3,), 1), ball((0.3,), 4))
    with pytest.raises(ValueError):
        disjoint_test(d, ball((0.0,)), ball((0.5,)), mode="vibes")
    with pytest.raises(ValueError):
        disjoint_test(d, ball((0.0,)), ball((0.5,)), mode="shared-sample")


def test_distinct_forced_cylinders_are_disjoint_in_both_modes():
    shift = full_shift(2)
    n, eps = 4, 0.2
    L = forced_cylinder_length(n, eps)
    Z = cylinder_complete(shift, L)
    for a, b in [(0, 1), (3, 9), (0, len(Z) - 1)]:
        A, B = ball(Z[a], n, eps), ball(Z[b], n, eps)
        assert disjoint_test(shift, A, B, "triangle")
        assert disjoint_test(shift, A, B, "shared-sample", Z)
        assert triangle_margin(shift, A, B) > 0


def test_triangle_is_stricter_than_shared_sample_on_torus():
    sysm = circle_maps(2)
    Z = torus_grid(sysm, 64)
    rng = np.random.default_rng(1)
    for _ in range(200):
        i, j = rng.integers(0, 64, 2)
        A, B = ball(Z[int(i)], 2, 0.6), ball(Z[int(j)], 3, 0.6)
        if disjoint_test(sysm, A, B, "triangle"):
            assert disjoint_test(sysm, A, B, "shared-sample", Z)


def chain_instance():
    sysm = circle_maps(2)
    table = (math.log(2), math.log(3), math.log(2), 0.0, 0.0)
    f = Potential("tabulated", table=table)
    Z = SampleSet(((0.0,), (0.2,), (0.4,)), "chain")
    eps = -math.log(0.15)  # r = 0.15: neighbours clash, the ends do not
    return sysm, Z, f, eps


def test_greedy_versus_exhaustive_on_a_chain():
    sysm, Z, f, eps = chain_instance()
    greedy = greedy_packing(sysm, Z, 1, 1, eps, 0.0, f)
    assert greedy.total == pytest.approx(3.0)
    pool = CandidatePool(sysm, Z, 1, 1, eps, f)
    best = exhaustive_packing(sysm, pool.balls(), 0.0)
    assert best.total == pytest.approx(4.0)
    assert premeasure_estimate(sysm, Z, 1, eps, 0.0, f, strategy="exact") == pytest.approx(4.0)
    assert verify_collection(sysm, greedy) and verify_collection(sysm, best)


def test_singleton_sample():
    sysm = circle_maps(2, 3)
    Z = SampleSet(((0.25,),), "one")
    n, alpha = 3, 0.4
    coll = greedy_packing(sysm, Z, n, 5, 0.3, alpha, ZERO)
    assert len(coll) == 1 and coll.balls[0].depth == n
    assert coll.total == pytest.approx(math.exp(-alpha * 7))
    res = critical_exponent(sysm, Z, n, 5, 0.3, ZERO)
    assert abs(res.alpha) <= res.tol


@pytest.mark.parametrize("n,eps", [(4, 0.2), (6, 0.1), (5, 0.3)])
def test_forced_depth_cylinders_all_admitted(n, eps):
    shift = full_shift(2)
    L = forced_cylinder_length(n, eps)
    Z = cylinder_complete(shift, L)
    alpha = 0.7
    coll = greedy_packing(shift, Z, n, n, eps, alpha, ZERO)
    assert len(coll) == 2**L
    assert coll.total == pytest.approx(2**L * math.exp(-alpha * n))
    for mode in ("triangle", "shared-sample"):
        assert premeasure_estimate(shift, Z, n, eps, alpha, ZERO, mode=mode) == pytest.approx(coll.total)


@pytest.mark.parametrize("n", [3, 5, 8])
@pytest.mark.parametrize("eps", [0.05, 0.2])
def test_critical_exponent_matches_shift_oracle(n, eps):
    shift = full_shift(2)
    Z = cylinder_complete(shift, forced_cylinder_length(n, eps))
    res = critical_exponent(shift, Z, n, n, eps, ZERO)
    assert res.alpha == pytest.approx(shift_oracle_alpha(ShiftOracleSpec(2, 2, 1, (0.0, 0.0), eps, n)),
                                      abs=1e-9)
    assert res.lo <= res.alpha <= res.hi
    assert res.hi - res.lo <= res.tol


def test_critical_exponent_first_symbol_potential():
    shift = full_shift(3, 2)
    n, eps, table = 4, 0.2, (0.0, 0.5, -0.3)
    Z = cylinder_complete(shift, forced_cylinder_length(n, eps))
    res = critical_exponent(shift, Z, n, n, eps, Potential("first_symbol", table=table))
    want = shift_oracle_alpha(ShiftOracleSpec(3, 2, 1, table, eps, n))
    assert res.alpha == pytest.approx(want, abs=1e-9)


def test_critical_exponent_is_monotone_in_the_sample():
    sysm = circle_maps(2, 3)
    big = random_sample(sysm, 80, seed=3)
    small = big.subset(range(40))
    a = critical_exponent(sysm, small, 3, 4, 0.3, ZERO).alpha
    b = critical_exponent(sysm, big, 3, 4, 0.3, ZERO).alpha
    assert a <= b + 2e-6


def test_greedy_and_exact_agree_on_small_cylinder_pools():
    shift = full_shift(2)
    Z = cylinder_complete(shift, 4)
    for alpha in (0.1, 0.5, 1.0):
        pool = CandidatePool(shift, Z, 2, 2, 0.3, Potential("first_symbol", table=(0.0, 0.4)))
        g = math.fsum(np.exp(pool.exponents(alpha)[pool.greedy(alpha)]))
        e = math.fsum(np.exp(pool.exponents(alpha)[pool.exact(alpha)]))
        assert g == pytest.approx(e)


def test_exact_respects_the_cap():
    sysm = circle_maps(2)
    pool = CandidatePool(sysm, torus_grid(sysm, 32), 1, 1, 0.5, ZERO)
    with pytest.raises(ValueError):
        pool.exact(0.1)


def test_outer_estimate_never_exceeds_premeasure():
    shift = full_shift(2)
    Z = cylinder_complete(shift, 6)
    details = {}
    outer = outer_estimate(shift, Z, 3, 0.2, 0.5, ZERO, details=details)
    assert outer <= premeasure_estimate(shift, Z, 3, 0.2, 0.5, ZERO) + 1e-12
    assert set(details) >= {"trivial", "partition:1"}
    blocks = partition_cover(shift, Z, 1)
    assert sum(len(b) for b in blocks) == len(Z)


def test_trim_examples():
    coll = PackingCollection(tuple(ball((x,), fsum=math.log(0.4)) for x in (0.1, 0.4, 0.7)),
                             "triangle", 0.0, 1.0)
    kept = trim_packing_sum(coll, 0.0, (0.5, 1.0))
    assert kept.total == pytest.approx(0.8)
    with pytest.raises(ValueError):
        trim_packing_sum(coll, 0.0, (0.5, 0.8))
    with pytest.raises(ValueError):
        trim_packing_sum(coll, 0.0, (1.5, 1.9))


def test_pressure_report_shape_and_validation():
    shift = full_shift(2)
    Z = lambda n, eps: cylinder_complete(shift, forced_cylinder_length(n, eps))
    rep = pressure_report(shift, Z, ZERO, [0.2, 0.1], [4, 6])
    assert len(rep.rows) == 4 and rep.fit["n"] == 6
    assert not rep.monotonicity_violations
    assert all(c["replayed"] in (True, None) for c in rep.certificates)
    with pytest.raises(ValueError):
        pressure_report(shift, Z, ZERO, [0.1, 0.2], [4])


def test_symbolic_collection_replay():
    shift = full_shift(2)
    Z = random_sample(shift, 30, seed=2, depth=16)
    coll = greedy_packing(shift, Z, 3, 5, 0.15, 0.4, Potential("first_symbol", table=(0.0, 0.3)))
    assert verify_collection(shift, coll)
    assert all(isinstance(b.center, SymbolicPoint) for b in coll.balls)
