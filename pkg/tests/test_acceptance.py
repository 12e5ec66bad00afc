"""Acceptance criteria, one test per criterion.

Each test prints a single ``ACCEPTANCE <id> PASS|FAIL: <detail>`` line; the
lines are collected again in the terminal summary (see ``conftest.py``).
Run directly with ``python3 tests/test_acceptance.py`` for the lines alone.
"""
from __future__ import annotations

import json
import math
import time

import pytest

from neutral_pressure.cli import run as cli_run
from neutral_pressure.harness import (
    five_r_suite,
    packing_pool_suite,
    property_suite,
    shift_cylinder_sample,
    vp_experiment,
    window_range,
)
from neutral_pressure.measures import (
    bernoulli_cylinder,
    cylinder_uniform,
    integrated_pressure,
    katok_pressure,
    uniform,
)
from neutral_pressure.oracles import (
    ShiftOracleSpec,
    forced_cylinder_length,
    multi_generator_identical_shift_alpha,
    shift_oracle_alpha,
)
from neutral_pressure.packing import critical_exponent, linear_fit
from neutral_pressure.systems import (
    Potential,
    build_system,
    circle_maps,
    cylinder_complete,
    full_shift,
    torus_grid,
)

RESULTS: dict[str, tuple[bool, str]] = {}
ZERO = Potential("constant", 0.0)
TOL = 1e-6


def report(cid: str, ok: bool, detail: str) -> None:
    RESULTS[cid] = (ok, detail)
    print(f"ACCEPTANCE {cid} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def forced_Z(system, n, eps):
    return cylinder_complete(system, forced_cylinder_length(n, eps, system.metric_base))


def shift_alpha(n, eps, table=(0.0, 0.0), m=2, b=2):
    system = full_shift(m, b)
    f = ZERO if not any(table) else Potential("first_symbol", table=table)
    return critical_exponent(system, forced_Z(system, n, eps), n, n, eps, f, tol=TOL).alpha


EPS_FIT = [0.3, 0.25, 0.2, 0.15, 0.1, 0.05]


def test_1_shift_oracle_match():
    start = time.perf_counter()
    worst = 0.0
    for n in range(6, 13):
        for eps in (0.05, 0.1, 0.2):
            want = shift_oracle_alpha(ShiftOracleSpec(2, 2, 1, (0.0, 0.0), eps, n))
            worst = max(worst, abs(shift_alpha(n, eps) - want))
    elapsed = time.perf_counter() - start
    report("1", worst <= 2e-3 and elapsed < 60,
           f"max |alpha - oracle| = {worst:.2e} over 21 cells (tol 2e-3), {elapsed:.1f}s (< 60s)")


def test_2_eps_intercept():
    vals = [shift_alpha(12, e) for e in EPS_FIT]
    fit = linear_fit(EPS_FIT, vals)
    ok = abs(fit["intercept"] - math.log(2)) <= 0.02 and abs(fit["slope"] - 1) <= 0.05
    report("2", ok, f"intercept {fit['intercept']:.4f} vs ln2 {math.log(2):.4f} (tol 0.02), "
                    f"slope {fit['slope']:.4f} vs 1 (tol 0.05)")


@pytest.mark.parametrize("c", [0.5, 1.0])
def test_3_potential_pressure(c):
    vals = [shift_alpha(12, e, (0.0, c)) for e in EPS_FIT]
    fit = linear_fit(EPS_FIT, vals)
    want = math.log(1 + math.exp(c))
    report(f"3[c={c}]", abs(fit["intercept"] - want) <= 0.03,
           f"intercept {fit['intercept']:.4f} vs ln(1+e^c) {want:.4f} (tol 0.03)")


def test_4_vp_tightness_fixed_eps():
    shift = full_shift(2)
    worst, cells = 0.0, 0
    for n in range(6, 13):
        for eps in (0.05, 0.1, 0.2):
            Z = forced_Z(shift, n, eps)
            mu = cylinder_uniform(shift, forced_cylinder_length(n, eps))
            alpha = critical_exponent(shift, Z, n, n, eps, ZERO, tol=TOL).alpha
            ip = integrated_pressure(shift, mu, Z, ZERO, eps, [n], window=1)
            worst = max(worst, abs(alpha - ip))
            cells += 1
    report("4", worst <= 1e-10, f"max |alpha - integrated| = {worst:.2e} over {cells} cells (tol 1e-10)")


def _lower_cells(system, Z, eps_grid, n=12):
    rep = vp_experiment(system, Z, ZERO, eps_grid, n=n, katok=False)
    cells, bad = 0, []
    for r in rep.rows:
        for name, v in r["candidates"].items():
            cells += 1
            if v > r["alpha"] + 0.05:
                bad.append((system.name, name, r["eps"], v, r["alpha"]))
    return cells, bad


def test_5_lower_bound_direction():
    shift2 = full_shift(2)
    shift3 = full_shift(3)
    doubling = circle_maps(2)
    pair = circle_maps(2, 3)
    runs = [
        (shift2, shift_cylinder_sample(shift2, 12), [0.2, 0.15, 0.1, 0.05]),
        (shift3, shift_cylinder_sample(shift3, 12), [0.05]),
        (doubling, torus_grid(doubling, 2**16), [0.25, 0.2]),
        (pair, torus_grid(pair, 1024), [0.3, 0.2, 0.15]),
    ]
    cells, bad = 0, []
    for system, Z, grid in runs:
        c, b = _lower_cells(system, Z, grid)
        cells += c
        bad += b
    report("5", cells >= 50 and not bad,
           f"{len(bad)} violations of integrated <= alpha + 0.05 over {cells} cells (need >= 50)")


def test_6_katok_direction():
    n, delta = 12, 0.1
    cells, bad = 0, []
    for b in (2, 4):
        shift = full_shift(2, b)
        for eps in (0.1, 0.075):
            e2 = 2 * eps
            L = forced_cylinder_length(n, e2, b)
            Z = cylinder_complete(shift, L)
            # atoms at the forced depth, so every measure resolves the balls
            measures = [uniform(Z.points, "uniform-on-Z")]
            measures += [bernoulli_cylinder(shift, L, p)
                         for p in ((0.3, 0.7), (0.7, 0.3), (0.2, 0.8), (0.4, 0.6))]
            for table in ((0.0, 0.0), (0.0, 0.5), (0.0, 1.0)):
                f = ZERO if not any(table) else Potential("first_symbol", table=table)
                ns = window_range(n, 5)
                for mu in measures:
                    ip = integrated_pressure(shift, mu, Z, f, e2, ns, window=5)
                    kat = katok_pressure(shift, mu, e2, delta, f, n, n_range=ns, tol=TOL).alpha
                    cells += 1
                    if ip > kat + 0.1:
                        bad.append((b, eps, table, mu.name, ip, kat))
    report("6", cells >= 20 and not bad,
           f"{len(bad)} violations of integrated(2eps) <= katok(2eps, 0.1) + 0.1 over {cells} cells")


def test_7_constant_shift():
    cases = [
        (full_shift(2), cylinder_complete(full_shift(2), 10),
         Potential("first_symbol", table=(0.0, 0.7)), (0.3, 0.1)),
        (full_shift(3), cylinder_complete(full_shift(3), 7),
         Potential("first_symbol", table=(0.2, -0.4, 0.9)), (0.3, 0.1)),
        (circle_maps(2), torus_grid(circle_maps(2), 2048), Potential("affine", 0.1, (0.8,)), (0.4, 0.25)),
        (circle_maps(2, 3), torus_grid(circle_maps(2, 3), 512), Potential("affine", 0.0, (-0.5,)),
         (0.4, 0.25)),
    ]
    worst, cells = 0.0, 0
    for system, Z, f, grid in cases:
        n = 6 if system.k == 1 else 4
        for eps in grid:
            base = critical_exponent(system, Z, n, n + 2, eps, f, tol=TOL).alpha
            for c in (0.5, -1.3, 2.0):
                moved = critical_exponent(system, Z, n, n + 2, eps, f.shifted(c), tol=TOL).alpha
                worst = max(worst, abs(moved - base - c))
                cells += 1
    report("7", worst <= 2 * TOL, f"max |shift error| = {worst:.2e} over {cells} cells (tol {2 * TOL:.0e})")


def test_8_packing_soundness():
    res = packing_pool_suite(seed=20260, count=200)
    bad = sum(v["violations"] for v in res.values())
    detail = ", ".join(f"{k} {v['checked'] - v['violations']}/{v['checked']}" for k, v in res.items())
    report("8", bad == 0 and res["soundness"]["checked"] == 200, detail)


def test_9_five_r_lemma():
    res = five_r_suite(seed=20261, count=200)
    bad = sum(v["violations"] for v in res.values())
    detail = ", ".join(f"{k} {v['checked'] - v['violations']}/{v['checked']}" for k, v in res.items())
    report("9", bad == 0 and res["disjoint"]["checked"] == 200, detail)


def test_10_structural_properties():
    res = property_suite(seed=20262, budget=20)
    bad = {k: v["violations"] for k, v in res.items() if v["violations"]}
    checked = sum(v["checked"] for v in res.values())
    report("10", not bad, f"{checked} checks across {len(res)} invariants, violations: {bad or 0}")


def test_11_identical_generators():
    system = build_system({"space": {"kind": "symbolic", "alphabet": 2, "metric_base": 2},
                           "generators": ["shift", "shift"]})
    worst, monotone = 0.0, True
    for eps in (0.1, 0.2):
        prev = math.inf
        for n in range(4, 9):
            Z = forced_Z(system, n, eps)
            a = critical_exponent(system, Z, n, n, eps, ZERO, tol=TOL).alpha
            worst = max(worst, abs(a - multi_generator_identical_shift_alpha(2, eps, 2, n)))
            monotone &= a < prev
            prev = a
    report("11", worst <= 1e-6 and monotone,
           f"max |alpha - oracle| = {worst:.2e} (tol 1e-6), decreasing in n: {monotone}")


def test_12_determinism(tmp_path):
    cfg = {"system": {"space": {"kind": "torus", "dim": 1},
                      "generators": [{"kind": "affine", "slope": 2}, {"kind": "affine", "slope": 3}]},
           "potential": {"kind": "affine", "coeffs": [0.5]},
           "sample": {"kind": "random", "size": 400, "seed": 11},
           "scales": {"n": [5], "eps": [0.4, 0.3]}, "seed": 99, "threads": 2}
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    first = tmp_path / "a"
    codes = [cli_run(["vp-check", "--config", str(path), "--out", str(first)])]
    manifest = first / "manifest.json"
    outs = [first]
    for name in ("b", "c"):
        outs.append(tmp_path / name)
        codes.append(cli_run(["vp-check", "--config", str(manifest), "--out", str(outs[-1])]))
    blobs = [(o / "results.csv").read_bytes() for o in outs]
    same = all(b == blobs[0] for b in blobs)
    report("12", same and len(set(codes)) == 1,
           f"3 runs from one manifest, CSV byte-identical: {same}, exit codes {codes}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
