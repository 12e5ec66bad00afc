"""Variational-principle experiments and randomized invariant suites."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bowen import BowenIndex, bowen_distance, radius, within
from .measures import (
    SampleMeasure,
    cylinder_uniform,
    dirac,
    empirical_from_orbits,
    five_r_subfamily,
    integrated_pressure,
    katok_pressure,
    local_pressure_table,
    mu_inf_pressure,
    reweighted,
    uniform,
)
from .oracles import forced_cylinder_length, shift_oracle_alpha, ShiftOracleSpec
from .packing import (
    EXACT_CAP,
    CandidatePool,
    _pair_threshold,
    critical_exponent,
    linear_fit,
    premeasure_estimate,
    verify_collection,
)
from .systems import (
    Potential,
    SampleSet,
    SymbolicPoint,
    System,
    circle_maps,
    cylinder_complete,
    full_shift,
    random_sample,
    torus_grid,
)
from .words import level_size

SCHEMA_VERSION = 1


def window_range(n: int, window: int) -> list[int]:
    return list(range(max(1, n - window + 1), n + 1))


def _fixed_point(system: System):
    if system.space == "symbolic":
        return SymbolicPoint((), (0,))
    return (0.0,) * system.dim


def candidate_family(system: System, Z: SampleSet, potential: Potential, eps: float, n: int,
                     window: int = 5, seeds: Sequence[int] = (0, 1, 2)) -> list[SampleMeasure]:
    """Uniform on Z, cylinder-uniform, orbit-empirical per seed, complexity tilt, Dirac."""
    fam = [uniform(Z.points, "uniform-on-Z")]
    if system.space == "symbolic":
        depth = max(len(p.prefix) for p in Z.points)
        for d in (depth - 1, depth - 2):
            if d >= 1:
                mu = cylinder_uniform(system, d)
                if all(p in Z for p in mu.points):
                    fam.append(mu)
    atoms = int(min(256, max(8, len(Z) // 4)))
    for s in seeds:
        fam.append(empirical_from_orbits(system, s, atoms, n, sample=Z))
    table = local_pressure_table(system, fam[0], potential, eps, window_range(n, window), window)
    fam.append(reweighted(fam[0], table.proxies, float(level_size(system.k, n)), "complexity-tilted"))
    fp = _fixed_point(system)
    if fp in Z:
        fam.append(SampleMeasure((fp,), (1.0,), "dirac-fixed-point"))
    return fam


@dataclass
class PressureReport:
    system: str
    Z: str
    potential: str
    scales: dict
    rows: list
    fits: dict = field(default_factory=dict)
    properties: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self) -> str:
        return json.dumps({"schema": SCHEMA_VERSION, "system": self.system, "Z": self.Z,
                           "potential": self.potential, "scales": self.scales, "rows": self.rows,
                           "fits": self.fits, "properties": self.properties,
                           "failures": self.failures}, indent=1, sort_keys=True)

    CSV_COLUMNS = ("eps", "n", "N_max", "window", "delta", "alpha", "lo", "hi", "sup_integrated",
                   "argmax", "katok", "mu_inf", "gap", "lower_ok", "norm_flag", "oracle")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r.get(c)) for c in self.CSV_COLUMNS])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else v


def vp_experiment(system: System, Z, potential: Potential, eps_grid: Sequence[float],
                  candidates: Callable | Sequence[SampleMeasure] | None = None, n: int = 12,
                  N_max: int | None = None, window: int = 5, delta: float = 0.1, tol: float = 1e-6,
                  mode: str = "triangle", strategy: str = "greedy", seeds: Sequence[int] = (0, 1, 2),
                  slack: float = 0.05, oracle: Callable[[int, float], float] | None = None,
                  shift: float | None = None, threads: int = 1,
                  katok: bool = True) -> PressureReport:
    """Packing estimate vs the best integrated pressure over a candidate family.

    ``Z`` and ``candidates`` may be callables of ``eps`` (resp.
    ``(system, Z, eps)``).  The lower-bound direction is asserted at every
    scale; tightness only when an ``oracle(n, eps)`` is supplied.
    """
    eps_grid = list(eps_grid)
    if not eps_grid:
        raise ValueError("empty eps grid")
    N_max = N_max or n
    get_Z = Z if callable(Z) else (lambda eps: Z)

    def get_candidates(Zs, eps):
        if candidates is None:
            return candidate_family(system, Zs, potential, eps, n, window, seeds)
        return list(candidates(system, Zs, eps) if callable(candidates) else candidates)

    def cell(eps):
        Zs = get_Z(eps)
        fam = get_candidates(Zs, eps)
        if not fam:
            raise ValueError("empty candidate family")
        res = critical_exponent(system, Zs, n, N_max, eps, potential, tol=tol, mode=mode,
                                strategy=strategy)
        ns = window_range(n, window)
        values, skipped = {}, []
        for mu in fam:
            if not all(p in Zs for p in mu.points):
                skipped.append(mu.name)
                continue
            values[mu.name] = integrated_pressure(system, mu, Zs, potential, eps, ns, window)
        if not values:
            raise ValueError("no candidate measure is supported on Z")
        argmax = max(values, key=lambda k: (values[k], k))
        best = next(mu for mu in fam if mu.name == argmax)
        kat = inf_val = None
        if katok:
            kat = katok_pressure(system, best, eps, delta, potential, n, N_max, ns, window, tol,
                                 mode, strategy).alpha
            inf_val = mu_inf_pressure(system, best, potential, eps, delta, n, N_max, window, tol,
                                      mode, strategy, seeds)
        row = {"eps": eps, "n": n, "N_max": N_max, "window": window, "delta": delta,
               "seeds": list(seeds), "Z": Zs.provenance, "alpha": res.alpha, "lo": res.lo,
               "hi": res.hi, "sup_integrated": values[argmax], "argmax": argmax,
               "candidates": values, "skipped": skipped, "katok": kat, "mu_inf": inf_val,
               "gap": res.alpha - values[argmax],
               "lower_ok": all(v <= res.alpha + slack for v in values.values()),
               "norm_flag": not res.alpha > potential.norm, "oracle": None}
        if oracle is not None:
            ref = oracle(n, eps)
            disc = max(abs(oracle(m, eps) - ref) for m in ns) + 2 * tol
            row["oracle"] = ref
            row["tight_ok"] = abs(row["gap"]) <= disc and abs(res.alpha - ref) <= 2 * tol
        if shift is not None:
            sres = critical_exponent(system, Zs, n, N_max, eps, potential.shifted(shift), tol=tol,
                                     mode=mode, strategy=strategy)
            row["alpha_shifted"] = sres.alpha
            row["shift_ok"] = abs(sres.alpha - res.alpha - shift) <= 2 * tol
        return row

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(cell, eps_grid))
    else:
        rows = [cell(e) for e in eps_grid]

    failures = []
    for r in rows:
        if not r["lower_ok"]:
            failures.append(f"lower bound violated at eps={r['eps']}")
        if r.get("tight_ok") is False:
            failures.append(f"oracle tightness violated at eps={r['eps']}")
        if r.get("shift_ok") is False:
            failures.append(f"constant-shift invariance violated at eps={r['eps']}")
    fits = {}
    if len(eps_grid) >= 2:
        es = [r["eps"] for r in rows]
        fits["alpha"] = linear_fit(es, [r["alpha"] for r in rows])
        fits["sup_integrated"] = linear_fit(es, [r["sup_integrated"] for r in rows])
    scales = {"n": n, "N_max": N_max, "window": window, "delta": delta, "tol": tol,
              "mode": mode, "strategy": strategy, "seeds": list(seeds), "slack": slack}
    zdesc = rows[0]["Z"] if callable(Z) else Z.provenance
    return PressureReport(system.name, zdesc, potential.name or potential.kind, scales, rows,
                          fits, {}, failures)


# ---------------------------------------------------------------------------
# randomized invariant suites


@dataclass
class SuiteCount:
    checked: int = 0
    violations: int = 0
    examples: list = field(default_factory=list)

    def record(self, ok: bool, info=None) -> None:
        self.checked += 1
        if not ok:
            self.violations += 1
            if len(self.examples) < 5:
                self.examples.append(info)

    def as_dict(self) -> dict:
        return {"checked": self.checked, "violations": self.violations, "examples": self.examples}


def _shift_instance(rng, max_points: int):
    """Random small shift system with a cylinder sample of at most ``max_points`` points."""
    m = int(rng.choice([2, 3]))
    system = full_shift(m, 2)
    depth = 1
    while m ** (depth + 1) <= max_points:
        depth += 1
    return system, cylinder_complete(system, depth)


def _random_potential(system: System, rng) -> Potential:
    if system.space == "symbolic" and rng.random() < 0.6:
        return Potential("first_symbol", table=tuple(rng.uniform(-1, 1, system.alphabet).round(3)))
    return Potential("constant", round(float(rng.uniform(-1, 1)), 3))


def property_suite(seed: int = 0, budget: int = 20, tol: float = 1e-6) -> dict:
    """Run the structural invariants on ``budget`` random instances each."""
    rng = np.random.default_rng(seed)
    out = {name: SuiteCount() for name in
           ("z_monotone", "finite_union", "n_monotone", "eps_monotone", "metric_base",
            "continuity", "constant_shift")}

    for _ in range(budget):
        # Z1 inside Z2, exact strategy
        system, Zfull = _shift_instance(rng, EXACT_CAP)
        n = int(rng.integers(1, 4))
        eps = float(rng.uniform(0.05, 0.6))
        f = _random_potential(system, rng)
        big = np.sort(rng.choice(len(Zfull), size=int(rng.integers(2, len(Zfull) + 1)), replace=False))
        small = np.sort(rng.choice(big, size=int(rng.integers(1, len(big) + 1)), replace=False))
        Z2, Z1 = Zfull.subset(big), Zfull.subset(small)
        a1 = critical_exponent(system, Z1, n, n, eps, f, tol=tol, strategy="exact").alpha
        a2 = critical_exponent(system, Z2, n, n, eps, f, tol=tol, strategy="exact").alpha
        out["z_monotone"].record(a1 <= a2 + 2 * tol, (n, eps, a1, a2))

        # disjoint blocks split by the first symbol
        blocks = [Zfull.subset([i for i, p in enumerate(Zfull) if p.symbol(0) == s])
                  for s in range(system.alphabet)]
        take = [b for b in blocks if rng.random() < 0.7] or blocks[:2]
        union = take[0]
        for b in take[1:]:
            union = union.union(b)
        parts = [critical_exponent(system, b, n, n, eps, f, tol=tol, strategy="exact").alpha
                 for b in take]
        whole = critical_exponent(system, union, n, n, eps, f, tol=tol, strategy="exact").alpha
        upper = max(parts) + math.log(len(take)) / level_size(system.k, n)
        out["finite_union"].record(max(parts) - 2 * tol <= whole <= upper + 2 * tol,
                                   (n, eps, parts, whole))

        # pre-measure does not increase with n at fixed alpha
        N_max = n + 1
        sub = Zfull.subset(range(min(len(Zfull), EXACT_CAP // 2)))
        alpha = float(rng.uniform(0, 1.5))
        m1 = premeasure_estimate(system, sub, n, eps, alpha, f, "exact", N_max)
        m2 = premeasure_estimate(system, sub, n + 1, eps, alpha, f, "exact", N_max)
        out["n_monotone"].record(m2 <= m1 * (1 + 1e-12), (n, eps, alpha, m1, m2))

        # eps monotonicity on the oracle system
        n2 = int(rng.integers(3, 9))
        e_hi = float(rng.uniform(0.1, 0.3))
        e_lo = float(rng.uniform(0.02, e_hi))
        sh = full_shift(2, 2)
        Zc = cylinder_complete(sh, forced_cylinder_length(n2, e_hi, 2))
        zero = Potential("constant", 0.0)
        a_hi = critical_exponent(sh, Zc, n2, n2, e_hi, zero, tol=tol).alpha
        a_lo = critical_exponent(sh, Zc, n2, n2, e_lo, zero, tol=tol).alpha
        out["eps_monotone"].record(a_lo <= a_hi + 2 * tol, (n2, e_hi, e_lo, a_hi, a_lo))

        # metric base independence on matched eps grids
        grid = sorted(rng.uniform(0.05, 0.3, 3).round(4).tolist(), reverse=True)
        if len(set(grid)) == len(grid):
            intercepts = []
            for b in (2, 4):
                sb = full_shift(2, b)
                eb = [e * math.log(b) / math.log(2) for e in grid]
                vals = []
                for e in eb:
                    Zb = cylinder_complete(sb, forced_cylinder_length(n2, e, b))
                    vals.append(critical_exponent(sb, Zb, n2, n2, e, zero, tol=tol).alpha)
                intercepts.append(linear_fit(grid, vals)["intercept"])
            out["metric_base"].record(abs(intercepts[0] - intercepts[1]) <= 0.02,
                                      (n2, grid, intercepts))

        # sample-sup variant: fbar_{n_i} - f_{n_i} <= |G_{n_i}| L 2 exp(-n eps) for n_i >= n
        csys = full_shift(2, 2, k=int(rng.integers(1, 3)))
        cf = Potential("first_symbol", table=tuple(rng.uniform(-1, 1, 2).round(3)))
        cn = int(rng.integers(1, 5))
        ce = float(rng.uniform(0.05, 0.4))
        pts = random_sample(csys, 24, int(rng.integers(2**31)), depth=cn + 14)
        plain = CandidatePool(csys, pts, cn, cn + 2, ce, cf)
        bar = CandidatePool(csys, pts, cn, cn + 2, ce, cf, variant="sample-sup")
        bound = bar.words * cf.lipschitz(csys) * 2 * radius(cn, ce)
        diff = bar.fs - plain.fs
        out["continuity"].record(bool(np.all(diff >= 0) and np.all(diff <= bound + 1e-12)), (cn, ce))

        # alpha(f + c) - alpha(f) = c
        c = float(rng.uniform(-2, 2))
        base = critical_exponent(system, Z2, n, n + 1, eps, f, tol=tol).alpha
        moved = critical_exponent(system, Z2, n, n + 1, eps, f.shifted(c), tol=tol).alpha
        out["constant_shift"].record(abs(moved - base - c) <= 2 * tol, (c, base, moved))

    return {k: v.as_dict() for k, v in out.items()}


def _pool_system(rng):
    choice = int(rng.integers(0, 4))
    if choice == 0:
        return full_shift(2, 2)
    if choice == 1:
        return full_shift(3, 2)
    if choice == 2:
        return circle_maps(2)
    return circle_maps(2, 3)


def packing_pool_suite(seed: int = 0, count: int = 200) -> dict:
    """Greedy soundness, exhaustive dominance, and greedy optimality on cylinder pools."""
    rng = np.random.default_rng(seed)
    sound, dominance, cylinder = SuiteCount(), SuiteCount(), SuiteCount()
    for t in range(count):
        alpha = float(rng.uniform(0, 1.5))
        if t % 2 == 1:
            system = full_shift(2, 2)
            while True:
                n = int(rng.integers(1, 4))
                eps = float(rng.uniform(0.05, 1.0))
                depth = forced_cylinder_length(n, eps, 2)
                if 2**depth <= EXACT_CAP:
                    break
            Z = cylinder_complete(system, depth)
            f = Potential("first_symbol", table=tuple(rng.uniform(-1, 1, 2).round(3)))
            pool = CandidatePool(system, Z, n, n, eps, f, "triangle")
            g = math.fsum(np.exp(pool.exponents(alpha)[pool.greedy(alpha)]).tolist())
            x = math.fsum(np.exp(pool.exponents(alpha)[pool.exact(alpha)]).tolist())
            cylinder.record(g == x, (n, eps, g, x))
        else:
            system = _pool_system(rng)
            n = int(rng.integers(1, 4))
            N_max = n + int(rng.integers(0, 3))
            per = N_max - n + 1
            size = int(rng.integers(1, EXACT_CAP // per + 1))
            if system.space == "torus":
                Z = random_sample(system, size, int(rng.integers(2**31)))
            else:
                Z = random_sample(system, size, int(rng.integers(2**31)), depth=8)
            eps = float(rng.uniform(0.05, 1.0))
            f = _random_potential(system, rng)
            mode = "triangle" if rng.random() < 0.6 else "shared-sample"
            pool = CandidatePool(system, Z, n, N_max, eps, f, mode)
        gids = pool.greedy(alpha)
        coll = pool.collection(gids, alpha)
        sound.record(verify_collection(system, coll, pool.Z), (system.name, t))
        g = math.fsum(np.exp(pool.exponents(alpha)[gids]).tolist())
        x = math.fsum(np.exp(pool.exponents(alpha)[pool.exact(alpha)]).tolist())
        dominance.record(x >= g * (1 - 1e-12), (system.name, t, g, x))
    return {"soundness": sound.as_dict(), "dominance": dominance.as_dict(),
            "cylinder_equality": cylinder.as_dict()}


def five_r_suite(seed: int = 0, count: int = 200) -> dict:
    """Random ball families: admitted balls disjoint, inputs covered by 5x inflations."""
    rng = np.random.default_rng(seed)
    disjoint, covered = SuiteCount(), SuiteCount()
    for t in range(count):
        system = _pool_system(rng)
        depth = 10 if system.space == "symbolic" else 24
        sample = random_sample(system, int(rng.integers(8, 40)), int(rng.integers(2**31)), depth=depth)
        n = int(rng.integers(1, 4))
        size = int(rng.integers(1, 12))
        centers = rng.choice(len(sample), size=size, replace=True)
        radii = rng.uniform(0.02, 0.6, size)
        if rng.random() < 0.3:
            radii[:] = radii[0]
        balls = [(sample[int(c)], n, float(r)) for c, r in zip(centers, radii)]
        res = five_r_subfamily(system, balls, sample)
        ok = True
        for i, a in enumerate(res.admitted):
            for b in res.admitted[i + 1:]:
                ca, _, ra = balls[a]
                cb, _, rb = balls[b]
                th = _pair_threshold(system, ra, rb)
                if ca == cb or within(system, bowen_distance(system, ca, cb, n), th):
                    ok = False
        disjoint.record(ok, (system.name, t))
        covered.record(res.ok, (system.name, t, res.failures[:3]))
    return {"disjoint": disjoint.as_dict(), "covered": covered.as_dict()}


def shift_oracle(m: int = 2, b: int = 2, table: Sequence[float] | None = None):
    """``oracle(n, eps)`` for the single-shift closed form."""
    table = tuple(table) if table is not None else (0.0,) * m

    def oracle(n, eps):
        return shift_oracle_alpha(ShiftOracleSpec(m, b, 1, table, eps, n))
    return oracle


def shift_cylinder_sample(system: System, n: int, extra: int = 0):
    """``eps -> Z`` cylinder-complete at the forced depth of ``(n, eps)``."""
    def get(eps):
        return cylinder_complete(system, forced_cylinder_length(n, eps, system.metric_base) + extra)
    return get
