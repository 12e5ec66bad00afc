"""Finitely supported measures, neutralized local pressure and Katok-type pressure.

The local quantity at an atom ``x`` is the sequence

    q_n(x) = (-log mu(B_n(x, exp(-n eps))) + f_n(x)) / |G_n|

over the open neutralized balls; its limsup is replaced by the maximum over
the last ``window`` entries of the computed range.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .bowen import (
    BowenIndex,
    BowenQuery,
    ball_membership,
    bowen_distance,
    potential_sum,
    radius,
    shared_index,
    within,
)
from .packing import CriticalExponentResult, _pair_threshold, critical_exponent
from .systems import (
    Point,
    Potential,
    SampleSet,
    SymbolicPoint,
    System,
    cylinder_complete,
    random_sample,
)
from .words import level_size

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class SampleMeasure:
    points: tuple
    weights: tuple
    name: str = ""

    def __post_init__(self):
        pts = tuple(self.points)
        w = tuple(float(v) for v in self.weights)
        if not pts or len(pts) != len(w):
            raise ValueError("a measure needs as many weights as atoms (at least one)")
        if any(not v > 0 for v in w):
            raise ValueError("atom weights must be positive")
        if abs(math.fsum(w) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {math.fsum(w)}, not 1")
        if len(set(pts)) != len(pts):
            raise ValueError("atom points must be distinct")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights)

    def support(self) -> SampleSet:
        return SampleSet(self.points, f"support:{self.name}")

    def mass_in(self, Z: SampleSet) -> float:
        return math.fsum(w for p, w in zip(self.points, self.weights) if p in Z)

    def to_json(self) -> str:
        atoms = []
        for p, w in zip(self.points, self.weights):
            if isinstance(p, SymbolicPoint):
                atoms.append({"prefix": list(p.prefix), "tail": list(p.tail), "weight": w})
            else:
                atoms.append({"coords": list(p), "weight": w})
        return json.dumps({"name": self.name, "atoms": atoms})

    @classmethod
    def from_json(cls, text: str) -> "SampleMeasure":
        data = json.loads(text)
        pts, ws = [], []
        for a in data["atoms"]:
            if "coords" in a:
                pts.append(tuple(float(v) for v in a["coords"]))
            else:
                pts.append(SymbolicPoint(tuple(a["prefix"]), tuple(a.get("tail", ()))))
            ws.append(a["weight"])
        return cls(tuple(pts), tuple(ws), data.get("name", ""))


def _normalized(points, masses, name) -> SampleMeasure:
    merged: dict = {}
    for p, m in zip(points, masses):
        merged[p] = merged.get(p, 0.0) + m
    total = math.fsum(merged.values())
    return SampleMeasure(tuple(merged), tuple(v / total for v in merged.values()), name)


def dirac(p: Point) -> SampleMeasure:
    return SampleMeasure((p,), (1.0,), "dirac")


def uniform(points: Sequence[Point], name: str = "uniform") -> SampleMeasure:
    pts = tuple(points)
    return SampleMeasure(pts, (1.0 / len(pts),) * len(pts), name)


def cylinder_uniform(system: System, depth: int, tail: tuple = (0,)) -> SampleMeasure:
    """Mass ``m**-depth`` on one representative per length-``depth`` cylinder."""
    Z = cylinder_complete(system, depth, tail)
    return uniform(Z.points, f"cylinder-uniform:{depth}")


def bernoulli_cylinder(system: System, depth: int, probs: Sequence[float],
                       tail: tuple = (0,)) -> SampleMeasure:
    """Bernoulli ``probs`` measure of each length-``depth`` cylinder, on one point per cylinder."""
    p = np.asarray(probs, dtype=float)
    if len(p) != system.alphabet or np.any(p <= 0) or abs(p.sum() - 1) > WEIGHT_TOL:
        raise ValueError("need one positive probability per symbol, summing to 1")
    Z = cylinder_complete(system, depth, tail)
    words = np.asarray([pt.expand(depth) for pt in Z.points], dtype=np.int64).reshape(len(Z), depth)
    logw = np.log(p)[words].sum(axis=1)
    w = np.exp(logw)
    w /= w.sum()
    label = ",".join(f"{v:g}" for v in p)
    return SampleMeasure(Z.points, tuple(w.tolist()), f"bernoulli({label}):{depth}")


def reweighted(mu: SampleMeasure, scores: Sequence[float], beta: float, name: str) -> SampleMeasure:
    """Tilt ``mu`` by ``exp(beta * score)`` and renormalize."""
    s = np.asarray(scores, dtype=float)
    logw = np.log(mu.weight_array) + beta * (s - s.max())
    w = np.exp(logw - logw.max())
    return SampleMeasure(mu.points, tuple((w / w.sum()).tolist()), name)


def _snap(system: System, pts: list, sample: SampleSet) -> list:
    """Nearest sample point (base metric; lowest index on ties)."""
    if system.space == "torus":
        tree = cKDTree(np.asarray(sample.points, dtype=float), boxsize=1.0)
        _, idx = tree.query(np.asarray(pts, dtype=float), p=np.inf)
        return [sample[int(i)] for i in np.atleast_1d(idx)]
    horizon = max(len(p.prefix) + len(p.tail) for p in sample.points)
    seqs = np.asarray([p.expand(horizon) for p in sample.points], dtype=np.int64)
    out = []
    for p in pts:
        row = np.asarray(p.expand(horizon), dtype=np.int64)
        mism = seqs != row
        agree = np.where(mism.any(axis=1), mism.argmax(axis=1), horizon)
        out.append(sample[int(np.argmax(agree))])
    return out


def empirical_from_orbits(system: System, seed: int, atoms: int, depth: int,
                          sample: SampleSet | None = None) -> SampleMeasure:
    """Uniform weights on points reached by random words of length ``< depth``.

    Starting points are drawn from ``sample`` when given (and images snapped
    back onto it, so the measure is supported on the sample), otherwise
    uniformly at random.  Repeated points are merged.
    """
    if atoms < 1:
        raise ValueError("atom count must be >= 1")
    rng = np.random.default_rng(seed)
    if sample is not None:
        starts = [sample[int(i)] for i in rng.integers(0, len(sample), atoms)]
    else:
        base = random_sample(system, atoms, int(rng.integers(2**31)), depth=depth + 32)
        starts = [base[i % len(base)] for i in range(atoms)]
    pts = []
    for p in starts:
        length = int(rng.integers(0, depth)) if depth > 0 else 0
        for letter in rng.integers(1, system.k + 1, length).tolist():
            p = system.apply_generator(letter, p)
        pts.append(p)
    if sample is not None:
        pts = _snap(system, pts, sample)
    return _normalized(pts, [1.0] * len(pts), f"orbit-empirical:{seed}")


# ---------------------------------------------------------------------------
# ball masses and local pressure


def ball_mass(system: System, mu: SampleMeasure, x: Point, n: int, eps: float,
              closed: bool = False) -> float:
    q = BowenQuery(n, eps, closed)
    return math.fsum(w for p, w in zip(mu.points, mu.weights) if ball_membership(system, x, p, q))


@dataclass
class LocalPressureTrace:
    point: Point
    eps: float
    ns: list
    masses: list
    fsums: list
    quotients: list
    window: int
    proxy: float
    divergent: bool = False

    def rows(self) -> list[dict]:
        return [{"n": n, "ball_mass": m, "f_n": f, "quotient": q}
                for n, m, f, q in zip(self.ns, self.masses, self.fsums, self.quotients)]


def _proxy(quotients: Sequence[float], window: int) -> float:
    if window < 1:
        raise ValueError("window must be >= 1")
    return max(quotients[-window:])


def local_pressure(system: System, mu: SampleMeasure, x: Point, potential: Potential,
                   eps: float, n_range: Sequence[int], window: int = 5) -> LocalPressureTrace:
    """Trace of the local quotient at ``x`` and its tail-window maximum."""
    ns = list(n_range)
    masses, fsums, quots = [], [], []
    for n in ns:
        m = ball_mass(system, mu, x, n, eps, closed=False)
        fn = potential_sum(system, potential, x, n)
        masses.append(m)
        fsums.append(fn)
        quots.append((-math.log(m) + fn) / level_size(system.k, n) if m > 0 else math.inf)
    proxy = _proxy(quots, window)
    return LocalPressureTrace(x, eps, ns, masses, fsums, quots, window, proxy,
                              divergent=math.isinf(proxy))


@dataclass
class LocalPressureTable:
    """Local quotients for every atom of a measure (rows: atoms, columns: n)."""

    ns: list
    masses: np.ndarray
    fsums: np.ndarray
    quotients: np.ndarray
    window: int

    @property
    def proxies(self) -> np.ndarray:
        return self.quotients[:, -self.window:].max(axis=1)


def local_pressure_table(system: System, mu: SampleMeasure, potential: Potential, eps: float,
                         n_range: Sequence[int], window: int = 5,
                         index: BowenIndex | None = None) -> LocalPressureTable:
    ns = list(n_range)
    if not ns:
        raise ValueError("empty n range")
    if window < 1:
        raise ValueError("window must be >= 1")
    idx = index or shared_index(system, mu.points, max(ns))
    w = mu.weight_array
    sums = idx.potential_sums(potential)
    masses = np.empty((len(mu), len(ns)))
    fs = np.empty_like(masses)
    quots = np.empty_like(masses)
    for c, n in enumerate(ns):
        masses[:, c] = idx.ball_masses(n, radius(n, eps), w, closed=False)
        fs[:, c] = sums[:, n - 1]
        quots[:, c] = (-np.log(masses[:, c]) + fs[:, c]) / level_size(system.k, n)
    return LocalPressureTable(ns, masses, fs, quots, window)


def integrated_pressure(system: System, mu: SampleMeasure, Z: SampleSet, potential: Potential,
                        eps: float, n_range: Sequence[int], window: int = 5,
                        strict: bool = True, table: LocalPressureTable | None = None) -> float:
    """``sum over atoms in Z of weight * local proxy``.

    In strict mode every atom must belong to ``Z`` (the measure gives ``Z``
    full mass); otherwise atoms outside ``Z`` only trigger a warning.
    """
    inside = [p in Z for p in mu.points]
    if not any(inside):
        raise ValueError("measure not supported on Z")
    if not all(inside):
        outside = mu.mass_in(Z)
        msg = f"measure gives Z mass {outside}, not 1"
        if strict:
            raise ValueError(msg)
        warnings.warn(msg, stacklevel=2)
    table = table or local_pressure_table(system, mu, potential, eps, n_range, window)
    prox = table.proxies
    terms = []
    excluded = 0.0
    for w, p, ok in zip(mu.weights, prox.tolist(), inside):
        if not ok:
            continue
        if math.isinf(p):
            excluded += w
            continue
        terms.append(w * p)
    if excluded:
        warnings.warn(f"mass {excluded} with divergent local pressure excluded", stacklevel=2)
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# Katok-type pressure


@dataclass
class KatokEstimate:
    alpha: float
    delta: float
    eps: float
    removed: list
    retained_mass: float
    ranking: str
    result: CriticalExponentResult = field(repr=False, default=None)


def _trim(weights: Sequence[float], order: Sequence[int], delta: float) -> list[int]:
    removed, mass = [], 0.0
    remaining = len(weights)
    for i in order:
        if remaining == 1:
            break
        if mass + weights[i] <= delta + 1e-15:
            removed.append(i)
            mass += weights[i]
            remaining -= 1
    return removed


def katok_pressure(system: System, mu: SampleMeasure, eps: float, delta: float,
                   potential: Potential, n: int, N_max: int | None = None,
                   n_range: Sequence[int] | None = None, window: int = 5, tol: float = 1e-6,
                   mode: str = "triangle", strategy: str = "greedy", ranking: str = "complexity",
                   seed: int = 0) -> KatokEstimate:
    """Critical exponent after discarding at most ``delta`` of the mass.

    ``ranking="complexity"`` drops atoms with the largest local proxy first
    (ties by centre order); ``ranking="random"`` uses a seeded permutation.
    At least one atom is always retained.
    """
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    w = list(mu.weights)
    if ranking == "complexity":
        ns = list(n_range) if n_range is not None else list(range(max(1, n - window + 1), n + 1))
        prox = local_pressure_table(system, mu, potential, eps, ns, window).proxies
        lex = shared_index(system, mu.points, 1).lex_rank
        order = sorted(range(len(w)), key=lambda i: (-prox[i], lex[i]))
    elif ranking == "random":
        order = np.random.default_rng(seed).permutation(len(w)).tolist()
    else:
        raise ValueError(f"unknown ranking {ranking!r}")
    removed = _trim(w, order, delta) if delta > 0 else []
    gone = set(removed)
    kept = [i for i in range(len(w)) if i not in gone]
    Z = SampleSet(tuple(mu.points[i] for i in kept), f"retained:{ranking}")
    res = critical_exponent(system, Z, n, N_max or n, eps, potential, tol=tol, mode=mode,
                            strategy=strategy)
    return KatokEstimate(res.alpha, delta, eps, removed, math.fsum(w[i] for i in kept), ranking, res)


def mu_inf_pressure(system: System, mu: SampleMeasure, potential: Potential, eps: float,
                    delta: float, n: int, N_max: int | None = None, window: int = 5,
                    tol: float = 1e-6, mode: str = "triangle", strategy: str = "greedy",
                    seeds: Sequence[int] = (0, 1, 2)) -> float:
    """Minimum critical exponent over a menu of retained sets of mass ``>= 1 - delta``."""
    common = dict(n=n, N_max=N_max, window=window, tol=tol, mode=mode, strategy=strategy)
    values = [katok_pressure(system, mu, eps, 0.0, potential, **common).alpha]
    if delta > 0:
        values.append(katok_pressure(system, mu, eps, delta, potential, **common).alpha)
        for s in seeds:
            values.append(katok_pressure(system, mu, eps, delta, potential, ranking="random",
                                         seed=s, **common).alpha)
    return min(values)


# ---------------------------------------------------------------------------
# 5r covering lemma


@dataclass
class FiveRResult:
    admitted: list
    cover: dict
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


def _lex_key(p: Point):
    return p.sort_key(len(p.prefix) + len(p.tail) + 1) if isinstance(p, SymbolicPoint) else p


def five_r_subfamily(system: System, balls: Sequence[tuple], sample: SampleSet | None = None) -> FiveRResult:
    """Greedy disjoint subfamily (largest radius first) with a 5x coverage certificate.

    ``balls`` are ``(center, n, radius)`` triples sharing one depth ``n``.
    Every sample point inside an input ball (and the ball's centre) must lie
    within five radii of some admitted centre in ``d_n``.
    """
    balls = list(balls)
    if not balls:
        return FiveRResult([], {}, [])
    depths = {b[1] for b in balls}
    if len(depths) != 1:
        raise ValueError("all balls must share one Bowen depth")
    n = depths.pop()
    order = sorted(range(len(balls)), key=lambda i: (-balls[i][2], _lex_key(balls[i][0]), i))
    admitted: list[int] = []
    for i in order:
        c, _, r = balls[i]
        ok = True
        for j in admitted:
            cj, _, rj = balls[j]
            thresh = _pair_threshold(system, r, rj)
            if c == cj or within(system, bowen_distance(system, c, cj, n, early_exit=thresh), thresh):
                ok = False
                break
        if ok:
            admitted.append(i)
    cover, failures = {}, []
    for i, (c, _, r) in enumerate(balls):
        pts = [c]
        if sample is not None:
            pts += [y for y in sample if y != c and within(system, bowen_distance(system, c, y, n, early_exit=r), r)]
        owner = None
        for j in admitted:
            cj, _, rj = balls[j]
            if all(bowen_distance(system, cj, y, n, early_exit=5 * rj) <= 5 * rj for y in pts):
                owner = j
                break
        if owner is None:
            # points may be spread over several inflated balls
            for y in pts:
                if not any(bowen_distance(system, balls[j][0], y, n, early_exit=5 * balls[j][2])
                           <= 5 * balls[j][2] for j in admitted):
                    failures.append((i, y))
        cover[i] = owner
    return FiveRResult(admitted, cover, failures)
