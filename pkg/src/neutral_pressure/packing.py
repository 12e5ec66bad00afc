"""Packing pre-measure, critical exponent and pressure tables at finite scale.

A candidate ball is a closed neutralized Bowen ball ``B(x, n_i)`` of radius
``exp(-n_i * eps)`` centred at a sample point ``x``, with ``n <= n_i <= N_max``
and weight ``exp(-alpha |G_{n_i}| + f_{n_i}(x))``.  The greedy packing is a
certified lower bound for the packing supremum at that scale;
:func:`exhaustive_packing` is the exact oracle on small pools.

Disjointness modes
------------------
``triangle``
    ``d_m(x_a, x_b) > r_a + r_b`` with ``m = min(n_a, n_b)``: a sound
    sufficient condition, since a common point ``y`` would give
    ``d_m(x_a, x_b) <= d_{n_a}(x_a, y) + d_{n_b}(x_b, y)``.  On ultrametric
    (symbolic) spaces the strong triangle inequality sharpens this to
    ``d_m(x_a, x_b) > max(r_a, r_b)``.
``shared-sample``
    no sample point lies in both closed balls (optimistic).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .bowen import BowenIndex, bowen_distance, radius, shared_index, symbolic_threshold, within
from .systems import Point, Potential, SampleSet, System
from .words import level_size

MODES = ("triangle", "shared-sample")
EXACT_CAP = 18


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"unknown disjointness mode {mode!r}; expected one of {MODES}")


def logsumexp(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return -math.inf
    m = float(np.max(x))
    return m + math.log(float(np.sum(np.exp(x - m))))


@dataclass(frozen=True)
class PackedBall:
    center: Point
    depth: int
    eps: float
    fsum: float
    words: int

    @property
    def radius(self) -> float:
        return radius(self.depth, self.eps)

    def exponent(self, alpha: float) -> float:
        return -alpha * self.words + self.fsum

    def weight(self, alpha: float) -> float:
        return math.exp(self.exponent(alpha))


@dataclass
class PackingCollection:
    balls: tuple
    mode: str
    alpha: float
    eps: float
    certificate: np.ndarray | None = None

    @property
    def total(self) -> float:
        return math.fsum(b.weight(self.alpha) for b in self.balls)

    def __len__(self) -> int:
        return len(self.balls)

    def log_total(self) -> float:
        return logsumexp([b.exponent(self.alpha) for b in self.balls])

    def key(self) -> frozenset:
        return frozenset((b.center, b.depth) for b in self.balls)


def _pair_threshold(system: System, ra: float, rb: float) -> float:
    return max(ra, rb) if system.ultrametric else ra + rb


def disjoint_test(system: System, a: PackedBall, b: PackedBall, mode: str = "triangle",
                  sample: SampleSet | None = None) -> bool:
    """True when the two closed balls are certified disjoint under ``mode``."""
    _check_mode(mode)
    if a.center == b.center:
        return False
    if mode == "triangle":
        m = min(a.depth, b.depth)
        thresh = _pair_threshold(system, a.radius, b.radius)
        return not within(system, bowen_distance(system, a.center, b.center, m, early_exit=thresh), thresh)
    if sample is None:
        raise ValueError("shared-sample mode needs the sample")
    for y in sample:
        in_a = within(system, bowen_distance(system, a.center, y, a.depth, early_exit=a.radius), a.radius)
        if in_a and within(system, bowen_distance(system, b.center, y, b.depth, early_exit=b.radius),
                           b.radius):
            return False
    return True


def triangle_margin(system: System, a: PackedBall, b: PackedBall) -> float:
    """``d_m(x_a, x_b) - threshold``; positive margins certify disjointness."""
    m = min(a.depth, b.depth)
    return bowen_distance(system, a.center, b.center, m) - _pair_threshold(system, a.radius, b.radius)


def verify_collection(system: System, collection: PackingCollection,
                      sample: SampleSet | None = None) -> bool:
    """Independent pairwise replay of the disjointness claim, by word enumeration."""
    balls = collection.balls
    for i in range(len(balls)):
        for j in range(i + 1, len(balls)):
            if not disjoint_test(system, balls[i], balls[j], collection.mode, sample):
                return False
    return True


# ---------------------------------------------------------------------------
# candidate pools and conflict engines


class CandidatePool:
    """All candidates ``(x, n_i)`` for ``x`` in ``Z`` and ``n <= n_i <= N_max``."""

    def __init__(self, system: System, Z: SampleSet, n: int, N_max: int, eps: float,
                 potential: Potential, mode: str = "triangle", variant: str = "plain",
                 index: BowenIndex | None = None):
        _check_mode(mode)
        if not len(Z):
            raise ValueError("empty sample")
        if N_max < n:
            raise ValueError("N_max must be >= n")
        if eps <= 0:
            raise ValueError("eps must be positive")
        if variant not in ("plain", "sample-sup"):
            raise ValueError(f"unknown variant {variant!r}")
        self.system, self.Z, self.n, self.N_max = system, Z, n, N_max
        self.eps, self.potential, self.mode, self.variant = eps, potential, mode, variant
        self.index = index if index is not None else shared_index(system, Z, N_max)
        depths = np.arange(n, N_max + 1)
        npts = len(Z)
        self.centers = np.repeat(np.arange(npts), len(depths))
        self.depths = np.tile(depths, npts)
        self.words = np.array([level_size(system.k, int(d)) for d in self.depths], dtype=float)
        sums = self.index.potential_sums(potential)
        if variant == "sample-sup":
            sums = self._ball_sup(sums)
        self.fs = sums[self.centers, self.depths - 1]
        self.lexrank = self.index.lex_rank[self.centers]
        self._engine = None
        self._last_order = None
        self._last_choice = None

    def __len__(self) -> int:
        return len(self.centers)

    def _ball_sup(self, sums: np.ndarray) -> np.ndarray:
        out = sums.copy()
        for d in range(self.n, self.N_max + 1):
            mem = self.index.members(d, radius(d, self.eps), closed=True)
            col = sums[:, d - 1]
            out[:, d - 1] = [col[m].max() for m in mem]
        return out

    def ball(self, c: int) -> PackedBall:
        return PackedBall(self.Z[int(self.centers[c])], int(self.depths[c]), self.eps,
                          float(self.fs[c]), int(self.words[c]))

    def balls(self) -> list[PackedBall]:
        return [self.ball(c) for c in range(len(self))]

    def exponents(self, alpha: float) -> np.ndarray:
        return -alpha * self.words + self.fs

    @property
    def engine(self):
        if self._engine is None:
            if self.mode == "shared-sample":
                self._engine = _SharedSampleEngine(self)
            elif self.system.space == "symbolic":
                self._engine = _CylinderEngine(self)
            else:
                self._engine = _PairEngine(self)
        return self._engine

    def greedy(self, alpha: float) -> np.ndarray:
        """Candidate ids admitted by the greedy at ``alpha`` (in admission order)."""
        order = np.lexsort((self.depths, self.lexrank, -self.exponents(alpha)))
        if self._last_order is not None and np.array_equal(order, self._last_order):
            return self._last_choice
        eng = self.engine
        eng.reset()
        chosen = []
        centers = self.centers.tolist()
        depths = self.depths.tolist()
        for c in order.tolist():
            i, d = centers[c], depths[c]
            if eng.admissible(i, d):
                eng.admit(i, d)
                chosen.append(c)
        choice = np.asarray(chosen, dtype=np.int64)
        self._last_order, self._last_choice = order, choice
        return choice

    def exact(self, alpha: float, cap: int = EXACT_CAP) -> np.ndarray:
        """Candidate ids of a maximum-weight disjoint subfamily (branch and bound)."""
        if len(self) > cap:
            raise ValueError(f"pool of {len(self)} candidates exceeds the exhaustive cap {cap}")
        conflict = self.conflict_matrix()
        return _max_weight_independent(np.exp(self.exponents(alpha)), conflict)

    def conflict_matrix(self) -> np.ndarray:
        if getattr(self, "_conflict", None) is None:
            balls = self.balls()
            self._conflict = _conflicts(self.system, balls, self.mode, self.Z)
        return self._conflict

    def collection(self, ids, alpha: float) -> PackingCollection:
        balls = tuple(self.ball(int(c)) for c in ids)
        return PackingCollection(balls, self.mode, alpha, self.eps)


class _PairEngine:
    """Generic triangle-mode conflicts from precomputed near pairs."""

    def __init__(self, pool: CandidatePool):
        self.pool = pool
        sysm, n, N = pool.system, pool.n, pool.N_max
        r0 = radius(n, pool.eps)
        reach = _pair_threshold(sysm, r0, r0)
        a, b, _ = pool.index.pairs(n, reach, closed=True)
        self.dists = np.stack([pool.index.pair_dist(a, b, d) for d in range(n, N + 1)], axis=1) \
            if len(a) else np.zeros((0, N - n + 1))
        self.radii = [radius(d, pool.eps) for d in range(0, N + 1)]
        self.adj = [[] for _ in range(len(pool.Z))]
        for p, (i, j) in enumerate(zip(a.tolist(), b.tolist())):
            self.adj[i].append((j, p))
            self.adj[j].append((i, p))
        self.ultra = sysm.ultrametric
        self.reset()

    def reset(self):
        self.admitted = [-1] * len(self.pool.Z)

    def admissible(self, i: int, d: int) -> bool:
        if self.admitted[i] >= 0:
            return False
        n = self.pool.n
        for j, p in self.adj[i]:
            dj = self.admitted[j]
            if dj < 0:
                continue
            m = min(d, dj)
            ri, rj = self.radii[d], self.radii[dj]
            thresh = max(ri, rj) if self.ultra else ri + rj
            if self.dists[p, m - n] <= thresh:
                return False
        return True

    def admit(self, i: int, d: int):
        self.admitted[i] = d


class _CylinderEngine:
    """Triangle-mode conflicts on the shift via cylinder keys.

    With the strong triangle inequality, balls at depths ``d_a <= d_b`` clash
    iff the centres share the prefix of length ``s*(d_a)``, the forced
    cylinder length of the larger ball.
    """

    def __init__(self, pool: CandidatePool):
        self.pool = pool
        base = pool.system.metric_base
        self.lengths = {}
        for d in range(pool.n, pool.N_max + 1):
            r = radius(d, pool.eps)
            self.lengths[d] = symbolic_threshold(base, d, r, closed=True) if r < 1.0 else 0
        longest = max(self.lengths.values())
        seqs = pool.index.symbols(longest) if longest else np.zeros((len(pool.Z), 0), dtype=np.int64)
        self.keys = {d: [row[:L].tobytes() for row in seqs] for d, L in self.lengths.items()}
        self.reset()

    def reset(self):
        self.admitted = [-1] * len(self.pool.Z)
        self.deep = set()   # (d', key) for every d' <= admitted depth
        self.exact = set()  # (admitted depth, key)

    def admissible(self, i: int, d: int) -> bool:
        if self.admitted[i] >= 0:
            return False
        if (d, self.keys[d][i]) in self.deep:
            return False
        for dd in range(self.pool.n, d):
            if (dd, self.keys[dd][i]) in self.exact:
                return False
        return True

    def admit(self, i: int, d: int):
        self.admitted[i] = d
        self.exact.add((d, self.keys[d][i]))
        for dd in range(self.pool.n, d + 1):
            self.deep.add((dd, self.keys[dd][i]))


class _SharedSampleEngine:
    def __init__(self, pool: CandidatePool):
        self.pool = pool
        self.members = {
            d: pool.index.members(d, radius(d, pool.eps), closed=True)
            for d in range(pool.n, pool.N_max + 1)
        }
        self.reset()

    def reset(self):
        self.covered = np.zeros(len(self.pool.Z), dtype=bool)

    def admissible(self, i: int, d: int) -> bool:
        return not self.covered[self.members[d][i]].any()

    def admit(self, i: int, d: int):
        self.covered[self.members[d][i]] = True


def _conflicts(system: System, balls: Sequence[PackedBall], mode: str,
               sample: SampleSet | None) -> np.ndarray:
    m = len(balls)
    out = np.zeros((m, m), dtype=bool)
    for i in range(m):
        for j in range(i + 1, m):
            c = not disjoint_test(system, balls[i], balls[j], mode, sample)
            out[i, j] = out[j, i] = c
    return out


def _max_weight_independent(weights: np.ndarray, conflict: np.ndarray) -> np.ndarray:
    """Exact maximum-weight independent set by branch and bound."""
    m = len(weights)
    order = sorted(range(m), key=lambda c: (-weights[c], c))
    w = [float(weights[c]) for c in order]
    suffix = [0.0] * (m + 1)
    for t in range(m - 1, -1, -1):
        suffix[t] = suffix[t + 1] + w[t]
    best = {"sum": -1.0, "set": []}
    chosen: list[int] = []

    def visit(t: int, current: float):
        if t == m:
            total = math.fsum(w[s] for s in chosen)
            if total > best["sum"]:
                best["sum"] = total
                best["set"] = list(chosen)
            return
        # float slack keeps the bound from pruning ties
        if current + suffix[t] < best["sum"] * (1 - 1e-12):
            return
        c = order[t]
        if not any(conflict[c, order[s]] for s in chosen):
            chosen.append(t)
            visit(t + 1, current + w[t])
            chosen.pop()
        visit(t + 1, current)

    visit(0, 0.0)
    return np.asarray(sorted(order[s] for s in best["set"]), dtype=np.int64)


# ---------------------------------------------------------------------------
# public operations


def greedy_packing(system: System, Z: SampleSet, n: int, N_max: int, eps: float, alpha: float,
                   potential: Potential, mode: str = "triangle") -> PackingCollection:
    """Greedy disjoint packing: heaviest candidate first, ties by centre order then depth."""
    pool = CandidatePool(system, Z, n, N_max, eps, potential, mode)
    return pool.collection(pool.greedy(alpha), alpha)


def exhaustive_packing(system: System, candidates: Sequence[PackedBall], alpha: float,
                       mode: str = "triangle", sample: SampleSet | None = None,
                       cap: int = EXACT_CAP) -> PackingCollection:
    if len(candidates) > cap:
        raise ValueError(f"pool of {len(candidates)} candidates exceeds the exhaustive cap {cap}")
    candidates = list(candidates)
    if not candidates:
        eps = 1.0
        return PackingCollection((), mode, alpha, eps)
    conflict = _conflicts(system, candidates, mode, sample)
    weights = np.array([b.weight(alpha) for b in candidates])
    ids = _max_weight_independent(weights, conflict)
    return PackingCollection(tuple(candidates[i] for i in ids), mode, alpha, candidates[0].eps)


def premeasure_estimate(system: System, Z: SampleSet, n: int, eps: float, alpha: float,
                        potential: Potential, strategy: str = "greedy", N_max: int | None = None,
                        mode: str = "triangle") -> float:
    """Lower-bound estimate of the packing pre-measure at depth ``n``."""
    pool = CandidatePool(system, Z, n, N_max or n, eps, potential, mode)
    if strategy == "greedy":
        ids = pool.greedy(alpha)
    elif strategy == "exact":
        ids = pool.exact(alpha)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return math.fsum(np.exp(pool.exponents(alpha)[ids]).tolist())


@dataclass
class CriticalExponentResult:
    alpha: float
    lo: float
    hi: float
    m_lo: float
    m_hi: float
    tol: float
    n: int
    N_max: int
    eps: float
    mode: str
    strategy: str
    variant: str = "plain"
    collection_size: int = 0
    polished: bool = False
    evaluations: int = 0
    collection: PackingCollection | None = field(default=None, repr=False)

    def row(self) -> dict:
        return {
            "n": self.n, "N_max": self.N_max, "eps": self.eps, "alpha": self.alpha,
            "lo": self.lo, "hi": self.hi, "m_lo": self.m_lo, "m_hi": self.m_hi,
            "tol": self.tol, "strategy": self.strategy, "mode": self.mode,
            "variant": self.variant, "collection_size": self.collection_size,
        }


def critical_exponent(system: System, Z: SampleSet, n: int, N_max: int | None, eps: float,
                      potential: Potential, lo: float | None = None, hi: float | None = None,
                      tol: float = 1e-6, mode: str = "triangle", strategy: str = "greedy",
                      variant: str = "plain", max_widen: int = 60,
                      pool: CandidatePool | None = None) -> CriticalExponentResult:
    """Finite-scale packing pressure: the root of ``M(alpha) = 1``.

    Bisection over alpha; the greedy (or exact) selection is recomputed at
    every trial alpha from the same frozen candidate pool.  Once the bracket
    is below ``tol`` and the selections at both ends agree, the root of that
    fixed collection's weight sum is returned.
    """
    N_max = N_max or n
    if pool is None:
        pool = CandidatePool(system, Z, n, N_max, eps, potential, mode, variant)
    select = pool.greedy if strategy == "greedy" else pool.exact
    if strategy not in ("greedy", "exact"):
        raise ValueError(f"unknown strategy {strategy!r}")
    evals = 0

    def log_m(alpha):
        nonlocal evals
        evals += 1
        ids = select(alpha)
        return logsumexp(pool.exponents(alpha)[ids]), ids

    fs, words = pool.fs, pool.words
    if lo is None:
        lo = float(np.min(fs / words)) - 1.0
    if hi is None:
        hi = float(np.max((fs + math.log(len(pool))) / words)) + 1.0
    width = max(1.0, hi - lo)
    g_lo, ids_lo = log_m(lo)
    tries = 0
    while not g_lo > 0:
        tries += 1
        if tries > max_widen:
            raise RuntimeError("could not bracket the critical exponent from below")
        lo -= width
        width *= 2
        g_lo, ids_lo = log_m(lo)
    width = max(1.0, hi - lo)
    g_hi, ids_hi = log_m(hi)
    tries = 0
    while not g_hi < 0:
        tries += 1
        if tries > max_widen:
            raise RuntimeError("could not bracket the critical exponent from above")
        hi += width
        width *= 2
        g_hi, ids_hi = log_m(hi)

    root = None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        g, ids = log_m(mid)
        if g > 0:
            lo, g_lo, ids_lo = mid, g, ids
        elif g < 0:
            hi, g_hi, ids_hi = mid, g, ids
        else:
            root = mid
            ids_lo = ids_hi = ids
            break

    polished = False
    if root is None:
        root = 0.5 * (lo + hi)
        if np.array_equal(np.sort(ids_lo), np.sort(ids_hi)):
            root = _fixed_collection_root(fs[ids_lo], words[ids_lo], lo, hi)
            polished = True
    final = ids_lo if root <= lo else ids_hi
    coll = pool.collection(final, root)
    return CriticalExponentResult(
        alpha=root, lo=lo, hi=hi, m_lo=math.exp(min(g_lo, 700.0)), m_hi=math.exp(g_hi),
        tol=tol, n=n, N_max=N_max, eps=eps, mode=mode, strategy=strategy, variant=variant,
        collection_size=len(final), polished=polished, evaluations=evals, collection=coll,
    )


def _fixed_collection_root(fs: np.ndarray, words: np.ndarray, lo: float, hi: float) -> float:
    """Root in alpha of ``sum exp(-alpha w_i + f_i) = 1`` for a fixed collection."""
    if np.all(words == words[0]):
        return logsumexp(fs) / float(words[0])
    return brentq(lambda a: logsumexp(fs - a * words), lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


# ---------------------------------------------------------------------------
# covers


def partition_cover(system: System, Z: SampleSet, level: int) -> list[SampleSet]:
    """Blocks of ``Z`` by length-``level`` cylinder (shift) or dyadic box (torus)."""
    groups: dict = {}
    for p in Z:
        if system.space == "symbolic":
            key = p.expand(level)
        else:
            key = tuple(min(int(v * 2**level), 2**level - 1) for v in p)
        groups.setdefault(key, []).append(p)
    return [SampleSet(tuple(g), f"{Z.provenance}/block{k}") for k, g in sorted(groups.items())]


def _resolve_strategy(system, Z, strategy):
    if callable(strategy):
        return strategy(system, Z)
    if strategy == "trivial":
        return [Z]
    if isinstance(strategy, str) and strategy.startswith("partition:"):
        return partition_cover(system, Z, int(strategy.split(":", 1)[1]))
    raise ValueError(f"unknown cover strategy {strategy!r}")


def outer_estimate(system: System, Z: SampleSet, n: int, eps: float, alpha: float,
                   potential: Potential, strategies: Sequence | None = None,
                   strategy: str = "greedy", N_max: int | None = None,
                   mode: str = "triangle", details: dict | None = None) -> float:
    """Minimum over cover strategies of the summed block pre-measures.

    The trivial cover is always part of the menu, so the value never exceeds
    the pre-measure estimate of ``Z`` itself.
    """
    strategies = list(strategies) if strategies else ["trivial", "partition:1", "partition:2",
                                                      "partition:3"]
    if "trivial" not in strategies:
        strategies.insert(0, "trivial")
    best = math.inf
    for st in strategies:
        blocks = _resolve_strategy(system, Z, st)
        covered = set()
        for blk in blocks:
            covered.update(blk.points)
        missing = [p for p in Z if p not in covered]
        if missing:
            raise ValueError(f"strategy {st!r} does not cover Z ({len(missing)} points missing)")
        value = math.fsum(
            premeasure_estimate(system, blk, n, eps, alpha, potential, strategy, N_max, mode)
            for blk in blocks
        )
        if details is not None:
            details[str(st)] = value
        best = min(best, value)
    return best


# ---------------------------------------------------------------------------
# trimming


def trim_packing_sum(collection: PackingCollection, s: float,
                     interval: tuple[float, float]) -> PackingCollection:
    """Discard balls, largest term first, until the weight sum at ``s`` lies in ``(a, b)``."""
    a, b = interval
    if not a < b:
        raise ValueError("interval must satisfy a < b")
    terms = [ball.weight(s) for ball in collection.balls]
    for t in terms:
        if not t < b - a:
            raise ValueError(f"term {t} is not below the interval length {b - a}")
    total = math.fsum(terms)
    if a < total < b:
        return PackingCollection(collection.balls, collection.mode, s, collection.eps)
    if total <= a:
        raise ValueError(f"sum {total} already at or below {a}")
    order = sorted(range(len(terms)), key=lambda i: (-terms[i], i))
    dropped = set()
    for i in order:
        if total < b:
            break
        dropped.add(i)
        total = math.fsum(t for j, t in enumerate(terms) if j not in dropped)
    assert a < total < b, "trimming skipped the target interval"
    kept = tuple(ball for j, ball in enumerate(collection.balls) if j not in dropped)
    return PackingCollection(kept, collection.mode, s, collection.eps)


# ---------------------------------------------------------------------------
# pressure tables


@dataclass
class PackingReport:
    rows: list
    fit: dict
    monotonicity_violations: list
    variant_rows: list = field(default_factory=list)
    variant_fit: dict | None = None
    certificates: list = field(default_factory=list)


def collection_certificate(system: System, collection: PackingCollection | None,
                           sample: SampleSet | None = None, replay_budget: int = 4_000_000) -> dict:
    """Balls of a final collection plus an independent replay when it is small enough."""
    if collection is None:
        return {"balls": [], "replayed": None}
    balls = [{"center": repr(b.center), "depth": b.depth, "radius": b.radius, "f_n": b.fsum}
             for b in collection.balls]
    replayed = None
    depth = max((b.depth for b in collection.balls), default=1)
    if len(balls) ** 2 * level_size(system.k, depth) <= replay_budget:
        replayed = verify_collection(system, collection, sample)
    return {"mode": collection.mode, "alpha": collection.alpha, "size": len(balls),
            "balls": balls, "replayed": replayed}


def linear_fit(x, y) -> dict:
    slope, intercept = np.polyfit(np.asarray(x, dtype=float), np.asarray(y, dtype=float), 1)
    return {"slope": float(slope), "intercept": float(intercept)}


def pressure_report(system: System, Z, potential: Potential, eps_grid: Sequence[float],
                    n_grid: Sequence[int], N_max: int | None = None, tol: float = 1e-6,
                    mode: str = "triangle", strategy: str = "greedy",
                    sample_sup: bool = False) -> PackingReport:
    """Table of critical exponents over ``eps x n`` with an ``eps -> 0`` extrapolation.

    ``Z`` is a SampleSet or a callable ``(n, eps) -> SampleSet``.  The
    extrapolation is the intercept of a least-squares line through the
    estimates at the largest ``n``; it is an extrapolation, not a limit.
    """
    eps_grid = list(eps_grid)
    n_grid = list(n_grid)
    if not eps_grid or not n_grid:
        raise ValueError("eps and n grids must be nonempty")
    if any(b >= a for a, b in zip(eps_grid, eps_grid[1:])):
        raise ValueError("eps grid must be strictly decreasing")
    if len(set(eps_grid)) < 2:
        raise ValueError("at least two distinct eps values are needed for the fit")
    get_Z = Z if callable(Z) else (lambda n, eps: Z)
    rows, vrows, certs = [], [], []
    for eps in eps_grid:
        for n in n_grid:
            top = max(N_max or n, n)
            res = critical_exponent(system, get_Z(n, eps), n, top, eps, potential, tol=tol,
                                    mode=mode, strategy=strategy)
            rows.append(res.row())
            certs.append({"n": n, "eps": eps,
                          **collection_certificate(system, res.collection, get_Z(n, eps))})
            if sample_sup:
                vres = critical_exponent(system, get_Z(n, eps), n, top, eps, potential, tol=tol,
                                         mode=mode, strategy=strategy, variant="sample-sup")
                vrows.append(vres.row())
    n_top = max(n_grid)
    top_rows = [r for r in rows if r["n"] == n_top]
    fit = linear_fit([r["eps"] for r in top_rows], [r["alpha"] for r in top_rows])
    fit.update({"n": n_top, "label": "eps->0 extrapolation"})
    violations = []
    for n in n_grid:
        seq = [r for r in rows if r["n"] == n]
        for prev, cur in zip(seq, seq[1:]):
            # eps decreases along the grid; the estimate should not increase
            if cur["alpha"] > prev["alpha"] + 2 * tol:
                violations.append({"n": n, "eps_hi": prev["eps"], "eps_lo": cur["eps"],
                                   "alpha_hi": prev["alpha"], "alpha_lo": cur["alpha"]})
    vfit = None
    if sample_sup:
        vtop = [r for r in vrows if r["n"] == n_top]
        vfit = linear_fit([r["eps"] for r in vtop], [r["alpha"] for r in vtop])
        vfit.update({"n": n_top, "label": "sample-sup variant, eps->0 extrapolation"})
    return PackingReport(rows, fit, violations, vrows, vfit, certs)
