"""Bowen metrics, neutralized balls and Birkhoff-type potential sums.

The scalar functions (:func:`bowen_distance`, :func:`potential_sum`, ...)
enumerate formal words one by one and are the reference path.
:class:`BowenIndex` answers the same questions for a whole sample at once and
is what the packing and measure code runs on; the test-suite replays it
against the scalar path.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .systems import (
    DepthError,
    Point,
    Potential,
    SampleSet,
    SymbolicPoint,
    System,
    first_disagreement,
    symbolic_metric,
    wrap_distance,
)
from .words import iter_orbit, level_size


def radius(n: int, eps: float) -> float:
    """Neutralized radius ``exp(-n * eps)``."""
    return math.exp(-n * eps)


@dataclass(frozen=True)
class BowenQuery:
    n: int
    eps: float
    closed: bool = True

    def __post_init__(self):
        if self.n < 1 or int(self.n) != self.n:
            raise ValueError("depth n must be a positive integer")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def radius(self) -> float:
        return radius(self.n, self.eps)

    def inside(self, d: float) -> bool:
        r = self.radius
        return d <= r if self.closed else d < r


def bowen_distance(system: System, p: Point, q: Point, n: int,
                   early_exit: float | None = None) -> float:
    """``d_n(p, q) = max_{g in G_n} d(gp, gq)`` by word enumeration.

    With ``early_exit`` set, the enumeration stops as soon as the running
    maximum leaves the closed ball of that radius; the returned value is then
    only known to be outside it.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    best = 0.0
    stack = [(0, p, q)]
    k = system.k
    while stack:
        depth, a, b = stack.pop()
        d = system.distance(a, b)
        if d > best:
            best = d
            if early_exit is not None and not within(system, best, early_exit):
                return best
        if depth + 1 < n:
            for i in range(k, 0, -1):
                stack.append((depth + 1, system.apply_generator(i, a), system.apply_generator(i, b)))
    return best


def ball_membership(system: System, center: Point, y: Point, query: BowenQuery) -> bool:
    d = bowen_distance(system, center, y, query.n, early_exit=query.radius)
    return within(system, d, query.radius, query.closed)


def potential_sum(system: System, potential: Potential, x: Point, n: int) -> float:
    """``f_n(x)``: sum of ``f`` over the images of ``x`` under every word of ``G_n``."""
    return math.fsum(potential(img) for _, img in iter_orbit(system, x, n))


def ball_sup_sum(system: System, potential: Potential, x: Point, query: BowenQuery,
                 sample: SampleSet) -> float:
    """Sample estimate of ``sup f_n`` over the closed neutralized ball at ``x``."""
    closed = BowenQuery(query.n, query.eps, closed=True)
    best = potential_sum(system, potential, x, query.n)
    for y in sample:
        if y != x and ball_membership(system, x, y, closed):
            best = max(best, potential_sum(system, potential, y, query.n))
    return best


def continuity_modulus(system: System, potential: Potential, n: int, eps: float,
                       sample: SampleSet, budget: int = 10_000, seed: int = 0) -> float:
    """Lower estimate of ``sup{|f(x)-f(y)| : d(x,y) <= 2 exp(-n eps)}`` from sampled pairs."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    thresh = 2.0 * radius(n, eps)
    pts = sample.points
    npts = len(pts)
    total = npts * (npts - 1) // 2
    if total <= budget:
        pairs = ((i, j) for i in range(npts) for j in range(i + 1, npts))
    else:
        rng = np.random.default_rng(seed)
        a = rng.integers(0, npts, budget)
        b = rng.integers(0, npts, budget)
        pairs = ((i, j) for i, j in zip(a.tolist(), b.tolist()) if i != j)
    values = [potential(p) for p in pts]
    best = 0.0
    for i, j in pairs:
        if within(system, system.distance(pts[i], pts[j]), thresh):
            best = max(best, abs(values[i] - values[j]))
    return best


# ---------------------------------------------------------------------------
# sample-level index


class BowenIndex:
    """Bowen geometry of a fixed point set up to depth ``max_depth``.

    Torus systems store the orbit embedding ``(points, |G_N|, D)`` with words
    in length-then-lexicographic order, so ``G_n`` is a column prefix.  The
    symbolic shift needs only the symbol arrays: every generator is the shift,
    and ``d_n(x, y) = b**-(s-n+1)`` when the first disagreement ``s >= n-1``,
    else 1.
    """

    EMBED_CAP = 60_000_000  # floats

    def __init__(self, system: System, points, max_depth: int):
        if max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        self.system = system
        self.points = tuple(points.points if isinstance(points, SampleSet) else points)
        self.max_depth = max_depth
        self.size = len(self.points)
        self._seqs = None
        self._pair_cache: dict = {}
        if system.space == "torus":
            self._build_embedding()

    # -- construction -----------------------------------------------------

    def _build_embedding(self):
        sysm = self.system
        words = level_size(sysm.k, self.max_depth)
        if self.size * words * sysm.dim > self.EMBED_CAP:
            raise MemoryError(
                f"orbit embedding of {self.size} points x {words} words exceeds the cap"
            )
        base = np.asarray(self.points, dtype=float).reshape(self.size, 1, sysm.dim)
        levels = [base]
        cur = base
        for _ in range(1, self.max_depth):
            # children of each parent in letter order -> lexicographic word order
            kids = np.stack([g.apply_array(cur) for g in sysm.generators], axis=2)
            cur = kids.reshape(self.size, -1, sysm.dim)
            levels.append(cur)
        self.embedding = np.concatenate(levels, axis=1)

    def symbols(self, length: int) -> np.ndarray:
        """First ``length`` symbols of every point, shape (N, length)."""
        if self._seqs is None or self._seqs.shape[1] < length:
            rows = [p.expand(length) for p in self.points]
            self._seqs = np.asarray(rows, dtype=np.int64).reshape(self.size, length)
        return self._seqs[:, :length]

    @cached_property
    def _horizon(self) -> int:
        h = 1
        for p in self.points:
            h = max(h, len(p.prefix) + len(p.tail))
        return h

    # -- distances --------------------------------------------------------

    def words(self, n: int) -> int:
        return level_size(self.system.k, n)

    def dist(self, i: int, js, n: int) -> np.ndarray:
        """``d_n`` between point ``i`` and each point in ``js``."""
        js = np.atleast_1d(np.asarray(js, dtype=np.int64))
        if n > self.max_depth:
            raise ValueError(f"depth {n} beyond index depth {self.max_depth}")
        if self.system.space == "torus":
            w = self.words(n)
            e = self.embedding
            d = wrap_distance(e[i, :w][None], e[js, :w])
            return d.max(axis=(1, 2))
        return np.array([self._symbolic_dn(i, j, n) for j in js.tolist()], dtype=float)

    def _symbolic_dn(self, i: int, j: int, n: int) -> float:
        if i == j:
            return 0.0
        s = first_disagreement(self.points[i], self.points[j])
        return symbolic_bowen(self.system.metric_base, s, n)

    def pair_dist(self, a, b, n: int) -> np.ndarray:
        """Vectorized ``d_n`` over index pairs ``(a[t], b[t])``."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if self.system.space != "torus":
            return self._symbolic_pair_dist(a, b, n)
        w = self.words(n)
        out = np.empty(len(a))
        step = max(1, 2_000_000 // max(1, w * self.system.dim))
        for s in range(0, len(a), step):
            ea = self.embedding[a[s:s + step], :w]
            eb = self.embedding[b[s:s + step], :w]
            out[s:s + step] = wrap_distance(ea, eb).max(axis=(1, 2))
        return out

    def _symbolic_pair_dist(self, a, b, n):
        out = np.empty(len(a))
        if len(a) == 0:
            return out
        try:
            seqs = self.symbols(self._horizon)
        except DepthError:
            return np.array([self._symbolic_dn(i, j, n) for i, j in zip(a.tolist(), b.tolist())])
        base = self.system.metric_base
        step = 200_000
        for lo in range(0, len(a), step):
            aa, bb = a[lo:lo + step], b[lo:lo + step]
            mism = seqs[aa] != seqs[bb]
            found = mism.any(axis=1)
            first = mism.argmax(axis=1)
            for t in range(len(aa)):
                if found[t]:
                    out[lo + t] = symbolic_bowen(base, int(first[t]), n)
                else:
                    out[lo + t] = self._symbolic_dn(int(aa[t]), int(bb[t]), n)
        return out

    # -- neighbourhoods ---------------------------------------------------

    def pairs(self, n: int, t: float, closed: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All index pairs ``a < b`` with ``d_n <= t`` (``< t`` when open) and their distances."""
        if self.system.space == "torus":
            return self._torus_pairs(n, t, closed)
        groups = self._symbolic_groups(n, t, closed)
        a_list, b_list = [], []
        for g in groups:
            if len(g) > 1:
                ii, jj = np.triu_indices(len(g), 1)
                a_list.append(g[ii])
                b_list.append(g[jj])
        if not a_list:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty, np.zeros(0)
        a = np.concatenate(a_list)
        b = np.concatenate(b_list)
        return a, b, self.pair_dist(a, b, n)

    def _torus_pairs(self, n, t, closed):
        key = (n, t, closed)
        if key not in self._pair_cache:
            if len(self._pair_cache) >= 8:
                self._pair_cache.pop(next(iter(self._pair_cache)))
            self._pair_cache[key] = self._search_pairs(n, t, closed)
        return self._pair_cache[key]

    def _search_pairs(self, n, t, closed):
        w = self.words(n)
        dim = self.system.dim
        # any column subset yields a superset of the true pairs; word lengths
        # on a doubling ladder keep the superset tight under expanding maps
        k = self.system.k
        lengths = sorted({0, n - 1, *(2**j - 1 for j in range(n.bit_length() + 1) if 2**j - 1 < n)})
        cols = set()
        for ell in lengths:
            start = level_size(k, ell) if ell else 0
            cols.update((start, level_size(k, ell + 1) - 1))
        budget = max(1, 6 // dim)
        if w <= budget:
            cols = set(range(w))
        else:
            cols.update(np.linspace(0, w - 1, max(0, budget - len(cols)) + 2).astype(int).tolist())
        cols = sorted(cols)
        data = self.embedding[:, cols].reshape(self.size, len(cols) * dim)
        tree = cKDTree(data, boxsize=1.0)
        reach = t * (1 + 1e-9) + 1e-15  # inflated; the exact test below decides
        out_a, out_b, out_d = [], [], []
        step = 2048
        for lo in range(0, self.size, step):
            hits = tree.query_ball_point(data[lo:lo + step], reach, p=np.inf, return_sorted=False)
            lens = np.fromiter((len(h) for h in hits), dtype=np.int64, count=len(hits))
            if not lens.sum():
                continue
            a = np.repeat(np.arange(lo, lo + len(hits), dtype=np.int64), lens)
            b = np.concatenate([np.asarray(h, dtype=np.int64) for h in hits])
            upper = b > a
            a, b = a[upper], b[upper]
            if not len(a):
                continue
            d = self.pair_dist(a, b, n)
            keep = d <= t if closed else d < t
            out_a.append(a[keep])
            out_b.append(b[keep])
            out_d.append(d[keep])
        if not out_a:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty, np.zeros(0)
        a, b, d = np.concatenate(out_a), np.concatenate(out_b), np.concatenate(out_d)
        order = np.lexsort((b, a))
        return a[order], b[order], d[order]

    def _group_ids(self, n, t, closed) -> np.ndarray:
        """Label of each point's neutralized ball on the shift (balls partition the sample)."""
        base = self.system.metric_base
        if (closed and t >= 1.0) or (not closed and t > 1.0):
            return np.zeros(self.size, dtype=np.int64)
        s_star = symbolic_threshold(base, n, t, closed)
        if s_star is None:
            return np.arange(self.size, dtype=np.int64)
        seqs = self.symbols(s_star)
        if s_star == 0:
            return np.zeros(self.size, dtype=np.int64)
        m = self.system.alphabet
        if s_star * math.log2(m) < 62:
            keys = seqs @ (m ** np.arange(s_star - 1, -1, -1, dtype=np.int64))
            _, inv = np.unique(keys, return_inverse=True)
        else:
            _, inv = np.unique(seqs, axis=0, return_inverse=True)
        return inv.reshape(-1).astype(np.int64)

    def _symbolic_groups(self, n, t, closed) -> list[np.ndarray]:
        ids = self._group_ids(n, t, closed)
        order = np.argsort(ids, kind="stable")
        cuts = np.flatnonzero(np.diff(ids[order])) + 1
        return np.split(order, cuts)

    def members(self, n: int, t: float, closed: bool = True) -> list[np.ndarray]:
        """For each point, the indices of points within ``t`` in ``d_n`` (itself included)."""
        if self.system.space == "symbolic":
            out = [None] * self.size
            for g in self._symbolic_groups(n, t, closed):
                for i in g.tolist():
                    out[i] = g
            return out
        a, b, _ = self._torus_pairs(n, t, closed)
        src = np.concatenate([a, b, np.arange(self.size)])
        dst = np.concatenate([b, a, np.arange(self.size)])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        bounds = np.searchsorted(src, np.arange(self.size + 1))
        return [dst[bounds[i]:bounds[i + 1]] for i in range(self.size)]

    def ball_masses(self, n: int, t: float, weights, closed: bool = True) -> np.ndarray:
        """Total weight inside each point's ball of radius ``t`` in ``d_n``."""
        w = np.asarray(weights, dtype=float)
        if self.system.space == "symbolic":
            ids = self._group_ids(n, t, closed)
            return np.bincount(ids, weights=w)[ids]
        a, b, _ = self._torus_pairs(n, t, closed)
        out = w.copy()
        out += np.bincount(a, weights=w[b], minlength=self.size)
        out += np.bincount(b, weights=w[a], minlength=self.size)
        return out

    # -- potentials -------------------------------------------------------

    def potential_sums(self, potential: Potential) -> np.ndarray:
        """Array ``S`` with ``S[i, n-1] = f_n(x_i)`` for ``n = 1..max_depth``."""
        sysm = self.system
        out = np.empty((self.size, self.max_depth))
        if sysm.space == "torus":
            vals = potential.evaluate_array(self.embedding.reshape(-1, sysm.dim))
            vals = vals.reshape(self.size, -1)
            for n in range(1, self.max_depth + 1):
                out[:, n - 1] = vals[:, : self.words(n)].sum(axis=1)
            return out
        seqs = self.symbols(self.max_depth + 1)
        acc = np.zeros(self.size)
        for j in range(self.max_depth):
            vals = potential.evaluate_symbols(seqs[:, j:j + 1])
            acc = acc + float(sysm.k) ** j * vals
            out[:, j] = acc
        return out

    @cached_property
    def lex_rank(self) -> np.ndarray:
        """Rank of each point in lexicographic order of coordinates / symbols."""
        if self.system.space == "torus":
            arr = np.asarray(self.points, dtype=float)
            order = np.lexsort(arr.T[::-1])
        else:
            horizon = 1
            for p in self.points:
                horizon = max(horizon, len(p.prefix) + (len(p.tail) if p.tail else 0))
            keys = [p.sort_key(horizon) for p in self.points]
            order = np.asarray(sorted(range(self.size), key=keys.__getitem__), dtype=np.int64)
        rank = np.empty(self.size, dtype=np.int64)
        rank[order] = np.arange(self.size)
        return rank


_SHARED: list = []
_SHARED_LOCK = threading.Lock()
SHARED_INDEXES = 4


def shared_index(system: System, points, max_depth: int) -> BowenIndex:
    """A recently built index over the same points and at least ``max_depth``, or a new one."""
    pts = tuple(points.points if isinstance(points, SampleSet) else points)
    with _SHARED_LOCK:
        for idx in _SHARED:
            if (idx.system == system and idx.max_depth >= max_depth and idx.size == len(pts)
                    and (idx.points is pts or idx.points == pts)):
                return idx
    idx = BowenIndex(system, pts, max_depth)
    with _SHARED_LOCK:
        _SHARED.insert(0, idx)
        del _SHARED[SHARED_INDEXES:]
    return idx


def symbolic_bowen(base: int, s: int | None, n: int) -> float:
    """``d_n`` on the shift from the first disagreement index ``s``."""
    if s is None:
        return 0.0
    if s >= n - 1:
        return symbolic_metric(base, s - n + 1)
    return 1.0


BOUNDARY_TOL = 1e-9


def _metric_exponent(base: int, t: float) -> float:
    """``x`` with ``t = base**-x``, snapped to an integer within ``BOUNDARY_TOL``."""
    x = -math.log(t) / math.log(base)
    k = round(x)
    return float(k) if abs(x - k) < BOUNDARY_TOL else x


def symbolic_threshold(base: int, n: int, t: float, closed: bool) -> int | None:
    """Least ``s >= n-1`` with ``b**-(s-n+1) <= t`` (``< t`` if open); None if t <= 0.

    ``t`` is usually ``exp(-n eps)`` and lands on a power of ``b`` only up to
    rounding, so the comparison is made on exponents with a small tolerance.
    """
    if t <= 0.0:
        return None
    x = _metric_exponent(base, t)
    if x == int(x):
        e = int(x) if closed else int(x) + 1
    else:
        e = math.ceil(x)
    return n - 1 + max(0, e)


def within(system: System, d: float, t: float, closed: bool = True) -> bool:
    """``d <= t`` (``d < t`` when open); exponent-based on symbolic spaces."""
    if system.space == "torus" or d == 0.0:
        return d <= t if closed else d < t
    if t <= 0.0:
        return False
    e = round(-math.log(d) / math.log(system.metric_base))
    x = _metric_exponent(system.metric_base, t)
    return e >= x if closed and x == int(x) else e > x
