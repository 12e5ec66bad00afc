"""Compact metric space models, generator maps, potentials and finite samples.

Two space families are supported:

* ``torus`` of dimension ``D`` with the sup metric over coordinates, each
  coordinate measured with the wraparound distance ``min(|a-b|, 1-|a-b|)``;
* ``symbolic`` full shift on ``m`` symbols with ``d(x, y) = b**(-s)``, ``s``
  being the first index where ``x`` and ``y`` disagree.

Torus points are plain tuples of floats.  Symbolic points are
:class:`SymbolicPoint` instances (finite prefix plus optional periodic tail).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence, Union

import numpy as np


class DepthError(ValueError):
    """Raised when an operation would read past the stored symbolic prefix."""


class ConfigError(ValueError):
    """Invalid or unsupported system / potential / sample description."""


# ---------------------------------------------------------------------------
# points


def _minimal_period(word: tuple) -> tuple:
    n = len(word)
    for p in range(1, n + 1):
        if n % p == 0 and word[:p] * (n // p) == word:
            return word[:p]
    return word


@dataclass(frozen=True, order=False)
class SymbolicPoint:
    """One-sided sequence ``prefix + tail + tail + ...``.

    With an empty ``tail`` only ``prefix`` is known and reading beyond it
    raises :class:`DepthError`.  Points with a tail are stored in canonical
    form (shortest preperiod, minimal period) so that equal sequences compare
    equal structurally.
    """

    prefix: tuple = ()
    tail: tuple = ()

    def __post_init__(self):
        prefix = tuple(int(s) for s in self.prefix)
        tail = tuple(int(s) for s in self.tail)
        if tail:
            tail = _minimal_period(tail)
            while prefix and prefix[-1] == tail[-1]:
                prefix = prefix[:-1]
                tail = (tail[-1],) + tail[:-1]
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "tail", tail)

    @property
    def infinite(self) -> bool:
        return bool(self.tail)

    def symbol(self, i: int) -> int:
        if i < len(self.prefix):
            return self.prefix[i]
        if not self.tail:
            raise DepthError(f"symbol {i} requested but only {len(self.prefix)} stored")
        return self.tail[(i - len(self.prefix)) % len(self.tail)]

    def expand(self, length: int) -> tuple:
        """First ``length`` symbols; raises DepthError if they are not stored."""
        if length <= len(self.prefix):
            return self.prefix[:length]
        if not self.tail:
            raise DepthError(f"{length} symbols requested but only {len(self.prefix)} stored")
        extra = length - len(self.prefix)
        reps = -(-extra // len(self.tail))
        return self.prefix + (self.tail * reps)[:extra]

    def shifted(self) -> "SymbolicPoint":
        if self.prefix:
            return SymbolicPoint(self.prefix[1:], self.tail)
        if not self.tail:
            raise DepthError("shift of a point with an exhausted prefix")
        return SymbolicPoint((), self.tail[1:] + self.tail[:1])

    def resolution(self) -> int | None:
        """Number of symbols needed to separate this point from any other, or None."""
        return None if not self.tail else len(self.prefix) + len(self.tail)

    def sort_key(self, length: int) -> tuple:
        if self.tail or length <= len(self.prefix):
            return self.expand(length)
        return self.prefix

    def __repr__(self) -> str:
        body = "".join(map(str, self.prefix))
        if self.tail:
            body += "(" + "".join(map(str, self.tail)) + ")^"
        return f"SymbolicPoint[{body}]"


Point = Union[tuple, SymbolicPoint]


def first_disagreement(p: SymbolicPoint, q: SymbolicPoint) -> int | None:
    """Index of the first differing symbol; None when the sequences are equal.

    Raises DepthError when the stored data cannot decide.
    """
    if p.tail and q.tail:
        horizon = max(len(p.prefix), len(q.prefix)) + math.lcm(len(p.tail), len(q.tail))
    else:
        known = [len(r.prefix) for r in (p, q) if not r.tail]
        horizon = min(known)
    for i in range(horizon):
        if p.symbol(i) != q.symbol(i):
            return i
    if p.tail and q.tail:
        return None
    raise DepthError("stored prefixes agree entirely; distance undecidable")


# ---------------------------------------------------------------------------
# generators


def _mod1(x: np.ndarray) -> np.ndarray:
    y = np.mod(x, 1.0)
    # np.mod can round tiny negatives up to exactly 1.0
    y[y >= 1.0] = 0.0
    return y


@dataclass(frozen=True)
class Generator:
    """A self-map of the space.

    kind ``affine``: ``x -> (slope * x + offset) mod 1`` with integer slopes;
    kind ``contraction``: ``x -> scale * x + offset`` (must stay in ``[0, 1)``);
    kind ``shift``: left shift on sequences.
    """

    kind: str
    slope: tuple = ()
    offset: tuple = ()

    def label(self) -> str:
        if self.kind == "shift":
            return "shift"
        return f"{self.kind}{self.slope}+{self.offset}"

    def apply_array(self, x: np.ndarray) -> np.ndarray:
        """Apply to an array of torus points of shape (..., D)."""
        slope = np.asarray(self.slope, dtype=float)
        offset = np.asarray(self.offset, dtype=float)
        y = x * slope + offset
        if self.kind == "affine":
            return _mod1(y)
        return y


@dataclass(frozen=True)
class System:
    space: str  # "torus" | "symbolic"
    dim: int = 1
    alphabet: int = 2
    metric_base: int = 2
    generators: tuple = ()
    name: str = ""

    @property
    def k(self) -> int:
        return len(self.generators)

    @property
    def ultrametric(self) -> bool:
        return self.space == "symbolic"

    def apply_generator(self, i: int, p: Point) -> Point:
        """Image of ``p`` under generator ``i`` (1-based)."""
        if not 1 <= i <= self.k:
            raise IndexError(f"generator index {i} outside 1..{self.k}")
        g = self.generators[i - 1]
        if self.space == "symbolic":
            return p.shifted()
        y = g.apply_array(np.asarray(p, dtype=float)[None, :])[0]
        return tuple(float(v) for v in y)

    def compare(self, p: Point, q: Point) -> tuple[float, bool]:
        """Return ``(distance, resolved)``.

        ``resolved`` is False only for symbolic points whose stored data
        agree entirely; the distance is then reported as 0.
        """
        if self.space == "torus":
            return torus_distance(p, q), True
        try:
            s = first_disagreement(p, q)
        except DepthError:
            return 0.0, False
        if s is None:
            return 0.0, True
        return symbolic_metric(self.metric_base, s), True

    def distance(self, p: Point, q: Point) -> float:
        d, resolved = self.compare(p, q)
        if not resolved:
            raise DepthError("stored prefixes agree entirely; distance undecidable")
        return d

    def contains(self, p: Point) -> bool:
        if self.space == "torus":
            return (
                isinstance(p, tuple)
                and len(p) == self.dim
                and all(0.0 <= v < 1.0 for v in p)
            )
        return isinstance(p, SymbolicPoint) and all(
            0 <= s < self.alphabet for s in p.prefix + p.tail
        )

    def identical_generators(self) -> list[tuple[int, int]]:
        """Pairs (i, j), i < j, of generators that coincide as maps."""
        out = []
        for i in range(self.k):
            for j in range(i + 1, self.k):
                if self.generators[i] == self.generators[j]:
                    out.append((i + 1, j + 1))
        return out

    def describe(self) -> dict:
        d = {"space": self.space, "metric_base": self.metric_base, "name": self.name}
        if self.space == "torus":
            d["dim"] = self.dim
        else:
            d["alphabet"] = self.alphabet
        d["generators"] = [g.label() for g in self.generators]
        return d


def symbolic_metric(base: int, s: int) -> float:
    """``base**(-s)``; the single place this float is formed."""
    return float(base) ** (-s)


def wrap_distance(a: np.ndarray | float, b: np.ndarray | float):
    delta = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    return np.minimum(delta, 1.0 - delta)


def torus_distance(p: Sequence[float], q: Sequence[float]) -> float:
    return float(np.max(wrap_distance(p, q)))


def _check_self_map(gen: Generator, dim: int) -> None:
    if len(gen.slope) != dim or len(gen.offset) != dim:
        raise ConfigError(f"generator {gen.label()} does not match dimension {dim}")
    if gen.kind == "affine":
        if any(float(a) != int(a) for a in gen.slope):
            raise ConfigError(
                f"affine map {gen.label()} has a non-integer slope and does not "
                "descend to the torus"
            )
        return
    # contraction x -> a x + c on [0, 1): image is [min, max) with both ends inside
    for a, c in zip(gen.slope, gen.offset):
        if not 0.0 < abs(a) < 1.0:
            raise ConfigError(f"contraction {gen.label()} needs 0 < |scale| < 1")
        lo, hi = sorted((c, a + c))
        if lo < 0.0 or hi > 1.0:
            raise ConfigError(f"contraction {gen.label()} leaves [0,1)")
    # finite grid check of the image range
    grid = np.linspace(0.0, 1.0, 257, endpoint=False)[:, None] * np.ones((1, dim))
    img = gen.apply_array(grid)
    if np.any(img < 0.0) or np.any(img >= 1.0):
        raise ConfigError(f"generator {gen.label()} leaves [0,1)")


def _parse_generator(spec: Any, space: str, dim: int) -> Generator:
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind")
    if space == "symbolic":
        if kind != "shift":
            raise ConfigError(f"symbolic spaces support only the shift, got {kind!r}")
        return Generator("shift")
    if kind == "shift":
        raise ConfigError("shift generator requires a symbolic space")
    if kind == "affine":
        slope = spec.get("slope", 1)
        slope = tuple(slope) if isinstance(slope, (list, tuple)) else (slope,) * dim
        offset = spec.get("offset", 0.0)
        offset = tuple(offset) if isinstance(offset, (list, tuple)) else (offset,) * dim
        gen = Generator("affine", tuple(int(a) if float(a) == int(a) else float(a) for a in slope),
                        tuple(float(c) for c in offset))
    elif kind == "contraction":
        scale = spec.get("scale", 0.5)
        scale = tuple(scale) if isinstance(scale, (list, tuple)) else (scale,) * dim
        offset = spec.get("offset", 0.0)
        offset = tuple(offset) if isinstance(offset, (list, tuple)) else (offset,) * dim
        gen = Generator("contraction", tuple(float(a) for a in scale), tuple(float(c) for c in offset))
    else:
        raise ConfigError(f"unknown generator kind {kind!r}")
    _check_self_map(gen, dim)
    return gen


def build_system(config: dict) -> System:
    """Validate a declarative description and return a :class:`System`.

    >>> build_system({"space": {"kind": "torus", "dim": 1},
    ...               "generators": [{"kind": "affine", "slope": 2}]}).k
    1
    """
    space = config.get("space", {})
    if isinstance(space, str):
        space = {"kind": space}
    kind = space.get("kind")
    metric = space.get("metric")
    gens = config.get("generators") or []
    if not gens:
        raise ConfigError("at least one generator is required (k = 0)")
    if kind == "torus":
        if metric not in (None, "torus-sup"):
            raise ConfigError(f"metric {metric!r} does not match a torus space")
        dim = int(space.get("dim", 1))
        if dim < 1:
            raise ConfigError("torus dimension must be >= 1")
        parsed = tuple(_parse_generator(g, "torus", dim) for g in gens)
        return System("torus", dim=dim, generators=parsed, name=config.get("name", ""))
    if kind == "symbolic":
        if metric not in (None, "symbolic"):
            raise ConfigError(f"metric {metric!r} does not match a symbolic space")
        m = int(space.get("alphabet", 2))
        b = int(space.get("metric_base", 2))
        if m < 2 or b < 2:
            raise ConfigError("alphabet and metric base must be >= 2")
        parsed = tuple(_parse_generator(g, "symbolic", 0) for g in gens)
        return System("symbolic", alphabet=m, metric_base=b, generators=parsed,
                      name=config.get("name", ""))
    raise ConfigError(f"unknown space kind {kind!r}")


# convenience constructors used throughout tests and the harness

def full_shift(m: int = 2, base: int = 2, k: int = 1) -> System:
    return build_system({"space": {"kind": "symbolic", "alphabet": m, "metric_base": base},
                         "generators": ["shift"] * k, "name": f"shift{m}-b{base}-k{k}"})


def circle_maps(*slopes: int) -> System:
    return build_system({"space": {"kind": "torus", "dim": 1},
                         "generators": [{"kind": "affine", "slope": a} for a in slopes],
                         "name": "circle-x" + "-x".join(map(str, slopes))})


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class Potential:
    """Continuous potential ``f``.

    kinds: ``constant`` (value), ``affine`` (coeffs, value: ``value + coeffs.x``),
    ``first_symbol`` (table indexed by ``x_0``), ``tabulated`` (table over a
    regular grid of ``len(table)`` cells on the 1-torus).
    """

    kind: str
    value: float = 0.0
    coeffs: tuple = ()
    table: tuple = ()
    name: str = ""

    def __call__(self, p: Point) -> float:
        if isinstance(p, SymbolicPoint):
            return float(self.evaluate_symbols(np.asarray([p.expand(self.symbols_needed())]))[0])
        return float(self.evaluate_array(np.asarray(p, dtype=float)[None, :])[0])

    def symbols_needed(self) -> int:
        return 1 if self.kind == "first_symbol" else 0

    def evaluate_array(self, x: np.ndarray) -> np.ndarray:
        """Evaluate on torus points, shape (N, D)."""
        if self.kind == "constant":
            return np.full(x.shape[0], self.value)
        if self.kind == "affine":
            return self.value + x @ np.asarray(self.coeffs, dtype=float)
        if self.kind == "tabulated":
            t = np.asarray(self.table, dtype=float)
            cells = np.minimum((x[:, 0] * len(t)).astype(int), len(t) - 1)
            return t[cells]
        raise ConfigError(f"potential kind {self.kind!r} is not defined on the torus")

    def evaluate_symbols(self, seqs: np.ndarray) -> np.ndarray:
        """Evaluate on symbol arrays, shape (N, L) with L >= symbols_needed()."""
        if self.kind == "constant":
            return np.full(seqs.shape[0], self.value)
        t = np.asarray(self.table, dtype=float)
        if self.kind == "first_symbol":
            return t[seqs[:, 0]]
        raise ConfigError(f"potential kind {self.kind!r} is not defined on a shift")

    @property
    def norm(self) -> float:
        """``sup |f|`` over the whole space."""
        if self.kind == "constant":
            return abs(self.value)
        if self.kind == "affine":
            c = np.asarray(self.coeffs, dtype=float)
            hi = self.value + c[c > 0].sum()
            lo = self.value + c[c < 0].sum()
            return float(max(abs(hi), abs(lo)))
        return float(np.max(np.abs(self.table)))

    def lipschitz(self, system: System) -> float | None:
        """A Lipschitz constant w.r.t. ``system``'s metric, or None if unbounded."""
        if self.kind == "constant":
            return 0.0
        if self.kind == "first_symbol":
            # distinct first symbols means distance 1
            return float(max(self.table) - min(self.table))
        if self.kind == "affine":
            # valid only away from the wraparound seam; callers must respect that
            return float(np.sum(np.abs(self.coeffs)))
        return None

    def shifted(self, c: float) -> "Potential":
        """The potential ``f + c``."""
        if self.kind in ("constant", "affine"):
            return Potential(self.kind, self.value + c, self.coeffs, self.table, self.name + f"+{c}")
        return Potential(self.kind, self.value, self.coeffs,
                         tuple(v + c for v in self.table), self.name + f"+{c}")

    def describe(self) -> dict:
        return {"kind": self.kind, "value": self.value, "coeffs": list(self.coeffs),
                "table": list(self.table), "name": self.name}


def build_potential(config: dict | None, system: System) -> Potential:
    if not config:
        return Potential("constant", 0.0, name="zero")
    kind = config.get("kind", "constant")
    if kind == "constant":
        return Potential("constant", float(config.get("value", 0.0)), name=config.get("name", "const"))
    if kind == "affine":
        if system.space != "torus":
            raise ConfigError("affine potentials need a torus")
        coeffs = config.get("coeffs", [1.0] * system.dim)
        if len(coeffs) != system.dim:
            raise ConfigError("affine potential coefficient count must equal the dimension")
        return Potential("affine", float(config.get("value", 0.0)), tuple(map(float, coeffs)),
                         name=config.get("name", "affine"))
    if kind == "first_symbol":
        if system.space != "symbolic":
            raise ConfigError("first_symbol potentials need a symbolic space")
        table = tuple(map(float, config["table"]))
        if len(table) != system.alphabet:
            raise ConfigError("first_symbol table must have one entry per symbol")
        return Potential("first_symbol", table=table, name=config.get("name", "first-symbol"))
    if kind == "tabulated":
        table = tuple(map(float, config["table"]))
        if not table:
            raise ConfigError("empty potential table")
        if system.space != "torus" or system.dim != 1:
            raise ConfigError("tabulated potentials are supported on the 1-torus only")
        return Potential("tabulated", table=table, name=config.get("name", "tabulated"))
    raise ConfigError(f"unknown potential kind {kind!r}")


# ---------------------------------------------------------------------------
# samples


@dataclass(frozen=True)
class SampleSet:
    """Finite stand-in for a subset ``Z`` of the space."""

    points: tuple
    provenance: str = "explicit"
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        pts = tuple(self.points)
        if not pts:
            raise ValueError("sample set must be nonempty")
        pts = tuple(tuple(float(v) for v in p) if not isinstance(p, SymbolicPoint) else p
                    for p in pts)
        index = {}
        for i, p in enumerate(pts):
            if p in index:
                raise ValueError(f"duplicate sample point {p!r}")
            index[p] = i
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    def __contains__(self, p) -> bool:
        return p in self._index

    def index_of(self, p) -> int:
        return self._index[p]

    def subset(self, indices: Iterable[int], provenance: str | None = None) -> "SampleSet":
        return SampleSet(tuple(self.points[i] for i in indices),
                         provenance or f"{self.provenance}/subset")

    def union(self, other: "SampleSet") -> "SampleSet":
        extra = tuple(p for p in other.points if p not in self._index)
        return SampleSet(self.points + extra, f"{self.provenance}|{other.provenance}")


def cylinder_words(m: int, depth: int) -> np.ndarray:
    """All length-``depth`` words over ``m`` symbols in lexicographic order."""
    if depth == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices((m,) * depth).reshape(depth, -1).T
    return grids.astype(np.int64)


def cylinder_complete(system: System, depth: int, tail: tuple = (0,)) -> SampleSet:
    """One representative ``w + tail^inf`` per length-``depth`` cylinder ``w``."""
    if system.space != "symbolic":
        raise ConfigError("cylinder-complete samples need a symbolic space")
    words = cylinder_words(system.alphabet, depth)
    pts = tuple(SymbolicPoint(tuple(w), tail) for w in words.tolist())
    return SampleSet(pts, f"cylinder-complete:{depth}")


def torus_grid(system: System, size: int) -> SampleSet:
    """Regular grid with ``size`` points per axis (``i / size``)."""
    if system.space != "torus":
        raise ConfigError("grid samples need a torus")
    axes = [np.arange(size) / size] * system.dim
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, system.dim)
    return SampleSet(tuple(map(tuple, mesh.tolist())), f"grid:{size}")


def random_sample(system: System, size: int, seed: int, depth: int = 24) -> SampleSet:
    rng = np.random.default_rng(seed)
    if system.space == "torus":
        pts = rng.random((size, system.dim))
        uniq = dict.fromkeys(map(tuple, pts.tolist()))
        return SampleSet(tuple(uniq), f"random:{seed}")
    words = rng.integers(0, system.alphabet, size=(size, depth))
    uniq = dict.fromkeys(SymbolicPoint(tuple(w), (0,)) for w in words.tolist())
    return SampleSet(tuple(uniq), f"random:{seed}")


def build_sample(config: dict | None, system: System) -> SampleSet:
    config = config or {}
    kind = config.get("kind", "grid" if system.space == "torus" else "cylinder")
    if kind == "grid":
        return torus_grid(system, int(config.get("size", 256)))
    if kind == "random":
        return random_sample(system, int(config.get("size", 256)), int(config.get("seed", 0)),
                             int(config.get("depth", 24)))
    if kind == "cylinder":
        return cylinder_complete(system, int(config.get("depth", 8)))
    raise ConfigError(f"unknown sample kind {kind!r}")


def load_config(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
