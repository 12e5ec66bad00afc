"""Exact finite-n values on full shifts, from cylinder counting only.

On the full ``m``-shift with metric ``b**-s`` (``s`` the first disagreement),
two points are in the same neutralized ball of depth ``n`` iff they agree on
their first ``s_min(n)`` symbols.  Packing with all depth-``n`` cylinders of
that length then gives the root of the packing sum in closed form.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

from .words import level_size

BOUNDARY_TOL = 1e-9


def forced_cylinder_length(n: int, eps: float, b: int = 2, closed: bool = True) -> int:
    """Least ``s`` with ``b**-(s-n+1) <= exp(-n eps)`` (``<`` when open).

    Solved through ``x = n eps / ln b``: the condition reads ``s - n + 1 >= x``
    (``> x`` when open).  Values of ``x`` within ``1e-9`` of an integer are
    treated as exact boundaries.
    """
    if n < 1 or eps <= 0:
        raise ValueError("need n >= 1 and eps > 0")
    if b < 2:
        raise ValueError("metric base must be >= 2")
    x = n * eps / math.log(b)
    k = round(x)
    if abs(x - k) < BOUNDARY_TOL:
        e = k if closed else k + 1
    else:
        e = math.ceil(x)
    return n - 1 + e


@dataclass(frozen=True)
class ShiftOracleSpec:
    m: int
    b: int
    k: int
    table: tuple
    eps: float
    n: int
    closed: bool = True

    def __post_init__(self):
        if self.m < 2 or self.b < 2 or self.k < 1:
            raise ValueError("need m >= 2, b >= 2, k >= 1")
        if len(self.table) != self.m:
            raise ValueError("potential table needs one value per symbol")
        object.__setattr__(self, "table", tuple(float(v) for v in self.table))

    @property
    def s_min(self) -> int:
        return forced_cylinder_length(self.n, self.eps, self.b, self.closed)


def _log_partition(table: Sequence[float]) -> float:
    top = max(table)
    return top + math.log(math.fsum(math.exp(v - top) for v in table))


def shift_oracle_alpha(spec: ShiftOracleSpec) -> float:
    """Root of ``m**(s-n) * (sum_j e^{f(j)})**n * e^{-alpha n} = 1``."""
    if spec.k != 1:
        raise ValueError("shift_oracle_alpha covers a single shift generator; "
                         "use multi_generator_identical_shift_alpha")
    s, n = spec.s_min, spec.n
    return ((s - n) * math.log(spec.m) + n * _log_partition(spec.table)) / n


def shift_oracle_limit(m: int, b: int, table: Sequence[float], eps: float) -> float:
    """``n -> inf`` limit: ``ln sum e^{f(j)} + (eps / ln b) ln m``."""
    return _log_partition(table) + eps / math.log(b) * math.log(m)


def multi_generator_identical_shift_alpha(m: int, eps: float, k: int, n: int, b: int = 2,
                                          closed: bool = True) -> float:
    """``s_min(n) ln m / |G_n|`` for ``k`` copies of the shift and ``f = 0``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return forced_cylinder_length(n, eps, b, closed) * math.log(m) / level_size(k, n)


def oracle_fixtures(ns: Sequence[int] = range(4, 13), eps_grid: Sequence[float] = (0.05, 0.1, 0.2),
                    potentials: Sequence[Sequence[float]] = ((0.0, 0.0), (0.0, 0.5), (0.0, 1.0))) -> dict:
    rows = []
    for table in potentials:
        for eps in eps_grid:
            for n in ns:
                spec = ShiftOracleSpec(len(table), 2, 1, tuple(table), eps, n)
                rows.append({**asdict(spec), "s_min": spec.s_min, "alpha": shift_oracle_alpha(spec)})
    multi = []
    for k in (2, 3):
        for eps in eps_grid:
            for n in ns:
                multi.append({"m": 2, "b": 2, "k": k, "eps": eps, "n": n,
                              "s_min": forced_cylinder_length(n, eps, 2),
                              "alpha": multi_generator_identical_shift_alpha(2, eps, k, n)})
    return {"schema": 1, "shift": rows, "identical_shifts": multi}


def write_fixtures(path: str | Path, **kwargs) -> Path:
    path = Path(path)
    path.write_text(json.dumps(oracle_fixtures(**kwargs), indent=1, sort_keys=True) + "\n")
    return path
