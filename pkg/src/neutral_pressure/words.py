"""Formal word levels of the free semigroup and orbit tables.

A word ``(i1, ..., im)`` is evaluated left to right: ``i1`` is applied first,
so the image of ``w + (j,)`` is ``f_j`` applied to the image of ``w``.  Words
are formal; two words inducing the same map are still counted separately.
"""
from __future__ import annotations

import itertools
import warnings
from typing import Iterator

from .systems import Point, System

INT64_MAX = 2**63 - 1
DEFAULT_TABLE_CAP = 10**6


def level_size(k: int, n: int, limit: int = INT64_MAX) -> int:
    """``|G_n| = sum_{i<n} k**i``, failing loudly above ``limit``."""
    if k < 1 or n < 1:
        raise ValueError("level_size needs k >= 1 and n >= 1")
    total = n if k == 1 else (k**n - 1) // (k - 1)
    if total > limit:
        raise OverflowError(f"|G_{n}| for k={k} exceeds {limit}")
    return total


def iter_words(k: int, n: int) -> Iterator[tuple]:
    """All words of length ``0..n-1``, by length then lexicographically."""
    for length in range(n):
        yield from itertools.product(range(1, k + 1), repeat=length)


def iter_orbit(system: System, p: Point, n: int) -> Iterator[tuple[tuple, Point]]:
    """Depth-first ``(word, image)`` pairs for all words of length < n."""
    stack = [((), p)]
    k = system.k
    while stack:
        word, image = stack.pop()
        yield word, image
        if len(word) + 1 < n:
            # reversed so that children come out in increasing letter order
            for i in range(k, 0, -1):
                stack.append((word + (i,), system.apply_generator(i, image)))


def orbit_images(system: System, p: Point, n: int, cap: int = DEFAULT_TABLE_CAP) -> dict:
    """Table ``word -> image`` over ``G_n``.

    Tables larger than ``cap`` entries are not materialized; use
    :func:`iter_orbit` to stream them instead.
    """
    size = level_size(system.k, n)
    if size > cap:
        raise MemoryError(f"|G_{n}| = {size} exceeds the table cap {cap}; stream with iter_orbit")
    if system.identical_generators():
        warnings.warn(
            f"generators {system.identical_generators()} coincide; words are counted formally",
            stacklevel=2,
        )
    return dict(iter_orbit(system, p, n))
