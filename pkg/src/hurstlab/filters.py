"""Finite filters annihilating polynomials, their dilatations and the
generalized variations they induce on a sampled path.

A filter ``a = (a_0, ..., a_q)`` belongs to the class of order ``m`` when its
first ``m`` discrete moments vanish and the ``m``-th does not.  The
second-order filter ``(1, -2, 1)`` is the workhorse of every estimator in
this package.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFilter, MomentConditionViolated, PathTooShort

MOMENT_TOL = 1e-12


def _moment(coeffs: np.ndarray, p: int) -> float:
    ell = np.arange(coeffs.size, dtype=float)
    return float(np.sum(ell**p * coeffs)) if p > 0 else float(np.sum(coeffs))


@dataclass(frozen=True, eq=False)
class Filter:
    """Filter coefficients with a certified moment order ``m``.

    ``coeffs`` may carry interior zeros (dilated filters) but never trailing
    ones, so ``q == len(coeffs) - 1`` is the true support length.
    """

    coeffs: np.ndarray
    m: int

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def q(self) -> int:
        return self.coeffs.size - 1

    def __eq__(self, other):
        if not isinstance(other, Filter):
            return NotImplemented
        return self.m == other.m and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash((self.m, self.coeffs.tobytes()))

    def __repr__(self):
        return f"Filter({self.coeffs.tolist()}, m={self.m})"


def make_filter(coeffs) -> Filter:
    """Validate ``coeffs`` and return a :class:`Filter` with its moment order.

    Raises :class:`MomentConditionViolated` when the coefficients do not sum
    to zero and :class:`DegenerateFilter` when every coefficient vanishes.
    """
    c = np.asarray(coeffs, dtype=float).ravel()
    if c.size < 2:
        raise DegenerateFilter(f"a filter needs at least 2 coefficients, got {c.size}")
    if np.all(np.abs(c) <= MOMENT_TOL):
        raise DegenerateFilter("all filter coefficients vanish")
    nz = np.flatnonzero(np.abs(c) > MOMENT_TOL)
    c = c[: nz[-1] + 1]
    if c.size < 2:
        raise MomentConditionViolated(
            f"coefficient sum {c.sum():g} != 0 (single non-zero tap)"
        )
    if abs(_moment(c, 0)) > MOMENT_TOL:
        raise MomentConditionViolated(f"coefficient sum {_moment(c, 0):g} != 0")
    # A filter of length q+1 cannot annihilate every polynomial of degree q,
    # so the search below always stops at some m <= q.
    m = 1
    while abs(_moment(c, m)) <= MOMENT_TOL:
        m += 1
    return Filter(c, m)


SECOND_ORDER = make_filter([1.0, -2.0, 1.0])


def dilate(f: Filter, j: int) -> Filter:
    """Spread the taps of ``f`` onto the lattice ``j * Z``."""
    if int(j) != j or j < 1:
        raise ValueError(f"dilatation factor must be a positive integer, got {j}")
    j = int(j)
    out = np.zeros(j * f.q + 1)
    out[::j] = f.coeffs
    return Filter(out, f.m)


def _values(path) -> np.ndarray:
    return np.asarray(getattr(path, "values", path), dtype=float)


def apply_filter(f: Filter, values: np.ndarray) -> np.ndarray:
    """Return ``sum_l a_l x[k + l]`` for every k with a full support."""
    x = np.asarray(values, dtype=float)
    count = x.size - f.q
    if count <= 0:
        return np.empty(0)
    out = np.zeros(count)
    for ell, a in enumerate(f.coeffs):
        if a != 0.0:
            out += a * x[ell : ell + count]
    return out


def generalized_variations(f: Filter, path) -> np.ndarray:
    """Generalized variations of a path observed at ``k/n, k = 1..n-1``.

    Entry ``k-1`` of the result is ``V Z(k/n) = sum_l a_l Z((k+l)/n)`` for
    ``k = 1 .. n-1-q``.
    """
    x = _values(path)
    if x.size < f.q + 2:
        raise PathTooShort(
            f"path of length {x.size} is too short for a filter with q={f.q} "
            f"(need at least {f.q + 2} values)"
        )
    return apply_filter(f, x)
