"""Pair partitions, crossing numbers and q-deformed Gaussian moments.

A pair partition of {1,...,2m} is a perfect matching into m "lines";
two lines {a,b}, {u,v} (a<b, u<v) cross when a<u<b<v or u<a<v<b.  The
mixed moments of a q-deformed Gaussian family with covariance kernel
``gamma`` are

    moment(word) = sum over pair partitions pi of
                   q^(crossings(pi)) * prod_v gamma[w[c_v], w[d_v]]

with odd-length words vanishing identically.  This module is the exact
combinatorial oracle the Monte Carlo estimates are checked against:
with integer or Fraction inputs the sums are evaluated in exact
arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterator, Sequence

import numpy as np

from . import backend
from .errors import ParameterError, SizeGuardError

#: Enumeration guard: (2m-1)!! grows fast; 10 lines is already 6.5e8
#: partitions.  Overridable per call.
DEFAULT_MAX_LINES = 10


@dataclass(frozen=True)
class PairPartition:
    """A pair partition in canonical form.

    ``lines`` is a tuple of (c, d) pairs with c < d, sorted by c; all
    of 1..2m appear exactly once.
    """

    lines: tuple[tuple[int, int], ...]

    @property
    def m(self) -> int:
        return len(self.lines)

    @classmethod
    def from_lines(cls, lines) -> "PairPartition":
        """Canonicalize and validate an iterable of 2-element pairs."""
        canon = tuple(sorted((min(c, d), max(c, d)) for c, d in lines))
        m = len(canon)
        seen = [x for pair in canon for x in pair]
        if sorted(seen) != list(range(1, 2 * m + 1)):
            raise ParameterError(
                f"lines must cover 1..{2*m} exactly once, got {lines!r}")
        for c, d in canon:
            if c == d:
                raise ParameterError(f"degenerate line ({c},{d})")
        return cls(canon)

    def __iter__(self):
        return iter(self.lines)


def crossing_number(partition: PairPartition | Sequence[tuple[int, int]]) -> int:
    """Number of crossing line pairs of a pair partition.

    >>> crossing_number([(1, 2), (3, 4)])
    0
    >>> crossing_number([(1, 3), (2, 4)])
    1
    """
    lines = list(partition)
    n = 0
    for i in range(len(lines)):
        a, b = lines[i]
        for j in range(i + 1, len(lines)):
            u, v = lines[j]
            if a < u < b < v or u < a < v < b:
                n += 1
    return n


def iter_pair_partitions(m: int, max_lines: int = DEFAULT_MAX_LINES) -> Iterator[PairPartition]:
    """Lazily enumerate all (2m-1)!! pair partitions of {1,...,2m}.

    Order is deterministic: the smallest unmatched element is matched
    with each larger unmatched element in increasing order, which
    yields lexicographic order on the canonical form.
    """
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    if m > max_lines:
        raise SizeGuardError(
            f"m={m} exceeds enumeration guard {max_lines} "
            f"((2m-1)!! = {double_factorial(2 * m - 1)} partitions)")

    def rec(unmatched: tuple[int, ...]):
        if not unmatched:
            yield ()
            return
        c = unmatched[0]
        for i in range(1, len(unmatched)):
            d = unmatched[i]
            rest = unmatched[1:i] + unmatched[i + 1:]
            for tail in rec(rest):
                yield ((c, d),) + tail

    for lines in rec(tuple(range(1, 2 * m + 1))):
        yield PairPartition(lines)


def enumerate_pair_partitions(m: int, max_lines: int = DEFAULT_MAX_LINES):
    """Alias for :func:`iter_pair_partitions` (lazy; list() for small m)."""
    return iter_pair_partitions(m, max_lines=max_lines)


def double_factorial(n: int) -> int:
    """(n)!! for odd n >= -1; counts pair partitions via (2m-1)!!."""
    out = 1
    for k in range(n, 1, -2):
        out *= k
    return out


def crossing_histogram(m: int, max_lines: int = DEFAULT_MAX_LINES) -> list[int]:
    """Counts of pair partitions of {1..2m} by crossing number.

    Entry i is the number of partitions with exactly i crossings, for
    i = 0 .. m(m-1)/2.  The coefficients are exact integers; entry 0 is
    the Catalan number C_m and the total is (2m-1)!!.
    """
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    if m > max_lines:
        raise SizeGuardError(f"m={m} exceeds enumeration guard {max_lines}")
    return [int(x) for x in backend.crossing_histogram(m)]


@dataclass(frozen=True)
class MomentSpec:
    """A mixed-moment request: deformation q, index word, covariance.

    ``gamma`` is any square 2-D indexable (list of lists, ndarray,
    Fractions allowed) giving the covariance kernel on the label set;
    ``word`` holds integer labels indexing into it.
    """

    q: float | Fraction
    word: tuple[int, ...]
    gamma: Sequence[Sequence]

    def __post_init__(self):
        if len(self.word) < 1:
            raise ParameterError("word must have length >= 1")
        if not (0 <= self.q <= 1):
            raise ParameterError(f"q must lie in [0,1], got {self.q}")
        k = len(self.gamma)
        for row in self.gamma:
            if len(row) != k:
                raise ParameterError("gamma must be square")
        if any(not (0 <= w < k) for w in self.word):
            raise ParameterError("word labels must index gamma")


def q_gaussian_moment(spec: MomentSpec, max_lines: int = DEFAULT_MAX_LINES):
    """Mixed moment of q-deformed Gaussian variables (exact oracle).

    Returns 0 for odd word length without enumerating.  With a Rational
    q and exact gamma entries the result is exact (Fraction/int);
    otherwise a float computed by the enumeration backend.
    """
    n = len(spec.word)
    if n % 2 == 1:
        return 0
    m = n // 2
    if m > max_lines:
        raise SizeGuardError(f"word length {n} exceeds guard 2*{max_lines}")

    exact_q = isinstance(spec.q, Rational)
    gamma_vals = [[spec.gamma[a][b] for b in range(len(spec.gamma))]
                  for a in range(len(spec.gamma))]
    exact_gamma = all(isinstance(v, Rational) for row in gamma_vals for v in row)

    uniform = all(v == gamma_vals[0][0] for row in gamma_vals for v in row)
    if uniform and gamma_vals[0][0] == 1:
        # Gamma identically 1: the moment is the crossing polynomial.
        hist = crossing_histogram(m, max_lines=max_lines)
        if exact_q:
            q = Fraction(spec.q)
            return sum(c * q**i for i, c in enumerate(hist))
        return float(sum(c * spec.q**i for i, c in enumerate(hist)))

    if exact_q and exact_gamma:
        q = Fraction(spec.q)
        total = Fraction(0)
        for part in iter_pair_partitions(m, max_lines=max_lines):
            prod = Fraction(1)
            for c, d in part.lines:
                prod *= Fraction(gamma_vals[spec.word[c - 1]][spec.word[d - 1]])
            total += q ** crossing_number(part) * prod
        return total

    g = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            g[a, b] = float(gamma_vals[spec.word[a]][spec.word[b]])
    return float(backend.weighted_moment_sum(m, float(spec.q), g))


def wick_sum(cov, max_lines: int = DEFAULT_MAX_LINES) -> float:
    """Gaussian Wick sum: sum over pair partitions of prod cov[c-1, d-1].

    ``cov`` is a 2m x 2m symmetric matrix; this is the classical
    pairing formula for E[X_1 ... X_2m] of a centered Gaussian vector
    and serves as the internal oracle for Gaussian-family moments.
    """
    cov = np.asarray(cov, dtype=np.float64)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ParameterError("cov must be a square matrix")
    n = cov.shape[0]
    if n % 2 == 1:
        raise ParameterError(f"cov has odd dimension {n}; no pair partitions")
    if not np.allclose(cov, cov.T, atol=1e-12 * max(1.0, np.abs(cov).max())):
        raise ParameterError("cov must be symmetric")
    m = n // 2
    if m > max_lines:
        raise SizeGuardError(f"dimension {n} exceeds guard 2*{max_lines}")
    return float(backend.weighted_moment_sum(m, 1.0, cov))


def catalan_number(m: int) -> int:
    """Catalan number by the convolution recurrence (independent oracle)."""
    cats = [1]
    for k in range(m):
        cats.append(sum(cats[i] * cats[k - i] for i in range(k + 1)))
    return cats[m]


def q_moment_polynomial(m: int, max_lines: int = DEFAULT_MAX_LINES) -> list[int]:
    """Integer coefficients of sum_pi q^crossings(pi), ascending powers."""
    return crossing_histogram(m, max_lines=max_lines)


def gaussian_moment_factorial(m: int) -> int:
    """(2m-1)!!, the classical Gaussian 2m-th moment."""
    return double_factorial(2 * m - 1)


def binomial(n: int, k: int) -> int:
    return math.comb(n, k)
