"""Exact evaluation of the covariance contraction tensors.

The expectation of a product of embedded matrices reduces, per pair
partition, to a normalized contraction of per-subset tensors T^(A):

    (1/d^N) sum over index tuples i^1..i^2m of
        prod_v T^(A_{c_v})[i^{c_v} i^{c_v+1}, i^{d_v} i^{d_v+1}]

(cyclically, i^{2m+1} = i^1).  The contraction factorizes over
coordinates r; each factor is d to an integer power determined by the
connected components of a small delta-constraint graph, so everything
here is exact integer arithmetic.  A literal brute-force sum over index
tuples provides the independent check.

The trace-variance analysis uses the same machinery with a two-cycle
successor (two traces), giving the Upsilon factors.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from .errors import ParameterError, SizeGuardError
from .partitions import PairPartition
from .weights import Subset

BRUTE_FORCE_GUARD = 10_000_000


@dataclass(frozen=True)
class PowerOfD:
    """An exact value d^exponent (d from context)."""

    exponent: int

    def value(self, d: int) -> float:
        return float(d) ** self.exponent

    def as_fraction(self, d: int) -> Fraction:
        if self.exponent >= 0:
            return Fraction(d**self.exponent)
        return Fraction(1, d**(-self.exponent))


@dataclass(frozen=True)
class ContractionProblem:
    """d, ambient N, the per-line subsets, and the pair partition.

    ``sets`` lists one subset per line opener (A_{c_1}, ..., A_{c_m});
    only those enter the tensors, since the covariance delta forces
    A_{c_v} = A_{d_v}.
    """

    d: int
    N: int
    sets: tuple[int, ...]
    partition: PairPartition

    def __post_init__(self):
        if self.d < 2:
            raise ParameterError(f"d must be >= 2, got {self.d}")
        if len(self.sets) != self.partition.m:
            raise ParameterError(
                f"need one subset per line: {self.partition.m} lines, "
                f"{len(self.sets)} sets")
        for mask in self.sets:
            if mask < 0 or mask >> self.N:
                raise ParameterError(f"mask {mask:#x} outside 1..{self.N}")

    @classmethod
    def from_subsets(cls, d: int, N: int, sets, partition) -> "ContractionProblem":
        masks = tuple(s.mask if isinstance(s, Subset) else int(s) for s in sets)
        if not isinstance(partition, PairPartition):
            partition = PairPartition.from_lines(partition)
        return cls(d, N, masks, partition)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            self.parent[rx] = ry

    def components(self) -> int:
        return sum(1 for i, p in enumerate(self.parent) if self.find(i) == i)


def _graph_exponent(problem: ContractionProblem, r: int, successor) -> tuple[int, int]:
    """(#components, n_r) of the delta graph at coordinate r.

    Lines whose subset misses r contribute successor edges
    {c, succ(c)}, {d, succ(d)}; lines containing r contribute the
    crossing edges {c, succ(d)}, {succ(c), d}.
    """
    two_m = 2 * problem.partition.m
    uf = _UnionFind(two_m)
    bit = 1 << (r - 1)
    n_r = 0
    for (c, d), mask in zip(problem.partition.lines, problem.sets):
        if mask & bit:
            n_r += 1
            uf.union(c - 1, successor(d) - 1)
            uf.union(successor(c) - 1, d - 1)
        else:
            uf.union(c - 1, successor(c) - 1)
            uf.union(d - 1, successor(d) - 1)
    return uf.components(), n_r


def _cyclic_successor(two_m: int):
    return lambda x: 1 if x == two_m else x + 1


def _two_cycle_successor(m: int):
    def succ(x: int) -> int:
        if x == m:
            return 1
        if x == 2 * m:
            return m + 1
        return x + 1
    return succ


def theta_r(problem: ContractionProblem, r: int) -> PowerOfD:
    """Per-coordinate factor of the cyclic (single-trace) contraction.

    Value is d^(#components - 1 - n_r), always in (0, 1].
    """
    if not 1 <= r <= problem.N:
        raise ParameterError(f"coordinate {r} outside 1..{problem.N}")
    comp, n_r = _graph_exponent(problem, r, _cyclic_successor(2 * problem.partition.m))
    return PowerOfD(comp - 1 - n_r)


def theta_product(problem: ContractionProblem) -> PowerOfD:
    """Product of theta_r over all coordinates (exact exponent).

    Coordinates outside every subset contribute a factor 1 and are
    skipped.
    """
    union = 0
    for mask in problem.sets:
        union |= mask
    exponent = 0
    for r in range(1, problem.N + 1):
        if union & (1 << (r - 1)):
            exponent += theta_r(problem, r).exponent
    return PowerOfD(exponent)


def upsilon_r(problem: ContractionProblem, r: int) -> PowerOfD:
    """Per-coordinate factor for the two-trace (variance) contraction.

    Uses the successor with cycles (1..m)(m+1..2m); value is
    d^(#components - 2 - n_r), in (0, 1].
    """
    if not 1 <= r <= problem.N:
        raise ParameterError(f"coordinate {r} outside 1..{problem.N}")
    comp, n_r = _graph_exponent(problem, r, _two_cycle_successor(problem.partition.m))
    return PowerOfD(comp - 2 - n_r)


def upsilon_product(problem: ContractionProblem) -> PowerOfD:
    union = 0
    for mask in problem.sets:
        union |= mask
    exponent = 0
    for r in range(1, problem.N + 1):
        if union & (1 << (r - 1)):
            exponent += upsilon_r(problem, r).exponent
    return PowerOfD(exponent)


def crossing_product_exponent(problem: ContractionProblem) -> int:
    """Exponent of prod over crossing line pairs of d^(-2|A_i ∩ A_j|)."""
    lines = problem.partition.lines
    exponent = 0
    for i in range(len(lines)):
        a, b = lines[i]
        for j in range(i + 1, len(lines)):
            u, v = lines[j]
            if a < u < b < v or u < a < v < b:
                overlap = bin(problem.sets[i] & problem.sets[j]).count("1")
                exponent -= 2 * overlap
    return exponent


def has_empty_triple_intersections(problem: ContractionProblem) -> bool:
    sets = problem.sets
    m = len(sets)
    for i in range(m):
        for j in range(i + 1, m):
            ij = sets[i] & sets[j]
            if not ij:
                continue
            for k in range(j + 1, m):
                if ij & sets[k]:
                    return False
    return True


def brute_force_contraction(problem: ContractionProblem,
                            guard: int = BRUTE_FORCE_GUARD) -> Fraction:
    """Literal sum over all index tuples, exact rational arithmetic.

    Each tuple contributes a 0/1 delta product scaled by a fixed power
    of d, so the result is (#surviving tuples) / d^(N + sum |A_{c_v}|).
    Independent of the graph evaluation; use on tiny instances only.
    """
    d, N = problem.d, problem.N
    m = problem.partition.m
    two_m = 2 * m
    tuples = (d**N) ** two_m
    if tuples > guard:
        raise SizeGuardError(
            f"d^(2mN) = {tuples} exceeds brute-force guard {guard}")

    set_bits = [[(mask >> (r - 1)) & 1 for r in range(1, N + 1)]
                for mask in problem.sets]
    lines = problem.partition.lines

    def digits(x: int) -> tuple[int, ...]:
        return tuple((x // d**t) % d for t in range(N))

    all_digits = [digits(x) for x in range(d**N)]
    count = 0
    for tup in product(range(d**N), repeat=two_m):
        ok = True
        for v, (c, dd) in enumerate(lines):
            ic = all_digits[tup[c - 1]]
            icn = all_digits[tup[c % two_m]]       # i^{c+1}, cyclic
            idd = all_digits[tup[dd - 1]]
            idn = all_digits[tup[dd % two_m]]      # i^{d+1}, cyclic
            bits = set_bits[v]
            for r in range(N):
                if bits[r]:
                    if ic[r] != idn[r] or icn[r] != idd[r]:
                        ok = False
                        break
                else:
                    if ic[r] != icn[r] or idd[r] != idn[r]:
                        ok = False
                        break
            if not ok:
                break
        if ok:
            count += 1
    scale = N + sum(bin(mask).count("1") for mask in problem.sets)
    return Fraction(count, d**scale)
