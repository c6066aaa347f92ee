"""Subset weight schemes and diagnostics for the limit-theorem assumptions.

A weight scheme assigns sigma_A to every subset A of {1,...,N} with
sum_A sigma_A^2 = 1, so the squares define a probability measure on
subsets.  Two families matter in practice:

* Bernoulli(c): sigma_A^2 = p^|A| (1-p)^(N-|A|) with p = c/sqrt(N) —
  each position joins A independently;
* FixedSize(c): uniform on subsets of size floor(c*sqrt(N)).

Both drive the deformation parameter to q = exp(-(1-1/d^2) c^2): for
two independent draws, |A ∩ B| becomes Poisson(c^2) as N grows, and
q = E[d^(-2|A∩B|)] in the limit.  The diagnostics here estimate how far
a finite-N scheme is from that limit (triple-overlap probability,
total-variation distance of the coincidence law from Poisson, the
exponential-sum controlling the variance bound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .counters import DOMAIN_SUBSET, KeyStream, derive_key, uniform_at
from .errors import ParameterError

_DIAG_BLOCK = 4096  # trials per keyed sampling block


@dataclass(frozen=True)
class Subset:
    """A subset of {1,...,n} stored as a bitmask (bit r-1 <-> element r)."""

    n: int
    mask: int

    def __post_init__(self):
        if self.mask < 0 or self.mask >> self.n:
            raise ParameterError(
                f"mask {self.mask:#x} has bits outside 1..{self.n}")

    @classmethod
    def from_members(cls, n: int, members: Iterable[int]) -> "Subset":
        mask = 0
        for r in members:
            if not 1 <= r <= n:
                raise ParameterError(f"element {r} outside 1..{n}")
            mask |= 1 << (r - 1)
        return cls(n, mask)

    @property
    def members(self) -> tuple[int, ...]:
        return tuple(r for r in range(1, self.n + 1)
                     if (self.mask >> (r - 1)) & 1)

    @property
    def size(self) -> int:
        return bin(self.mask).count("1")


class WeightScheme:
    """Base class; subclasses implement sigma_squared and sampling."""

    kind: str
    N: int
    d: int

    def sigma_squared(self, subset: Subset | int) -> float:
        raise NotImplementedError

    def sigma(self, subset: Subset | int) -> float:
        return math.sqrt(self.sigma_squared(subset))

    def sample_subset(self, stream: KeyStream) -> Subset:
        raise NotImplementedError

    def sample_size_batch(self, count: int, key: int) -> np.ndarray:
        """|A| for `count` independent draws (vectorized)."""
        raise NotImplementedError

    def sample_bool_batch(self, count: int, key: int) -> np.ndarray:
        """(count, N) boolean membership matrix of independent draws."""
        raise NotImplementedError

    def weights_by_mask(self) -> np.ndarray:
        """sigma_A for all 2^N bitmasks (requires small N)."""
        if self.N > 24:
            raise ParameterError(f"cannot enumerate 2^{self.N} subsets")
        masks = np.arange(1 << self.N)
        sizes = _popcount(masks)
        return self._sigma_from_sizes(masks, sizes)

    def _sigma_from_sizes(self, masks, sizes):
        raise NotImplementedError

    def q_limit(self) -> float:
        """Limiting deformation parameter, when the scheme defines one."""
        raise ParameterError(f"{self.kind} scheme has no closed-form q")


def _popcount(masks: np.ndarray) -> np.ndarray:
    out = np.zeros_like(masks)
    m = masks.copy()
    while m.any():
        out += m & 1
        m >>= 1
    return out


def _check_subset(scheme: WeightScheme, subset: Subset | int) -> int:
    if isinstance(subset, Subset):
        if subset.n != scheme.N:
            raise ParameterError(
                f"subset ambient size {subset.n} != scheme N {scheme.N}")
        return subset.mask
    return int(subset)


class BernoulliScheme(WeightScheme):
    """sigma_A^2 = p^|A| (1-p)^(N-|A|), p = c/sqrt(N)."""

    kind = "bernoulli"

    def __init__(self, N: int, c: float, d: int = 2):
        if N < 1 or d < 2:
            raise ParameterError("need N >= 1 and d >= 2")
        if c <= 0:
            raise ParameterError(f"c must be positive, got {c}")
        p = c / math.sqrt(N)
        if p >= 1.0:
            raise ParameterError(
                f"c/sqrt(N) = {p:.4g} >= 1: weights are not probabilities "
                f"(raise N or lower c)")
        self.N, self.c, self.d, self.p = N, c, d, p

    def sigma_squared(self, subset):
        mask = _check_subset(self, subset)
        k = bin(mask).count("1")
        return self.p**k * (1.0 - self.p) ** (self.N - k)

    def _sigma_from_sizes(self, masks, sizes):
        return np.sqrt(self.p**sizes * (1.0 - self.p) ** (self.N - sizes))

    def sample_subset(self, stream: KeyStream) -> Subset:
        bits = stream.uniforms(self.N) < self.p
        mask = 0
        for r in np.nonzero(bits)[0]:
            mask |= 1 << int(r)
        return Subset(self.N, mask)

    def sample_bool_batch(self, count, key):
        ctr = np.arange(count * self.N, dtype=np.uint64)
        return (uniform_at(key, ctr) < self.p).reshape(count, self.N)

    def sample_size_batch(self, count, key):
        return self.sample_bool_batch(count, key).sum(axis=1)

    def q_limit(self) -> float:
        return q_from_c(self.c, self.d)


class FixedSizeScheme(WeightScheme):
    """Uniform measure on subsets of size floor(c*sqrt(N))."""

    kind = "fixedsize"

    def __init__(self, N: int, c: float, d: int = 2):
        if N < 1 or d < 2:
            raise ParameterError("need N >= 1 and d >= 2")
        if c <= 0:
            raise ParameterError(f"c must be positive, got {c}")
        s = math.floor(c * math.sqrt(N))
        if s > N:
            raise ParameterError(
                f"floor(c*sqrt(N)) = {s} > N = {N}: N not large enough")
        self.N, self.c, self.d, self.s = N, c, d, s
        self._count = math.comb(N, s)

    def sigma_squared(self, subset):
        mask = _check_subset(self, subset)
        return 1.0 / self._count if bin(mask).count("1") == self.s else 0.0

    def _sigma_from_sizes(self, masks, sizes):
        out = np.zeros(len(masks))
        out[sizes == self.s] = 1.0 / math.sqrt(self._count)
        return out

    def sample_subset(self, stream: KeyStream) -> Subset:
        # partial Fisher-Yates: s draws without replacement
        pool = list(range(self.N))
        mask = 0
        for i in range(self.s):
            j = i + int(stream.integers(1, self.N - i)[0])
            pool[i], pool[j] = pool[j], pool[i]
            mask |= 1 << pool[i]
        return Subset(self.N, mask)

    def sample_bool_batch(self, count, key):
        out = np.zeros((count, self.N), dtype=bool)
        stream = KeyStream(key)
        u = stream.uniforms(count * self.s).reshape(count, self.s)
        for t in range(count):
            pool = list(range(self.N))
            for i in range(self.s):
                j = i + min(int(u[t, i] * (self.N - i)), self.N - i - 1)
                pool[i], pool[j] = pool[j], pool[i]
                out[t, pool[i]] = True
        return out

    def sample_size_batch(self, count, key):
        return np.full(count, self.s)

    def q_limit(self) -> float:
        return q_from_c(self.c, self.d)


class CustomScheme(WeightScheme):
    """Explicit table of subset weights sigma_A^2 (bitmask -> weight)."""

    kind = "custom"

    def __init__(self, N: int, table: dict[int, float], d: int = 2,
                 tol: float = 1e-12):
        if N < 1 or d < 2:
            raise ParameterError("need N >= 1 and d >= 2")
        total = math.fsum(table.values())
        if abs(total - 1.0) > tol:
            raise ParameterError(
                f"custom weights sum to {total!r}, not 1 (tol {tol})")
        for mask, w in table.items():
            if w < 0:
                raise ParameterError(f"negative weight {w} for mask {mask:#x}")
            if mask < 0 or mask >> N:
                raise ParameterError(f"mask {mask:#x} outside 1..{N}")
        self.N, self.d = N, d
        self.table = {int(m): float(w) for m, w in table.items() if w != 0.0}
        self._masks = np.array(sorted(self.table), dtype=object)
        self._cum = np.cumsum([self.table[int(m)] for m in self._masks])

    def sigma_squared(self, subset):
        mask = _check_subset(self, subset)
        return self.table.get(mask, 0.0)

    def _sigma_from_sizes(self, masks, sizes):
        return np.array([math.sqrt(self.table.get(int(m), 0.0)) for m in masks])

    def _mask_at(self, u: float) -> int:
        i = int(np.searchsorted(self._cum, u, side="right"))
        return int(self._masks[min(i, len(self._masks) - 1)])

    def sample_subset(self, stream: KeyStream) -> Subset:
        return Subset(self.N, self._mask_at(float(stream.uniforms(1)[0])))

    def sample_bool_batch(self, count, key):
        u = uniform_at(key, np.arange(count, dtype=np.uint64))
        out = np.zeros((count, self.N), dtype=bool)
        for t in range(count):
            mask = self._mask_at(float(u[t]))
            for r in range(self.N):
                if (mask >> r) & 1:
                    out[t, r] = True
        return out

    def sample_size_batch(self, count, key):
        return self.sample_bool_batch(count, key).sum(axis=1)


def q_from_c(c: float, d: int) -> float:
    """q = exp(-(1 - 1/d^2) c^2), the limiting deformation parameter."""
    if c <= 0:
        raise ParameterError(f"c must be positive, got {c}")
    if d < 2:
        raise ParameterError(f"d must be >= 2, got {d}")
    return math.exp(-(1.0 - 1.0 / d**2) * c * c)


def c_from_q(q: float, d: int) -> float:
    """Inverse of :func:`q_from_c` on q in (0,1)."""
    if not 0.0 < q < 1.0:
        raise ParameterError(f"q must lie in (0,1), got {q}")
    if d < 2:
        raise ParameterError(f"d must be >= 2, got {d}")
    return math.sqrt(math.log(1.0 / q) / (1.0 - 1.0 / d**2))


def poisson_pmf(lam: float, kmax: int) -> np.ndarray:
    out = np.empty(kmax + 1)
    out[0] = math.exp(-lam)
    for k in range(1, kmax + 1):
        out[k] = out[k - 1] * lam / k
    return out


@dataclass
class CoincidenceStats:
    """Empirical coincidence diagnostics for k independent subset draws.

    ``pair_hist[(i,j)]`` is the histogram of |A_i ∩ A_j| (index =
    overlap size); ``tv_poisson[(i,j)]`` its total-variation distance
    from Poisson(c^2) truncated at mean + 4*sqrt(mean) (tails folded
    into the last bin).  ``triple_freq`` estimates P(A_1∩A_2∩A_3 != {});
    ``pair_correlation`` is the empirical correlation of |A_1∩A_2| with
    |A_1∩A_3| (independence check), NaN for k = 2.
    """

    k: int
    trials: int
    pair_hist: dict[tuple[int, int], np.ndarray]
    tv_poisson: dict[tuple[int, int], float]
    triple_freq: float
    pair_correlation: float
    joint_counts: dict[tuple[int, ...], int] = field(default_factory=dict)

    def frequencies(self, pair: tuple[int, int]) -> np.ndarray:
        h = self.pair_hist[pair]
        return h / h.sum()


def assumption_diagnostics(scheme: WeightScheme, k: int, trials: int,
                           seed: int = 0) -> CoincidenceStats:
    """Sample k-tuples of subsets and measure coincidence statistics.

    Work proceeds in fixed-size blocks with substreams keyed by
    (seed, block index), so results do not depend on how the blocks
    are processed.
    """
    if k < 2:
        raise ParameterError(f"k must be >= 2, got {k}")
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")

    pairs = [(i, j) for i in range(1, k + 1) for j in range(i + 1, k + 1)]
    maxlen = scheme.N + 1
    hists = {pr: np.zeros(maxlen, dtype=np.int64) for pr in pairs}
    joint: dict[tuple[int, ...], int] = {}
    triple_hits = 0
    n12: list[np.ndarray] = []
    n13: list[np.ndarray] = []

    done = 0
    block = 0
    while done < trials:
        b = min(_DIAG_BLOCK, trials - done)
        draws = []
        for i in range(k):
            key = derive_key(DOMAIN_SUBSET, seed, block, i)
            draws.append(scheme.sample_bool_batch(b, key))
        overlaps = {}
        for (i, j) in pairs:
            ov = (draws[i - 1] & draws[j - 1]).sum(axis=1)
            overlaps[(i, j)] = ov
            hists[(i, j)] += np.bincount(ov, minlength=maxlen)
        if k >= 3:
            triple = draws[0] & draws[1] & draws[2]
            triple_hits += int(triple.any(axis=1).sum())
            n12.append(overlaps[(1, 2)])
            n13.append(overlaps[(1, 3)])
        keys = np.stack([overlaps[pr] for pr in pairs], axis=1)
        for row in keys:
            t = tuple(int(x) for x in row)
            joint[t] = joint.get(t, 0) + 1
        done += b
        block += 1

    tv = {}
    if hasattr(scheme, "c"):
        lam = scheme.c**2
        kmax = int(math.ceil(lam + 4.0 * math.sqrt(lam)))
        ref = poisson_pmf(lam, kmax)
        ref[kmax] = 1.0 - ref[:kmax].sum()  # fold the tail
        for pr in pairs:
            h = hists[pr].astype(float)
            emp = np.zeros(kmax + 1)
            emp[:kmax] = h[:kmax]
            emp[kmax] = h[kmax:].sum()
            emp /= trials
            tv[pr] = 0.5 * float(np.abs(emp - ref).sum())
    else:
        tv = {pr: float("nan") for pr in pairs}

    if k >= 3:
        a = np.concatenate(n12).astype(float)
        b_ = np.concatenate(n13).astype(float)
        sa, sb = a.std(), b_.std()
        corr = float(((a - a.mean()) * (b_ - b_.mean())).mean() / (sa * sb)) \
            if sa > 0 and sb > 0 else 0.0
        triple_freq = triple_hits / trials
    else:
        corr = float("nan")
        triple_freq = float("nan")

    return CoincidenceStats(k=k, trials=trials, pair_hist=hists,
                            tv_poisson=tv, triple_freq=triple_freq,
                            pair_correlation=corr, joint_counts=joint)


@dataclass(frozen=True)
class Z4Result:
    value: float
    stderr: float
    method: str


def z4_sum(scheme: WeightScheme, n: int, trials: int = 200_000,
           seed: int = 0) -> Z4Result:
    """E[d^(-2 |A_1 \\ (A_2 ∪ ... ∪ A_n)|)] over independent scheme draws.

    This is the sum controlling the trace-variance bound.  Bernoulli
    has the closed form (1 - p (1-p)^(n-1) (1 - 1/d^2))^N (coordinates
    are independent); other schemes are estimated by Monte Carlo with a
    reported standard error.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    d = scheme.d
    if isinstance(scheme, BernoulliScheme):
        p = scheme.p
        val = (1.0 - p * (1.0 - p) ** (n - 1) * (1.0 - 1.0 / d**2)) ** scheme.N
        return Z4Result(val, 0.0, "closed-form")

    vals = np.empty(trials)
    done = 0
    block = 0
    while done < trials:
        b = min(_DIAG_BLOCK, trials - done)
        draws = []
        for i in range(n):
            key = derive_key(DOMAIN_SUBSET, seed, 7777, block, i)
            draws.append(scheme.sample_bool_batch(b, key))
        rest = np.zeros_like(draws[0]) if n == 1 else np.logical_or.reduce(draws[1:])
        excl = (draws[0] & ~rest).sum(axis=1)
        vals[done:done + b] = np.power(float(d), -2.0 * excl)
        done += b
        block += 1
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return Z4Result(mean, se, "monte-carlo")


def load_scheme_file(path, N: int, d: int = 2) -> CustomScheme:
    """Read a custom scheme: one `bitmask_hex,weight` line per subset.

    Weights must sum to 1 within 1e-9; they are renormalized to machine
    precision after validation.
    """
    table: dict[int, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                mask_hex, weight = line.split(",")
                mask = int(mask_hex, 16)
                w = float(weight)
            except ValueError as exc:
                raise ParameterError(f"{path}:{lineno}: bad line {line!r}") from exc
            if mask in table:
                raise ParameterError(f"{path}:{lineno}: duplicate mask {mask_hex}")
            table[mask] = w
    total = math.fsum(table.values())
    if abs(total - 1.0) > 1e-9:
        raise ParameterError(
            f"{path}: weights sum to {total!r}, expected 1 within 1e-9")
    table = {m: w / total for m, w in table.items()}
    return CustomScheme(N, table, d=d)


def save_scheme_file(path, scheme: CustomScheme) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for mask in sorted(scheme.table):
            fh.write(f"{mask:x},{scheme.table[mask]!r}\n")
