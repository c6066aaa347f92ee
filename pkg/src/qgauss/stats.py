"""Monte Carlo trace moments, spectra, the limiting density, and bounds.

Estimates E tr(S^{mu_1} ... S^{mu_n}) by averaging exact dense-product
traces over independently assembled samples, pools spectra against the
limiting q-Gaussian density

    nu_q(dx) = (1/pi) sqrt(1-q) sin(theta)
               prod_{n>=1} (1-q^n) |1 - q^n e^{2 i theta}|^2 dx,
    x = 2 cos(theta) / sqrt(1-q),

and evaluates the trace-variance bound (2m)!! max|gamma| * z4_sum.
The convergence sweep lines these up against the exact pair-partition
oracle per N.

The paper's guarantees are asymptotic with no rate, so sweeps report
trends and bound summability rather than rate assertions; the
subsequence column marks a greedy bound-halving selection mirroring
the almost-sure-convergence construction (a labeled heuristic).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

try:
    from scipy.linalg.blas import zherk as _zherk
except ImportError:  # pragma: no cover
    _zherk = None

from .errors import ParameterError, ResourceCapError
from .gamma import GammaSpec, identity_gamma
from .model import ModelConfig, assemble_S, require_hermitian
from .partitions import MomentSpec, double_factorial, q_gaussian_moment
from .weights import BernoulliScheme, Z4Result, c_from_q, z4_sum

MAX_PRODUCT_TERMS = 1_000_000


# ---------------------------------------------------------------------------
# trace of a word of matrices
# ---------------------------------------------------------------------------

def word_trace(mats: list[np.ndarray]) -> complex:
    """Normalized trace of the ordered product, by dense multiplication.

    The word is split in half: tr(L R) = sum_ij L_ij R_ji needs no
    final multiplication, and identical halves are computed once (a
    Hermitian rank-k update when the half is S*S).
    """
    n = len(mats)
    dim = mats[0].shape[0]
    if n == 1:
        return complex(np.trace(mats[0])) / dim
    half = n // 2
    left, right = mats[:half], mats[half:]
    same = len(left) == len(right) and all(a is b for a, b in zip(left, right))
    if same and len(left) == 2 and left[0] is left[1] and _zherk is not None:
        # P = S^2 via a Hermitian rank-k update (half a zgemm); then
        # tr(P^2) = sum_ij |P_ij|^2 needs diag once, off-diagonals twice
        upper = _zherk(1.0, left[0])
        sq = np.abs(upper) ** 2
        total = 2.0 * float(sq.sum()) - float(np.trace(sq))
        return complex(total) / dim
    p = _chain(left)
    q = p if same else _chain(right)
    return complex((p * q.T).sum()) / dim


def _chain(mats: list[np.ndarray]) -> np.ndarray:
    out = mats[0]
    for m in mats[1:]:
        out = out @ m
    return out


@dataclass(frozen=True)
class MomentEstimate:
    word: tuple[int, ...]
    mean: float
    stderr: float
    samples: int
    imag_mean: float


def trace_moment_mc(config: ModelConfig, word, samples: int,
                    threads: int = 1) -> MomentEstimate:
    """Monte Carlo estimate of E tr(S^{mu_1} ... S^{mu_n}).

    Each sample assembles a fresh family and takes the exact normalized
    trace of the dense product; the mean's standard error is the sample
    standard deviation over sqrt(samples).  The imaginary part of the
    trace is averaged as a diagnostic (Hermitian families keep it at
    rounding level).  Samples are keyed by index, so the result does
    not depend on ``threads``.
    """
    word = tuple(int(w) for w in word)
    if len(word) < 1:
        raise ParameterError("word must have length >= 1")
    if any(not 0 <= w < config.n_labels for w in word):
        raise ParameterError("word labels must index the gamma labels")
    if samples < 2:
        raise ParameterError("need samples >= 2 for a standard error")

    vals = np.empty(samples)
    imts = np.empty(samples)

    def one(s: int) -> complex:
        fam = assemble_S(config, s)
        return word_trace([fam[l] for l in word])

    if threads <= 1:
        results = [one(s) for s in range(samples)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one, range(samples)))
    for s, t in enumerate(results):
        vals[s] = t.real
        imts[s] = t.imag
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(samples))
    return MomentEstimate(word=word, mean=mean, stderr=stderr,
                          samples=samples, imag_mean=float(imts.mean()))


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

def eigenvalues(m: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Ascending spectrum of a Hermitian matrix (errors if not Hermitian)."""
    require_hermitian(m, tol=tol)
    return np.linalg.eigvalsh(m)


@dataclass(frozen=True)
class SpectrumHistogram:
    q: float
    edges: np.ndarray
    counts: np.ndarray
    samples: int
    dim: int
    outside_fraction: float
    moments: np.ndarray  # pooled moments, index = order (0..max_order)

    @property
    def total_eigenvalues(self) -> int:
        return self.samples * self.dim


def empirical_spectrum(config: ModelConfig, samples: int, bins: int,
                       q: float | None = None, label: int = 0,
                       max_order: int = 8,
                       threads: int = 1) -> SpectrumHistogram:
    """Pooled eigenvalue histogram of S over independent samples.

    Bins are uniform over the theoretical support padded by 0.5 on each
    side, so support leakage shows up instead of being clipped; the
    fraction of eigenvalues outside the unpadded support is reported.
    """
    if q is None:
        q = config.scheme.q_limit()
    if not 0.0 <= q < 1.0:
        raise ParameterError(f"q must lie in [0,1), got {q}")
    support = 2.0 / math.sqrt(1.0 - q)
    lo, hi = -support - 0.5, support + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    counts = np.zeros(bins, dtype=np.int64)
    outside = 0
    moments = np.zeros(max_order + 1)

    def one(s: int) -> np.ndarray:
        fam = assemble_S(config, s)
        return eigenvalues(fam[label])

    if threads <= 1:
        spectra = [one(s) for s in range(samples)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            spectra = list(ex.map(one, range(samples)))
    for lam in spectra:
        c, _ = np.histogram(lam, bins=edges)
        counts += c
        outside += int(((lam < -support) | (lam > support)).sum())
        for k in range(max_order + 1):
            moments[k] += float((lam**k).sum())
    total = samples * config.dim
    moments /= total
    return SpectrumHistogram(q=float(q), edges=edges, counts=counts,
                             samples=samples, dim=config.dim,
                             outside_fraction=outside / total,
                             moments=moments)


# ---------------------------------------------------------------------------
# the limiting density nu_q
# ---------------------------------------------------------------------------

def _product_terms(q: float, epsilon: float) -> int:
    if q == 0.0:
        return 0
    n_max = int(math.ceil(math.log(epsilon) / math.log(q)))
    if n_max > MAX_PRODUCT_TERMS:
        raise ResourceCapError(
            f"q = {q} needs {n_max} product terms for epsilon = {epsilon}")
    return n_max


def _density_theta(q: float, theta: np.ndarray, n_max: int) -> np.ndarray:
    """Density in x at x(theta), i.e. the nu_q density function values."""
    val = np.full_like(theta, math.sqrt(1.0 - q) / math.pi) * np.sin(theta)
    if n_max == 0:
        return val
    npow = q ** np.arange(1, n_max + 1)
    cos2t = np.cos(2.0 * theta)
    # prod (1-q^n) * ((1-q^n)^2 + 4 q^n sin^2? ) -- use |1-q^n e^{2it}|^2
    for qn in npow:
        val *= (1.0 - qn) * (1.0 - 2.0 * qn * cos2t + qn * qn)
    return val


def nu_q_density(q: float, x, epsilon: float = 1e-14):
    """Density of the q-Gaussian measure at x (0 outside the support).

    The infinite product is truncated at the first n with q^n <
    epsilon.  q = 1 has no density in this form and is rejected.
    """
    if not 0.0 <= q < 1.0:
        raise ParameterError(f"q must lie in [0,1), got {q} (q=1 excluded)")
    if not 0.0 < epsilon < 1.0:
        raise ParameterError(f"epsilon must lie in (0,1), got {epsilon}")
    n_max = _product_terms(q, epsilon)
    b = 2.0 / math.sqrt(1.0 - q)
    xs = np.asarray(x, dtype=np.float64)
    scalar = xs.ndim == 0
    xs = np.atleast_1d(xs)
    out = np.zeros_like(xs)
    inside = np.abs(xs) <= b
    if inside.any():
        theta = np.arccos(np.clip(xs[inside] / b, -1.0, 1.0))
        out[inside] = _density_theta(q, theta, n_max)
    return float(out[0]) if scalar else out


def nu_q_moments(q: float, max_order: int, tol: float = 1e-8,
                 epsilon: float = 1e-14) -> np.ndarray:
    """Moments 0..max_order of nu_q by composite-Simpson quadrature.

    Integrates in theta with the panel count doubled until successive
    estimates change by less than ``tol`` for every order; odd moments
    are exactly 0 by symmetry.
    """
    if not 0.0 <= q < 1.0:
        raise ParameterError(f"q must lie in [0,1), got {q}")
    if max_order < 0:
        raise ParameterError("max_order must be >= 0")
    n_max = _product_terms(q, epsilon)
    b = 2.0 / math.sqrt(1.0 - q)
    even = np.arange(0, max_order + 1, 2)

    def estimate(panels: int) -> np.ndarray:
        theta = np.linspace(0.0, math.pi, panels + 1)
        base = (2.0 / math.pi) * np.sin(theta) ** 2
        if n_max:
            npow = q ** np.arange(1, n_max + 1)
            cos2t = np.cos(2.0 * theta)
            for qn in npow:
                base *= (1.0 - qn) * (1.0 - 2.0 * qn * cos2t + qn * qn)
        xs = b * np.cos(theta)
        w = np.ones(panels + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        h = math.pi / panels
        vals = np.empty(len(even))
        for i, k in enumerate(even):
            vals[i] = h / 3.0 * float((w * base * xs**k).sum())
        return vals

    panels = 64
    prev = estimate(panels)
    while panels < (1 << 22):
        panels *= 2
        cur = estimate(panels)
        if np.abs(cur - prev).max() < tol:
            prev = cur
            break
        prev = cur
    out = np.zeros(max_order + 1)
    out[even] = prev
    return out


@dataclass(frozen=True)
class DensityCurve:
    q: float
    x: np.ndarray
    density: np.ndarray
    truncation_order: int
    mass: float


def density_curve(q: float, points: int = 512,
                  epsilon: float = 1e-14) -> DensityCurve:
    """Sampled nu_q curve on its support, with a mass self-check."""
    if points < 8:
        raise ParameterError("need at least 8 points")
    n_max = _product_terms(q, epsilon) if q > 0 else 0
    b = 2.0 / math.sqrt(1.0 - q)
    x = np.linspace(-b, b, points)
    dens = nu_q_density(q, x, epsilon=epsilon)
    mass = float(nu_q_moments(q, 0, epsilon=epsilon)[0])
    return DensityCurve(q=float(q), x=x, density=dens,
                        truncation_order=n_max, mass=mass)


# ---------------------------------------------------------------------------
# variance bound and convergence sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VarianceBound:
    value: float
    stderr: float
    method: str


def variance_bound(config: ModelConfig, m: int, trials: int = 200_000,
                   seed: int = 0) -> VarianceBound:
    """Bound on Var[tr S^{mu_1} ... S^{mu_m}]: (2m)!! max|gamma| z4_sum(m).

    Closed form for Bernoulli schemes; Monte Carlo with standard error
    otherwise.
    """
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    c = float(double_factorial(2 * m)) * float(np.abs(config.gamma.matrix).max())
    z4 = z4_sum(config.scheme, m, trials=trials, seed=seed)
    return VarianceBound(value=c * z4.value, stderr=c * z4.stderr,
                         method=z4.method)


@dataclass(frozen=True)
class SweepRow:
    N: int
    word: str
    mc_mean: float
    mc_stderr: float
    exact_target: float
    gap: float
    variance_bound: float
    as_subsequence: bool


def convergence_sweep(d: int, q: float, n_list, word, samples: int,
                      seed: int = 0, gamma: GammaSpec | None = None,
                      threads: int = 1, subset_cap: int = 14,
                      dim_cap: int = 8192) -> list[SweepRow]:
    """MC moments vs the exact oracle across matrix sizes N.

    ``word`` is a tuple of label indices.  The target is the
    q-deformed moment with the given covariance; the bound column is
    Proposition-style variance control; ``as_subsequence`` marks a
    greedy subsequence along which bounds halve (so their sum is
    geometric), mirroring the almost-sure-convergence construction.
    """
    if gamma is None:
        gamma = identity_gamma(max(word) + 1 if word else 1)
    word = tuple(int(w) for w in word)
    c = c_from_q(q, d)
    target = q_gaussian_moment(
        MomentSpec(q=q, word=word, gamma=gamma.matrix.tolist()))
    rows: list[SweepRow] = []
    last_bound = None
    for n in n_list:
        scheme = BernoulliScheme(n, c, d)
        config = ModelConfig(d=d, N=n, scheme=scheme, gamma=gamma, seed=seed,
                             subset_cap=subset_cap, dim_cap=dim_cap)
        est = trace_moment_mc(config, word, samples, threads=threads)
        vb = variance_bound(config, len(word))
        selected = last_bound is None or vb.value <= 0.5 * last_bound
        if selected:
            last_bound = vb.value
        rows.append(SweepRow(N=n, word="".join(str(w) for w in word),
                             mc_mean=est.mean, mc_stderr=est.stderr,
                             exact_target=float(target),
                             gap=abs(est.mean - float(target)),
                             variance_bound=vb.value,
                             as_subsequence=selected))
    return rows
