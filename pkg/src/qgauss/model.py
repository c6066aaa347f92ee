"""Construction of the random matrix family S = sum_A sigma_A R^(A,mu).

R^(A,mu) embeds a d^|A|-dimensional standard Hermitian random matrix
into dimension d^N: digits at positions in A index the small matrix,
digits elsewhere are forced diagonal, so the embedded matrix consists
of d^(N-|A|) copies of the small one.  Summing over all subsets with
square-summable weights gives a Gaussian Hermitian family whose entry
covariance is the weighted tensor mixture the trace moments see.

Index convention: basis vectors of (C^d)^(tensor N) are numbered by
base-d digits, position r carrying place value d^(r-1); a subset's
digits map to the small matrix index in ascending position order.

Sampling is entry-addressed (see qgauss.counters): matrix (A, mu) of
sample s draws from the stream keyed by (seed, s, bitmask(A), mu), so
assemblies are reproducible regardless of scheduling and any single
block can be regenerated in isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import backend
from .counters import DOMAIN_MATRIX, KeyStream, derive_key, normal_at
from .errors import ParameterError, ResourceCapError
from .gamma import GammaSpec
from .weights import Subset, WeightScheme

_KIND_HERM = 0
_KIND_COMPLEX = 1

DEFAULT_SUBSET_CAP = 14
DEFAULT_DIM_CAP = 8192


def hermitian_defect(m: np.ndarray) -> float:
    """max |M - M^H|, zero for exactly Hermitian input."""
    return float(np.abs(m - m.conj().T).max())


def require_hermitian(m: np.ndarray, tol: float = 1e-12) -> None:
    scale = max(1.0, float(np.abs(m).max()))
    if hermitian_defect(m) > tol * scale:
        raise ParameterError("matrix is not Hermitian within tolerance")


def sample_standard_hermitian(dim: int, stream: KeyStream) -> np.ndarray:
    """One standard Hermitian random matrix (entry variance 1/dim).

    Diagonal entries are real N(0, 1/dim); off-diagonal real and
    imaginary parts are independent N(0, 1/(2 dim)).
    """
    if dim < 1:
        raise ParameterError(f"dim must be >= 1, got {dim}")
    return backend.hermitian_std_from_key(dim, stream.subkey())


def complex_gaussian_from_key(dim: int, key: int, scale: float) -> np.ndarray:
    """Full complex matrix, entries re/im iid N(0, scale^2), entry-addressed."""
    idx = np.arange(dim, dtype=np.uint64)
    base = np.uint64(2) * (idx[:, None] * np.uint64(dim) + idx[None, :])
    zre = normal_at(key, base)
    zim = normal_at(key, base + np.uint64(1))
    return scale * (zre + 1j * zim)


def sample_gamma_family(dim: int, gamma: GammaSpec, keys: Sequence[int]) -> np.ndarray:
    """Family {R_1^mu} with cross-label covariance gamma.

    For each label, R_0^mu = sum_nu L[mu,nu] Z^nu with L a (pivoted
    Cholesky) factor of gamma and Z^nu iid complex matrices whose
    re/im parts have variance 1/(4 dim); R_1 = R_0 + R_0^H then has
    E[R_1^mu_ij R_1^nu_kl] = gamma[mu,nu] [i=l][j=k] / dim, and for
    gamma = identity each R_1^mu is a standard Hermitian matrix in law.

    ``keys`` holds one draw key per label (for the Z^nu).
    """
    n = gamma.size
    if len(keys) != n:
        raise ParameterError(f"need {n} keys, got {len(keys)}")
    lfac = gamma.factor()
    scale = 1.0 / (2.0 * math.sqrt(dim))
    z = np.stack([complex_gaussian_from_key(dim, int(k), scale) for k in keys])
    r0 = np.tensordot(lfac, z, axes=(1, 0))
    return r0 + r0.conj().transpose(0, 2, 1)


def embed(subset: Subset | int, m_small: np.ndarray, d: int, n: int) -> np.ndarray:
    """Kronecker embedding of a d^|A| matrix into dimension d^N.

    out[I, J] = M[i_A, j_A] * prod_{r not in A} [i_r == j_r], built by
    direct strided writes (no dense intermediate beyond the output).
    """
    mask = subset.mask if isinstance(subset, Subset) else int(subset)
    if isinstance(subset, Subset) and subset.n != n:
        raise ParameterError(f"subset ambient {subset.n} != N = {n}")
    if mask < 0 or mask >> n:
        raise ParameterError(f"mask {mask:#x} outside 1..{n}")
    k = bin(mask).count("1")
    if m_small.shape != (d**k, d**k):
        raise ParameterError(
            f"small matrix must be {d**k} x {d**k} for |A| = {k}, "
            f"got {m_small.shape}")
    out = np.zeros((d**n, d**n), dtype=np.complex128)
    view = backend.embed_view(out, mask, d, n)
    view += m_small.reshape((d,) * (2 * k) + (1,) * (n - k))
    return out


@dataclass(frozen=True)
class ModelConfig:
    """Everything that determines the law and the stream of {S^mu}."""

    d: int
    N: int
    scheme: WeightScheme
    gamma: GammaSpec
    seed: int
    subset_cap: int = DEFAULT_SUBSET_CAP
    dim_cap: int = DEFAULT_DIM_CAP

    def __post_init__(self):
        if self.d < 2 or self.N < 1:
            raise ParameterError("need d >= 2 and N >= 1")
        if self.scheme.N != self.N:
            raise ParameterError(
                f"scheme is for N = {self.scheme.N}, config has N = {self.N}")
        if self.scheme.d != self.d:
            raise ParameterError(
                f"scheme is for d = {self.scheme.d}, config has d = {self.d}")
        if self.d**self.N > self.dim_cap:
            raise ResourceCapError(
                f"matrix dimension d^N = {self.d**self.N} exceeds cap "
                f"{self.dim_cap} (override dim_cap to proceed)")

    @property
    def dim(self) -> int:
        return self.d**self.N

    @property
    def n_labels(self) -> int:
        return self.gamma.size


def _matrix_keys(config: ModelConfig, sample_index: int, label: int,
                 kind: int) -> np.ndarray:
    masks = np.arange(1 << config.N)
    return np.array(
        [derive_key(DOMAIN_MATRIX, config.seed, sample_index, int(m), label, kind)
         for m in masks], dtype=np.uint64)


def assemble_S(config: ModelConfig, sample_index: int,
               weights: np.ndarray | None = None) -> np.ndarray:
    """One sample of the family {S^mu}, shape (n_labels, d^N, d^N).

    Iterates every subset of {1,...,N}: draws its gamma-family block
    from the stream keyed by (seed, sample_index, bitmask, label) and
    accumulates sigma_A times its embedding.  Identity gamma uses the
    compiled recursive assembly; general gamma mixes per-label complex
    draws through the Cholesky factor and embeds directly.
    """
    if config.N > config.subset_cap:
        raise ResourceCapError(
            f"N = {config.N} exceeds subset_cap {config.subset_cap} for "
            f"exact assembly; use assemble_S_truncated")
    if weights is None:
        weights = config.scheme.weights_by_mask()

    if config.gamma.is_identity:
        out = np.empty((config.n_labels, config.dim, config.dim),
                       dtype=np.complex128)
        for label in range(config.n_labels):
            keys = _matrix_keys(config, sample_index, label, _KIND_HERM)
            out[label] = backend.assemble_standard(config.d, config.N,
                                                   weights, keys)
        return out

    if config.N > 10:
        raise ResourceCapError(
            "general-gamma exact assembly is limited to N <= 10 "
            "(use the identity kernel path or a smaller N)")
    d, n = config.d, config.N
    out = np.zeros((config.n_labels, config.dim, config.dim),
                   dtype=np.complex128)
    key_table = [
        _matrix_keys(config, sample_index, label, _KIND_COMPLEX)
        for label in range(config.n_labels)
    ]
    for mask in range(1 << n):
        w = float(weights[mask])
        if w == 0.0:
            continue
        k = bin(mask).count("1")
        fam = sample_gamma_family(
            d**k, config.gamma,
            [int(key_table[label][mask]) for label in range(config.n_labels)])
        for label in range(config.n_labels):
            view = backend.embed_view(out[label], mask, d, n)
            view += (w * fam[label]).reshape((d,) * (2 * k) + (1,) * (n - k))
    return out


@dataclass(frozen=True)
class TruncationReport:
    retained_subsets: int
    total_subsets: int
    dropped_mass: float
    mass_tolerance: float


def assemble_S_truncated(config: ModelConfig, sample_index: int,
                         mass_tolerance: float) -> tuple[np.ndarray, TruncationReport]:
    """Assembly over the highest-weight subsets covering 1 - tol of mass.

    Subsets are taken in decreasing sigma^2 order until the retained
    mass reaches 1 - mass_tolerance; dropped terms are independent
    summands, so the result is Gaussian with covariance deficit exactly
    the dropped mass, which is reported.  Retained subsets draw from
    the same streams as exact assembly.
    """
    if not 0.0 < mass_tolerance < 1.0:
        raise ParameterError(
            f"mass_tolerance must lie in (0,1), got {mass_tolerance}")
    weights = config.scheme.weights_by_mask()
    sq = weights**2
    order = np.argsort(-sq, kind="stable")
    csum = np.cumsum(sq[order])
    needed = int(np.searchsorted(csum, 1.0 - mass_tolerance, side="left")) + 1
    needed = min(needed, len(order))
    keep = order[:needed]
    trunc = np.zeros_like(weights)
    trunc[keep] = weights[keep]
    retained_mass = math.fsum(float(sq[i]) for i in keep)
    report = TruncationReport(
        retained_subsets=int((trunc != 0).sum()),
        total_subsets=len(weights),
        dropped_mass=1.0 - retained_mass,
        mass_tolerance=mass_tolerance,
    )
    cfg = config if config.N <= config.subset_cap else None
    if cfg is None:
        raise ResourceCapError(
            f"N = {config.N}: even truncated mode enumerates 2^N weights; "
            f"N > {config.subset_cap} is not supported")
    family = assemble_S(config, sample_index, weights=trunc)
    return family, report


def matrix_to_csv(path, m: np.ndarray) -> None:
    """Dense complex matrix as CSV, entries formatted `re+imi`."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.atleast_2d(m):
            fh.write(",".join(_fmt_complex(z) for z in row) + "\n")


def _fmt_complex(z: complex) -> str:
    re, im = z.real, z.imag
    sign = "+" if im >= 0 else "-"
    return f"{re:.17g}{sign}{abs(im):.17g}i"


def matrix_from_csv(path) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            rows.append([_parse_complex(tok) for tok in line.split(",")])
    return np.array(rows, dtype=np.complex128)


def _parse_complex(tok: str) -> complex:
    tok = tok.strip()
    if not tok.endswith("i"):
        return complex(float(tok), 0.0)
    body = tok[:-1]
    for pos in range(len(body) - 1, 0, -1):
        if body[pos] in "+-" and body[pos - 1] not in "eE":
            return complex(float(body[:pos]), float(body[pos] + body[pos + 1:]))
    raise ParameterError(f"cannot parse complex entry {tok!r}")
