"""Covariance kernels on the label set.

The family {S^mu} carries a real positive-semidefinite covariance
gamma[mu, nu].  The identity kernel gives independent matrices per
label; min(t, s) on positive times gives Brownian-motion-type
increments.  Arbitrary symmetric PSD matrices load from CSV.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg.lapack as lapack

from .errors import ParameterError

PSD_TOL = 1e-9


@dataclass(frozen=True)
class GammaSpec:
    labels: tuple[str, ...]
    matrix: np.ndarray
    kind: str = "custom"
    _chol: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ParameterError("gamma matrix must be square")
        if m.shape[0] != len(self.labels):
            raise ParameterError("labels do not match matrix size")
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.T).max() > 1e-9 * scale:
            raise ParameterError("gamma matrix must be symmetric")
        m = 0.5 * (m + m.T)
        if np.linalg.eigvalsh(m).min() < -PSD_TOL * scale:
            raise ParameterError(
                "gamma matrix is not positive semidefinite within tolerance")
        object.__setattr__(self, "matrix", m)

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity"

    def factor(self) -> np.ndarray:
        """L with L @ L.T = gamma, by pivoted Cholesky (rank-revealing)."""
        if self._chol is not None:
            return self._chol
        n = self.size
        c, piv, rank, info = lapack.dpstrf(self.matrix, lower=1)
        if info < 0:
            raise ParameterError(f"dpstrf failed with info={info}")
        ltri = np.tril(c)[:, :rank]
        perm = np.argsort(piv - 1)
        lfull = ltri[perm, :]
        pad = np.zeros((n, n))
        pad[:, :rank] = lfull
        object.__setattr__(self, "_chol", pad)
        return pad


def identity_gamma(n_labels: int = 1, labels: tuple[str, ...] | None = None) -> GammaSpec:
    if labels is None:
        labels = tuple(f"mu{i}" for i in range(n_labels))
    return GammaSpec(labels=labels, matrix=np.eye(len(labels)), kind="identity")


def brownian_gamma(times) -> GammaSpec:
    """gamma[t, s] = min(t, s) on strictly increasing positive times."""
    t = np.asarray(times, dtype=np.float64)
    if t.ndim != 1 or len(t) < 1:
        raise ParameterError("need at least one time")
    if (t <= 0).any() or (np.diff(t) <= 0).any():
        raise ParameterError("times must be strictly increasing and positive")
    m = np.minimum.outer(t, t)
    return GammaSpec(labels=tuple(repr(float(x)) for x in t), matrix=m,
                     kind="brownian")


def gamma_from_csv(path) -> GammaSpec:
    """Symmetric CSV with a header row of labels."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        labels = tuple(x.strip() for x in header.split(",") if x.strip())
        rows = []
        for lineno, raw in enumerate(fh, 2):
            line = raw.strip()
            if not line:
                continue
            vals = [float(x) for x in line.split(",")]
            if len(vals) != len(labels):
                raise ParameterError(
                    f"{path}:{lineno}: expected {len(labels)} values")
            rows.append(vals)
    if len(rows) != len(labels):
        raise ParameterError(f"{path}: expected {len(labels)} rows")
    return GammaSpec(labels=labels, matrix=np.array(rows), kind="custom")


def gamma_to_csv(path, gamma: GammaSpec) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(gamma.labels) + "\n")
        for row in gamma.matrix:
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
