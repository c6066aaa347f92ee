"""Pure numpy/Python fallback implementations of the hot kernels.

Selected by :mod:`qgauss.backend` when the compiled extension is not
available (or when ``QGAUSS_PURE=1``).  The assembly here is the
*direct* algorithm — draw each subset's Hermitian block and add its
Kronecker embedding through a strided view — which doubles as an
independent oracle for the compiled recursive kernel: both must agree
to ~1e-12 (they sum the same terms in different orders).
"""

from __future__ import annotations

import numpy as np

from .counters import normal_at, u64_at, ppnd16

__all__ = [
    "crossing_histogram",
    "weighted_moment_sum",
    "assemble_standard",
    "hermitian_std_from_key",
    "embed_view",
]


def crossing_histogram(m: int) -> np.ndarray:
    """Counts of pair partitions of {1..2m} by crossing number (DFS)."""
    two_m = 2 * m
    counts = np.zeros(m * (m - 1) // 2 + 1, dtype=np.int64)
    matched = [False] * (two_m + 1)

    def rec(c0: int, ncross: int) -> None:
        c = c0
        while c <= two_m and matched[c]:
            c += 1
        if c > two_m:
            counts[ncross] += 1
            return
        matched[c] = True
        for d in range(c + 1, two_m + 1):
            if matched[d]:
                continue
            # Every matched element strictly inside (c, d) closes a line
            # opened left of c, so each one contributes a crossing.
            add = 0
            for x in range(c + 1, d):
                if matched[x]:
                    add += 1
            matched[d] = True
            rec(c + 1, ncross + add)
            matched[d] = False
        matched[c] = False

    rec(1, 0)
    return counts


def weighted_moment_sum(m: int, q: float, g: np.ndarray) -> float:
    """sum over pair partitions of q^crossings * prod g[c-1, d-1].

    ``g`` is the 2m x 2m matrix of covariance values already mapped
    through the word.  Same DFS order as the compiled kernel.
    """
    two_m = 2 * m
    g = np.asarray(g, dtype=np.float64)
    qpow = [1.0]
    for _ in range(m * (m - 1) // 2):
        qpow.append(qpow[-1] * q)
    matched = [False] * (two_m + 1)
    total = 0.0

    def rec(c0: int, ncross: int, prod: float) -> None:
        nonlocal total
        c = c0
        while c <= two_m and matched[c]:
            c += 1
        if c > two_m:
            total += qpow[ncross] * prod
            return
        matched[c] = True
        for d in range(c + 1, two_m + 1):
            if matched[d]:
                continue
            add = 0
            for x in range(c + 1, d):
                if matched[x]:
                    add += 1
            matched[d] = True
            rec(c + 1, ncross + add, prod * g[c - 1, d - 1])
            matched[d] = False
        matched[c] = False

    rec(1, 0, 1.0)
    return total


def hermitian_std_from_key(dim: int, key: int) -> np.ndarray:
    """Standard Hermitian random matrix, entry-addressed by counters.

    Diagonal entries are real N(0, 1/dim); off-diagonal real/imaginary
    parts are independent N(0, 1/(2 dim)).  Entry (i, j) with i <= j
    uses counters 2*(i*dim+j) and 2*(i*dim+j)+1; the lower triangle is
    the conjugate.  Matches the compiled kernel's addressing exactly.
    """
    idx = np.arange(dim, dtype=np.uint64)
    gi = idx[:, None]
    gj = idx[None, :]
    lo = np.minimum(gi, gj)
    hi = np.maximum(gi, gj)
    base = np.uint64(2) * (lo * np.uint64(dim) + hi)
    zre = ppnd16(((u64_at(key, base) >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53)
    zim = ppnd16(((u64_at(key, base + np.uint64(1)) >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53)
    sign = np.where(gi < gj, 1.0, -1.0)
    m = (zre + 1j * sign * zim) / np.sqrt(2.0 * dim)
    diag = normal_at(key, np.uint64(2) * (idx * np.uint64(dim) + idx)) / np.sqrt(dim)
    np.fill_diagonal(m, diag)
    return m


def embed_view(out: np.ndarray, mask: int, d: int, n: int) -> np.ndarray:
    """Writable strided view of ``out`` shaped for the embedding of ``mask``.

    Axes: |A| row-digit axes (most significant first), |A| column-digit
    axes, then N-|A| diagonal axes; adding a d^|A| x d^|A| block
    reshaped to (d,)*2k + (1,)*(N-k) realizes
    out[I, J] += M[i_A, j_A] * prod_{r not in A} [i_r == j_r].
    """
    srow, scol = out.strides
    positions = [r for r in range(1, n + 1) if (mask >> (r - 1)) & 1]
    comp = [r for r in range(1, n + 1) if not (mask >> (r - 1)) & 1]
    shape: list[int] = []
    strides: list[int] = []
    for r in reversed(positions):
        shape.append(d)
        strides.append(srow * d ** (r - 1))
    for r in reversed(positions):
        shape.append(d)
        strides.append(scol * d ** (r - 1))
    for r in reversed(comp):
        shape.append(d)
        strides.append((srow + scol) * d ** (r - 1))
    return np.lib.stride_tricks.as_strided(out, shape=shape, strides=strides)


def assemble_standard(d: int, n: int, weights: np.ndarray, keys: np.ndarray,
                      n0: int = 4) -> np.ndarray:
    """Direct assembly: sum of weighted Kronecker-embedded Hermitian blocks.

    Iterates every subset bitmask in increasing order; ``n0`` is
    accepted for signature compatibility with the compiled kernel and
    ignored.
    """
    dim = d**n
    out = np.zeros((dim, dim), dtype=np.complex128)
    for mask in range(1 << n):
        w = float(weights[mask])
        if w == 0.0:
            continue
        k = bin(mask).count("1")
        block = hermitian_std_from_key(d**k, int(keys[mask]))
        view = embed_view(out, mask, d, n)
        view += (w * block).reshape((d,) * (2 * k) + (1,) * (n - k))
    return out
