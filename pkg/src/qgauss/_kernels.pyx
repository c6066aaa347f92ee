# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.

Three things live here, mirrored by :mod:`qgauss._kernels_py`:

* the SplitMix64 counter PRF and the AS241 inverse normal CDF, so
  every Gaussian entry is a pure function of (stream key, counter);
* depth-first pair-partition sums (crossing histogram and weighted
  moment sums) without materializing partitions;
* the digit-recursive block assembly of S = sum_A sigma_A R^(A): the
  top digit splits the matrix into d x d blocks, subsets without that
  digit are assembled once and copied along the diagonal, subsets with
  it recurse into contiguous sub-slices, and Hermitian symmetry fills
  lower blocks by conjugate transposition.  Gaussians are drawn at the
  leaves, entry-addressed, so nothing is ever stored per subset.
"""

from libc.math cimport log, sqrt
from libc.stdlib cimport free, malloc

import numpy as np

ctypedef unsigned long long u64

cdef double _INV53 = 1.0 / 9007199254740992.0


cdef inline u64 _mix64(u64 z) nogil:
    z ^= z >> 30
    z *= 0xBF58476D1CE4E5B9ULL
    z ^= z >> 27
    z *= 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _u01(u64 key, u64 ctr) nogil:
    cdef u64 z = _mix64(key + (ctr + 1ULL) * 0x9E3779B97F4A7C15ULL)
    return (<double> (z >> 11) + 0.5) * _INV53


# AS241 PPND16 rational-fit coefficients (central, middle, far tail).
cdef double[8] _A = [3.3871328727963666080e0, 1.3314166789178437745e2,
                     1.9715909503065514427e3, 1.3731693765509461125e4,
                     4.5921953931549871457e4, 6.7265770927008700853e4,
                     3.3430575583588128105e4, 2.5090809287301226727e3]
cdef double[8] _B = [1.0, 4.2313330701600911252e1, 6.8718700749205790830e2,
                     5.3941960214247511077e3, 2.1213794301586595867e4,
                     3.9307895800092710610e4, 2.8729085735721942674e4,
                     5.2264952788528545610e3]
cdef double[8] _C = [1.42343711074968357734e0, 4.63033784615654529590e0,
                     5.76949722146069140550e0, 3.64784832476320460504e0,
                     1.27045825245236838258e0, 2.41780725177450611770e-1,
                     2.27238449892691845833e-2, 7.74545014278341407640e-4]
cdef double[8] _D = [1.0, 2.05319162663775882187e0, 1.67638483018380384940e0,
                     6.89767334985100004550e-1, 1.48103976427480074590e-1,
                     1.51986665636164571966e-2, 5.47593808499534494600e-4,
                     1.05075007164441684324e-9]
cdef double[8] _E = [6.65790464350110377720e0, 5.46378491116411436990e0,
                     1.78482653991729133580e0, 2.96560571828504891230e-1,
                     2.65321895265761230930e-2, 1.24266094738807843860e-3,
                     2.71155556874348757815e-5, 2.01033439929228813265e-7]
cdef double[8] _F = [1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1,
                     1.48753612908506148525e-2, 7.86869131145613259100e-4,
                     1.84631831751005468180e-5, 1.42151175831644588870e-7,
                     2.04426310338993978564e-15]


cdef inline double _ratpoly(const double* num, const double* den, double r) nogil:
    cdef double p = num[7]
    cdef double q = den[7]
    cdef int i
    for i in range(6, -1, -1):
        p = p * r + num[i]
        q = q * r + den[i]
    return p / q


cdef inline double _ppnd16(double p) nogil:
    cdef double q = p - 0.5
    cdef double r, val
    if q <= 0.425 and q >= -0.425:
        r = 0.180625 - q * q
        return q * _ratpoly(_A, _B, r)
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    r = sqrt(-log(r))
    if r <= 5.0:
        val = _ratpoly(_C, _D, r - 1.6)
    else:
        val = _ratpoly(_E, _F, r - 5.0)
    return -val if q < 0.0 else val


cdef inline double _normal(u64 key, u64 ctr) nogil:
    return _ppnd16(_u01(key, ctr))


def counter_uniform(key, ctr):
    """Scalar counter uniform (cross-checked against the numpy path)."""
    return _u01(<u64> key, <u64> ctr)


def counter_normal(key, ctr):
    """Scalar counter normal (cross-checked against the numpy path)."""
    return _normal(<u64> key, <u64> ctr)


# ---------------------------------------------------------------------------
# Pair-partition DFS sums
# ---------------------------------------------------------------------------

cdef void _hist_rec(int two_m, int c0, int ncross,
                    unsigned char* matched, long long* counts) nogil:
    cdef int c = c0
    cdef int d, x, add
    while c <= two_m and matched[c]:
        c += 1
    if c > two_m:
        counts[ncross] += 1
        return
    matched[c] = 1
    for d in range(c + 1, two_m + 1):
        if matched[d]:
            continue
        add = 0
        for x in range(c + 1, d):
            if matched[x]:
                add += 1
        matched[d] = 1
        _hist_rec(two_m, c + 1, ncross + add, matched, counts)
        matched[d] = 0
    matched[c] = 0


def crossing_histogram(int m):
    """int64 array: number of pair partitions per crossing count."""
    counts = np.zeros(m * (m - 1) // 2 + 1, dtype=np.int64)
    cdef long long[::1] cv = counts
    cdef unsigned char[64] matched
    cdef int i
    for i in range(64):
        matched[i] = 0
    with nogil:
        _hist_rec(2 * m, 1, 0, &matched[0], &cv[0])
    return counts


cdef void _wsum_rec(int two_m, int c0, int ncross, double prod,
                    unsigned char* matched, const double* g, int n,
                    const double* qpow, double* total) nogil:
    cdef int c = c0
    cdef int d, x, add
    while c <= two_m and matched[c]:
        c += 1
    if c > two_m:
        total[0] += qpow[ncross] * prod
        return
    matched[c] = 1
    for d in range(c + 1, two_m + 1):
        if matched[d]:
            continue
        add = 0
        for x in range(c + 1, d):
            if matched[x]:
                add += 1
        matched[d] = 1
        _wsum_rec(two_m, c + 1, ncross + add, prod * g[(c - 1) * n + (d - 1)],
                  matched, g, n, qpow, total)
        matched[d] = 0
    matched[c] = 0


def weighted_moment_sum(int m, double q, double[:, ::1] g):
    """sum over pair partitions of q^crossings * prod g[c-1, d-1]."""
    cdef int maxc = m * (m - 1) // 2
    cdef double[64] qpow
    cdef unsigned char[64] matched
    cdef int i
    cdef double total = 0.0
    qpow[0] = 1.0
    for i in range(1, maxc + 1):
        qpow[i] = qpow[i - 1] * q
    for i in range(64):
        matched[i] = 0
    with nogil:
        _wsum_rec(2 * m, 1, 0, 1.0, &matched[0], &g[0, 0], 2 * m,
                  &qpow[0], &total)
    return total


# ---------------------------------------------------------------------------
# Recursive block assembly
# ---------------------------------------------------------------------------

cdef struct AsmCtx:
    long dim              # full output dimension (for bookkeeping only)
    int d
    int n0
    long lcap             # per-level scratch stride (2^N)
    u64* key_s
    double* w_s
    long* dorig_s         # original matrix dimension (row stride of slice)
    long* row_s
    long* col_s
    double** xbuf         # per-level scratch matrices for shared partial sums
    const long* dpow
    const unsigned char* pcount
    const long* sin_flat
    const long* sin_off
    const long* sout_flat
    const long* sout_off


cdef void _leaf(AsmCtx* ctx, bint herm, int n, double* tgt, long tdim,
                long r0, long c0) nogil:
    cdef long base = (<long> n) * ctx.lcap
    cdef long nmask = 1L << n
    cdef long mask, dorig, row0, col0, off, o, p
    cdef u64 key, c2
    cdef int k, a, b, t, wk, ndiag
    cdef double w, inv_sd, inv_s2d, v, vre, vim
    cdef const long* sin
    cdef const long* sout
    for mask in range(nmask):
        w = ctx.w_s[base + mask]
        if w == 0.0:
            continue
        key = ctx.key_s[base + mask]
        dorig = ctx.dorig_s[base + mask]
        row0 = ctx.row_s[base + mask]
        col0 = ctx.col_s[base + mask]
        k = ctx.pcount[mask]
        wk = <int> ctx.dpow[k]
        ndiag = <int> ctx.dpow[n - k]
        sin = ctx.sin_flat + ctx.sin_off[mask]
        sout = ctx.sout_flat + ctx.sout_off[mask]
        inv_sd = w / sqrt(<double> dorig)
        inv_s2d = w / sqrt(2.0 * <double> dorig)
        if herm:
            # diagonal slice of a Hermitian matrix: draw the upper
            # triangle once, write the mirrored entry alongside
            for a in range(wk):
                c2 = 2ULL * ((<u64> (row0 + a)) * (<u64> dorig) + <u64> (row0 + a))
                v = _normal(key, c2) * inv_sd
                for t in range(ndiag):
                    off = (r0 + sout[t] + sin[a]) * tdim + c0 + sout[t] + sin[a]
                    tgt[2 * off] += v
                for b in range(a + 1, wk):
                    c2 = 2ULL * ((<u64> (row0 + a)) * (<u64> dorig) + <u64> (col0 + b))
                    vre = _normal(key, c2) * inv_s2d
                    vim = _normal(key, c2 + 1ULL) * inv_s2d
                    for t in range(ndiag):
                        o = r0 + sout[t]
                        p = c0 + sout[t]
                        off = (o + sin[a]) * tdim + p + sin[b]
                        tgt[2 * off] += vre
                        tgt[2 * off + 1] += vim
                        off = (o + sin[b]) * tdim + p + sin[a]
                        tgt[2 * off] += vre
                        tgt[2 * off + 1] -= vim
        else:
            # strictly upper slice: every element has global row < col
            for a in range(wk):
                for b in range(wk):
                    c2 = 2ULL * ((<u64> (row0 + a)) * (<u64> dorig) + <u64> (col0 + b))
                    vre = _normal(key, c2) * inv_s2d
                    vim = _normal(key, c2 + 1ULL) * inv_s2d
                    for t in range(ndiag):
                        off = (r0 + sout[t] + sin[a]) * tdim + c0 + sout[t] + sin[b]
                        tgt[2 * off] += vre
                        tgt[2 * off + 1] += vim


cdef void _ct_copy(double* tgt, long tdim, long sr, long sc,
                   long dr, long dc, long h) nogil:
    # dest block = conjugate transpose of source block, 64x64 tiles
    cdef long ti, tj, i, j, iend, jend, so, dofs
    for ti in range(0, h, 64):
        iend = ti + 64
        if iend > h:
            iend = h
        for tj in range(0, h, 64):
            jend = tj + 64
            if jend > h:
                jend = h
            for i in range(ti, iend):
                for j in range(tj, jend):
                    so = 2 * ((sr + j) * tdim + sc + i)
                    dofs = 2 * ((dr + i) * tdim + dc + j)
                    tgt[dofs] = tgt[so]
                    tgt[dofs + 1] = -tgt[so + 1]


cdef void _node(AsmCtx* ctx, bint herm, int n, double* tgt, long tdim,
                long r0, long c0) nogil:
    if n <= ctx.n0:
        _leaf(ctx, herm, n, tgt, tdim, r0, c0)
        return
    cdef long h = ctx.dpow[n - 1]
    cdef long half = 1L << (n - 1)
    cdef long base = (<long> n) * ctx.lcap
    cdef long cbase = (<long> (n - 1)) * ctx.lcap
    cdef long m, p, hp, i, j
    cdef int a, b, bstart
    cdef double* x = ctx.xbuf[n - 1]
    cdef double* dst
    cdef const double* src
    # subsets without the top digit: shared partial sum, assembled once
    # in a scratch block and added to every diagonal block
    for m in range(half):
        ctx.key_s[cbase + m] = ctx.key_s[base + m]
        ctx.w_s[cbase + m] = ctx.w_s[base + m]
        ctx.dorig_s[cbase + m] = ctx.dorig_s[base + m]
        ctx.row_s[cbase + m] = ctx.row_s[base + m]
        ctx.col_s[cbase + m] = ctx.col_s[base + m]
    for i in range(2 * h * h):
        x[i] = 0.0
    _node(ctx, herm, n - 1, x, h, 0, 0)
    for a in range(ctx.d):
        for i in range(h):
            dst = tgt + 2 * ((r0 + a * h + i) * tdim + c0 + a * h)
            src = x + 2 * i * h
            for j in range(2 * h):
                dst[j] += src[j]
    # subsets with the top digit recurse into block slices
    for a in range(ctx.d):
        bstart = a if herm else 0
        for b in range(bstart, ctx.d):
            for m in range(half):
                p = base + half + m
                hp = ctx.dpow[ctx.pcount[m]]
                ctx.key_s[cbase + m] = ctx.key_s[p]
                ctx.w_s[cbase + m] = ctx.w_s[p]
                ctx.dorig_s[cbase + m] = ctx.dorig_s[p]
                ctx.row_s[cbase + m] = ctx.row_s[p] + a * hp
                ctx.col_s[cbase + m] = ctx.col_s[p] + b * hp
            _node(ctx, herm and a == b, n - 1, tgt, tdim, r0 + a * h, c0 + b * h)
            if herm and a < b:
                _ct_copy(tgt, tdim, r0 + a * h, c0 + b * h, r0 + b * h, c0 + a * h, h)


def assemble_standard(int d, int n, double[::1] weights,
                      unsigned long long[::1] keys, int n0=4):
    """Assemble sum_A sigma_A * embed(A, H_A) with standard Hermitian H_A.

    ``weights[mask]`` is sigma_A for the subset with that bitmask (bit
    r-1 for position r); ``keys[mask]`` is the draw key.  Returns the
    dense complex Hermitian matrix of dimension d^n.
    """
    if n0 < 0:
        n0 = 0
    cdef long dim = 1
    cdef int i
    for i in range(n):
        dim *= d
    out = np.zeros((dim, dim), dtype=np.complex128)
    cdef double complex[:, ::1] outv = out

    cdef long lcap = 1L << n
    key_s = np.zeros((n + 1) * lcap, dtype=np.uint64)
    w_s = np.zeros((n + 1) * lcap, dtype=np.float64)
    dorig_s = np.zeros((n + 1) * lcap, dtype=np.int64)
    row_s = np.zeros((n + 1) * lcap, dtype=np.int64)
    col_s = np.zeros((n + 1) * lcap, dtype=np.int64)
    cdef unsigned long long[::1] key_v = key_s
    cdef double[::1] w_v = w_s
    cdef long[::1] dorig_v = dorig_s
    cdef long[::1] row_v = row_s
    cdef long[::1] col_v = col_s

    dpow = np.ones(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        dpow[i] = dpow[i - 1] * d
    pcount = np.zeros(lcap, dtype=np.uint8)
    cdef long mask
    for mask in range(1, lcap):
        pcount[mask] = pcount[mask >> 1] + (mask & 1)
    cdef const long[::1] dpow_v = dpow
    cdef const unsigned char[::1] pcount_v = pcount

    # level-n scratch row holds the original subsets
    cdef long base = (<long> n) * lcap
    for mask in range(lcap):
        key_v[base + mask] = keys[mask]
        w_v[base + mask] = weights[mask]
        dorig_v[base + mask] = dpow[pcount[mask]]

    # leaf spread tables over {1..n_eff}
    cdef int n_eff = n0 if n0 < n else n
    sin_off_l = []
    sin_flat_l = []
    sout_off_l = []
    sout_flat_l = []
    cdef int r
    for mask in range(1 << n_eff):
        ins = [r for r in range(n_eff) if (mask >> r) & 1]
        outs = [r for r in range(n_eff) if not (mask >> r) & 1]
        sin_off_l.append(len(sin_flat_l))
        for a in range(int(dpow[len(ins)])):
            v = 0
            x = a
            for r in ins:
                v += (x % d) * int(dpow[r])
                x //= d
            sin_flat_l.append(v)
        sout_off_l.append(len(sout_flat_l))
        for t in range(int(dpow[len(outs)])):
            v = 0
            x = t
            for r in outs:
                v += (x % d) * int(dpow[r])
                x //= d
            sout_flat_l.append(v)
    sin_flat = np.asarray(sin_flat_l, dtype=np.int64)
    sin_off = np.asarray(sin_off_l, dtype=np.int64)
    sout_flat = np.asarray(sout_flat_l, dtype=np.int64)
    sout_off = np.asarray(sout_off_l, dtype=np.int64)
    cdef const long[::1] sin_flat_v = sin_flat
    cdef const long[::1] sin_off_v = sin_off
    cdef const long[::1] sout_flat_v = sout_flat
    cdef const long[::1] sout_off_v = sout_off

    # per-level scratch blocks: a node at level l assembles its shared
    # "no top digit" partial sum into xbuf[l-1] (dimension d^(l-1))
    cdef double** xptrs = <double**> malloc(32 * sizeof(double*))
    if xptrs == NULL:
        raise MemoryError
    cdef double[::1] xv
    xkeep = []
    for i in range(32):
        xptrs[i] = NULL
    for i in range(n_eff, n):
        xarr = np.empty(2 * int(dpow[i]) * int(dpow[i]), dtype=np.float64)
        xkeep.append(xarr)
        xv = xarr
        xptrs[i] = &xv[0]

    cdef AsmCtx ctx
    ctx.dim = dim
    ctx.d = d
    ctx.n0 = n_eff
    ctx.lcap = lcap
    ctx.key_s = &key_v[0]
    ctx.w_s = &w_v[0]
    ctx.dorig_s = &dorig_v[0]
    ctx.row_s = &row_v[0]
    ctx.col_s = &col_v[0]
    ctx.xbuf = &xptrs[0]
    ctx.dpow = &dpow_v[0]
    ctx.pcount = &pcount_v[0]
    ctx.sin_flat = &sin_flat_v[0]
    ctx.sin_off = &sin_off_v[0]
    ctx.sout_flat = &sout_flat_v[0]
    ctx.sout_off = &sout_off_v[0]

    cdef double* outp = <double*> &outv[0, 0]
    try:
        with nogil:
            _node(&ctx, True, n, outp, dim, 0, 0)
    finally:
        free(xptrs)
    return out
