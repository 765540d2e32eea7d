"""numba kernels: float LLL, certified sup-norm enumeration, orbit scanning.

Bases are stored column-wise (``B[:, j]`` is the j-th basis vector) and every
kernel tracks the unimodular integer transform it applies, so callers can
recover coefficient vectors with respect to their own basis.
"""

import numpy as np
from numba import njit

LLL_DELTA = 0.99
# size-reduction trigger slightly above 1/2 so a reduced basis stays put
_SIZE_TOL = 0.5 + 1e-7
_TIE = 1e-12


@njit(cache=True)
def _cdot(X, j, Y, i):
    s = 0.0
    for r in range(X.shape[0]):
        s += X[r, j] * Y[r, i]
    return s


@njit(cache=True)
def _gram_schmidt(B, Bs, nrm):
    d = B.shape[1]
    for j in range(d):
        Bs[:, j] = B[:, j]
        for i in range(j):
            mu = _cdot(B, j, Bs, i) / nrm[i]
            Bs[:, j] -= mu * Bs[:, i]
        nrm[j] = _cdot(Bs, j, Bs, j)


@njit(cache=True)
def lll_inplace(B, T, delta):
    """LLL-reduce the columns of B in place, applying the same moves to T.

    Returns True when the basis changed.
    """
    d = B.shape[1]
    Bs = np.empty_like(B)
    nrm = np.empty(d)
    _gram_schmidt(B, Bs, nrm)
    changed = False
    k = 1
    guard = 0
    while k < d:
        guard += 1
        if guard > 100000:
            break
        for j in range(k - 1, -1, -1):
            mu = _cdot(B, k, Bs, j) / nrm[j]
            if abs(mu) > _SIZE_TOL:
                r = np.round(mu)
                B[:, k] -= r * B[:, j]
                ri = np.int64(r)
                for i in range(d):
                    T[i, k] -= ri * T[i, j]
                changed = True
        _gram_schmidt(B, Bs, nrm)
        mu = _cdot(B, k, Bs, k - 1) / nrm[k - 1]
        if nrm[k] < (delta - mu * mu) * nrm[k - 1]:
            for i in range(B.shape[0]):
                tmp = B[i, k]
                B[i, k] = B[i, k - 1]
                B[i, k - 1] = tmp
            for i in range(d):
                ti = T[i, k]
                T[i, k] = T[i, k - 1]
                T[i, k - 1] = ti
            changed = True
            _gram_schmidt(B, Bs, nrm)
            k = max(k - 1, 1)
        else:
            k += 1
    return changed


@njit(cache=True)
def _imatmul(X, Y):
    r, k = X.shape
    c = Y.shape[1]
    out = np.zeros((r, c), dtype=np.int64)
    for i in range(r):
        for j in range(c):
            s = 0
            for l in range(k):
                s += X[i, l] * Y[l, j]
            out[i, j] = s
    return out


@njit(cache=True)
def _better_key(a, b):
    """Canonical order on coefficient vectors (sign-normalized): True if a < b."""
    d = a.shape[0]
    fa = d
    fb = d
    for i in range(d):
        if a[i] != 0:
            fa = i
            break
    for i in range(d):
        if b[i] != 0:
            fb = i
            break
    if fa != fb:
        return fa < fb
    sa = 0
    sb = 0
    for i in range(d):
        sa += abs(a[i])
        sb += abs(b[i])
    if sa != sb:
        return sa < sb
    for i in range(d):
        if a[i] != b[i]:
            return a[i] > b[i]
    return False


@njit(cache=True)
def _normalize_sign(v):
    for i in range(v.shape[0]):
        if v[i] != 0:
            if v[i] < 0:
                for j in range(v.shape[0]):
                    v[j] = -v[j]
            return


@njit(cache=True)
def svp_enum(B, U, bound):
    """Minimal sup-norm nonzero vector of the lattice spanned by B's columns.

    The coefficient box |x_i| <= R * sum_j |B^-1_ij| (R the shortest column
    sup-norm) provably contains every vector of sup-norm <= R. Returns
    (value, coefficients in U-coordinates, needed box size); a negative value
    means the box exceeded ``bound``.
    """
    d = B.shape[1]
    Binv = np.linalg.inv(B)
    R = np.inf
    for j in range(d):
        s = 0.0
        for i in range(d):
            s = max(s, abs(B[i, j]))
        R = min(R, s)
    box = np.empty(d, dtype=np.int64)
    needed = 0
    for i in range(d):
        s = 0.0
        for j in range(d):
            s += abs(Binv[i, j])
        bi = np.int64(np.floor(R * s * (1.0 + 1e-9) + 1e-9))
        box[i] = bi
        needed = max(needed, bi)
    best_x = np.zeros(d, dtype=np.int64)
    if needed > bound:
        return -1.0, best_x, needed
    x = -box.copy()
    v = B @ x.astype(np.float64)
    best = np.inf
    cand = np.empty(d, dtype=np.int64)
    while True:
        # canonical half: first nonzero coordinate positive
        first = 0
        for i in range(d):
            if x[i] != 0:
                first = x[i]
                break
        if first > 0:
            val = 0.0
            for i in range(d):
                val = max(val, abs(v[i]))
            if val < best * (1.0 - _TIE):
                best = val
                for i in range(d):
                    s = 0
                    for j in range(d):
                        s += U[i, j] * x[j]
                    best_x[i] = s
                _normalize_sign(best_x)
            elif val <= best * (1.0 + _TIE):
                for i in range(d):
                    s = 0
                    for j in range(d):
                        s += U[i, j] * x[j]
                    cand[i] = s
                _normalize_sign(cand)
                if _better_key(cand, best_x):
                    best = min(best, val)
                    best_x[:] = cand
        # odometer step
        i = d - 1
        while i >= 0:
            if x[i] < box[i]:
                x[i] += 1
                v += B[:, i]
                break
            v -= (2 * box[i]) * B[:, i]
            x[i] = -box[i]
            i -= 1
        if i < 0:
            break
    return best, best_x, needed


@njit(cache=True)
def reduce_and_svp(B0, bound):
    d = B0.shape[1]
    B = B0.copy()
    T = np.eye(d, dtype=np.int64)
    lll_inplace(B, T, LLL_DELTA)
    return svp_enum(B, T, bound)


@njit(cache=True)
def svp_batch(Bs, bound):
    K = Bs.shape[0]
    d = Bs.shape[2]
    vals = np.empty(K)
    coefs = np.zeros((K, d), dtype=np.int64)
    needed = np.zeros(K, dtype=np.int64)
    for k in range(K):
        val, x, nd = reduce_and_svp(Bs[k], bound)
        vals[k] = val
        coefs[k] = x
        needed[k] = nd
    return vals, coefs, needed


@njit(cache=True)
def flow_scan(res, ub, U, m, n, times, start, stop, bound, force_idx, deltas, wits):
    """Shortest vectors of g_t applied to the basis with columns (res; ub).

    ``res`` holds the exact top block A*U_bot + U_top (rounded once) and
    ``ub`` the integer bottom block. Stops early when LLL wants to change the
    basis (status 1, so the caller can recompute ``res`` exactly) or when the
    enumeration box is too small (status 2).
    """
    d = m + n
    B = np.empty((d, d))
    T = np.eye(d, dtype=np.int64)
    for idx in range(start, stop):
        t = times[idx]
        a = np.exp(t / m)
        b = np.exp(-t / n)
        for i in range(m):
            for j in range(d):
                B[i, j] = res[i, j] * a
        for i in range(n):
            for j in range(d):
                B[m + i, j] = ub[i, j] * b
        T[:, :] = 0
        for i in range(d):
            T[i, i] = 1
        changed = lll_inplace(B, T, LLL_DELTA)
        if changed and idx != force_idx:
            return idx, 1, 0, T
        UT = _imatmul(U, T)
        val, x, nd = svp_enum(B, UT, bound)
        if val < 0:
            return idx, 2, nd, T
        deltas[idx] = val
        wits[idx, :] = x
    return stop, 0, 0, T
