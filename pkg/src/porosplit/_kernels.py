"""Numba kernels: level-based ILU factorization and triangular solves."""

from __future__ import annotations

import numpy as np
from numba import njit

_BIG_LEVEL = np.int32(2**30)


@njit(cache=True)
def ilu_factor(n, indptr, indices, data, level):
    """Row-wise IKJ incomplete LU with level-of-fill dropping.

    Fill entry (i, j) created through pivot k gets level lev(i,k)+lev(k,j)+1
    and is kept only if its level does not exceed `level`; updates to entries
    already in the pattern are always applied.  Returns combined LU factors
    (unit lower part strictly below the diagonal) in CSR arrays plus the
    diagonal positions, and the row index of the first zero pivot (-1 if the
    factorization succeeded).
    """
    cap = max(4 * indices.shape[0], 64)
    out_indptr = np.zeros(n + 1, np.int64)
    out_cols = np.empty(cap, np.int64)
    out_vals = np.empty(cap, np.float64)
    out_levs = np.empty(cap, np.int32)
    diag_pos = np.empty(n, np.int64)

    w_val = np.zeros(n, np.float64)
    w_lev = np.full(n, _BIG_LEVEL, np.int32)
    in_row = np.zeros(n, np.bool_)
    cols_buf = np.empty(n, np.int64)

    nnz = 0
    for i in range(n):
        nact = 0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            w_val[j] = data[p]
            w_lev[j] = 0
            in_row[j] = True
            cols_buf[nact] = j
            nact += 1
        if not in_row[i]:
            # keep a structural slot for the diagonal
            lo, hi = 0, nact
            while lo < hi:
                mid = (lo + hi) // 2
                if cols_buf[mid] < i:
                    lo = mid + 1
                else:
                    hi = mid
            for m in range(nact, lo, -1):
                cols_buf[m] = cols_buf[m - 1]
            cols_buf[lo] = i
            nact += 1
            w_val[i] = 0.0
            w_lev[i] = 0
            in_row[i] = True

        kk = 0
        while kk < nact:
            k = cols_buf[kk]
            if k >= i:
                break
            piv = out_vals[diag_pos[k]]
            f = w_val[k] / piv
            w_val[k] = f
            lev_ik = w_lev[k]
            for p in range(diag_pos[k] + 1, out_indptr[k + 1]):
                j = out_cols[p]
                newlev = lev_ik + out_levs[p] + np.int32(1)
                if in_row[j]:
                    w_val[j] -= f * out_vals[p]
                    if newlev < w_lev[j]:
                        w_lev[j] = newlev
                elif newlev <= level:
                    w_val[j] = -f * out_vals[p]
                    w_lev[j] = newlev
                    in_row[j] = True
                    lo, hi = kk + 1, nact
                    while lo < hi:
                        mid = (lo + hi) // 2
                        if cols_buf[mid] < j:
                            lo = mid + 1
                        else:
                            hi = mid
                    for m in range(nact, lo, -1):
                        cols_buf[m] = cols_buf[m - 1]
                    cols_buf[lo] = j
                    nact += 1
            kk += 1

        if w_val[i] == 0.0:
            # cleanup not needed; caller aborts
            return out_indptr, out_cols[:nnz], out_vals[:nnz], out_levs[:nnz], diag_pos, i

        if nnz + nact > cap:
            while nnz + nact > cap:
                cap *= 2
            new_cols = np.empty(cap, np.int64)
            new_vals = np.empty(cap, np.float64)
            new_levs = np.empty(cap, np.int32)
            new_cols[:nnz] = out_cols[:nnz]
            new_vals[:nnz] = out_vals[:nnz]
            new_levs[:nnz] = out_levs[:nnz]
            out_cols, out_vals, out_levs = new_cols, new_vals, new_levs

        for idx in range(nact):
            j = cols_buf[idx]
            out_cols[nnz] = j
            out_vals[nnz] = w_val[j]
            out_levs[nnz] = w_lev[j]
            if j == i:
                diag_pos[i] = nnz
            nnz += 1
            in_row[j] = False
            w_lev[j] = _BIG_LEVEL
            w_val[j] = 0.0
        out_indptr[i + 1] = nnz

    return out_indptr, out_cols[:nnz], out_vals[:nnz], out_levs[:nnz], diag_pos, -1


@njit(cache=True)
def ilu_solve(n, indptr, cols, vals, diag_pos, b):
    """Apply (LU)^-1 b with unit-lower L and upper U stored row-wise."""
    y = b.copy()
    for i in range(n):
        s = 0.0
        for p in range(indptr[i], diag_pos[i]):
            s += vals[p] * y[cols[p]]
        y[i] -= s
    for i in range(n - 1, -1, -1):
        s = 0.0
        for p in range(diag_pos[i] + 1, indptr[i + 1]):
            s += vals[p] * y[cols[p]]
        y[i] = (y[i] - s) / vals[diag_pos[i]]
    return y
