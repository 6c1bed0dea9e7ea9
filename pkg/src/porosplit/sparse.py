"""Sparse iterative linear algebra: GMRES, ILU(k), QR least squares, eigmax.

GMRES is right-preconditioned so the reported residual is the true residual
of the original system.  The ILU preconditioner uses level-of-fill dropping;
with a pattern large enough to hold the full fill it reproduces the exact LU
factorization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._kernels import ilu_factor, ilu_solve


@dataclass
class SolveStats:
    iterations: int
    relres: float
    converged: bool


class IluPrecond:
    """Combined LU factors of an incomplete factorization with level k."""

    def __init__(self, level, n, indptr, cols, vals, diag_pos):
        self.level = level
        self.n = n
        self._indptr = indptr
        self._cols = cols
        self._vals = vals
        self._diag_pos = diag_pos

    def solve(self, b: np.ndarray) -> np.ndarray:
        return ilu_solve(
            self.n, self._indptr, self._cols, self._vals, self._diag_pos,
            np.asarray(b, dtype=np.float64),
        )


def ilu(A: sp.spmatrix, level: int = 0) -> IluPrecond:
    """Level-k incomplete LU factorization of a square sparse matrix."""
    A = A.tocsr()
    if A.shape[0] != A.shape[1]:
        raise ValueError("ILU requires a square matrix")
    if not A.has_canonical_format:
        A.sum_duplicates()
    A.sort_indices()
    n = A.shape[0]
    indptr, cols, vals, _, diag_pos, err = ilu_factor(
        n,
        A.indptr.astype(np.int64),
        A.indices.astype(np.int64),
        A.data.astype(np.float64),
        np.int32(level),
    )
    if err >= 0:
        raise ValueError(f"zero pivot in ILU({level}) at row {int(err)}")
    return IluPrecond(level, n, indptr, cols, vals, diag_pos)


def gmres(
    A,
    b: np.ndarray,
    M: IluPrecond | None = None,
    rtol: float = 1e-8,
    max_iter: int | None = None,
    restart: int = 200,
    side: str = "right",
) -> tuple[np.ndarray, SolveStats]:
    """Preconditioned restarted GMRES.

    With side="right" (default) the convergence test is on the true relative
    residual ||b - A x|| / ||b||.  With side="left" the Krylov space is built
    for M^-1 A and the test is on the preconditioned residual
    ||M^-1 (b - A x)|| / ||M^-1 b||, which behaves like an error-based
    criterion when M approximates A well.  Non-convergence is flagged in the
    stats, not raised.
    """
    if side not in ("right", "left"):
        raise ValueError("side must be 'right' or 'left'")
    matvec = A if callable(A) else (lambda v: A @ v)
    psolve = M.solve if M is not None else (lambda v: v)
    left = side == "left" and M is not None
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    bnorm = np.linalg.norm(psolve(b)) if left else np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveStats(0, 0.0, True)
    if max_iter is None:
        max_iter = max(10 * restart, n)
    target = rtol * bnorm

    def residual(x):
        r = b - matvec(x)
        return psolve(r) if left else r

    x = np.zeros(n)
    total = 0
    while True:
        r = residual(x)
        rnorm = np.linalg.norm(r)
        if rnorm <= target or total >= max_iter:
            return x, SolveStats(total, rnorm / bnorm, rnorm <= target)

        m = min(restart, max_iter - total)
        V = np.empty((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.empty(m)
        sn = np.empty(m)
        g = np.zeros(m + 1)
        g[0] = rnorm
        V[0] = r / rnorm

        j = 0
        breakdown = False
        while j < m:
            if left:
                w = psolve(matvec(V[j]))
            else:
                w = matvec(psolve(V[j]))
            for i in range(j + 1):
                H[i, j] = V[i] @ w
                w -= H[i, j] * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            if H[j + 1, j] > 1e-14 * rnorm:
                V[j + 1] = w / H[j + 1, j]
            else:
                breakdown = True
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            cs[j] = H[j, j] / denom if denom > 0 else 1.0
            sn[j] = H[j + 1, j] / denom if denom > 0 else 0.0
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total += 1
            j += 1
            if abs(g[j]) <= target or breakdown or total >= max_iter:
                break

        y = scipy.linalg.solve_triangular(H[:j, :j], g[:j], lower=False)
        if left:
            x = x + V[:j].T @ y
        else:
            x = x + psolve(V[:j].T @ y)
        if breakdown:
            r = residual(x)
            rnorm = np.linalg.norm(r)
            return x, SolveStats(total, rnorm / bnorm, rnorm <= target)


def qr_lstsq(F: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Least squares min ||F c - rhs|| by pivoted QR with rank truncation.

    Columns that are (numerically) linearly dependent are dropped and their
    coefficients set to zero, so degenerate inputs still give a finite
    solution.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    rhs = np.asarray(rhs, dtype=float)
    if F.shape[0] < F.shape[1]:
        raise ValueError("need at least as many rows as columns")
    Q, R, piv = scipy.linalg.qr(F, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return np.zeros(F.shape[1])
    tol = max(F.shape) * np.finfo(float).eps * diag[0]
    rank = int(np.sum(diag > tol))
    c = np.zeros(F.shape[1])
    qtb = Q.T @ rhs
    c[piv[:rank]] = scipy.linalg.solve_triangular(
        R[:rank, :rank], qtb[:rank], lower=False
    )
    return c


def generalized_symmetric_eig_max(
    A: sp.spmatrix,
    B: sp.spmatrix,
    tol: float = 1e-8,
    max_iter: int = 5000,
) -> tuple[float, np.ndarray]:
    """Dominant eigenpair of B^-1 A for symmetric A and SPD B.

    Uses power iteration preconditioned by a direct factorization of B and
    reports the Rayleigh quotient.  A zero A short-circuits to eigenvalue 0.
    """
    A = A.tocsr()
    B = B.tocsc()
    n = A.shape[0]
    if A.nnz == 0 or np.max(np.abs(A.data)) == 0.0:
        return 0.0, np.zeros(n)
    solve_b = spla.splu(B).solve

    rng = np.random.default_rng(0)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iter):
        ax = A @ x
        bx = B @ x
        lam_new = float(x @ ax) / float(x @ bx)
        z = solve_b(ax)
        znorm = np.linalg.norm(z)
        if znorm == 0.0:
            return 0.0, x
        z /= znorm
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            return lam_new, z
        lam = lam_new
        x = z
    raise RuntimeError(
        f"power iteration did not converge; last Rayleigh quotient {lam}"
    )
