"""Dense kernels for the small matrices this package deals with (r, N <= ~50).

The symmetric eigensolver is a plain cyclic Jacobi iteration; everything else
leans on LAPACK through numpy/scipy with the extra checks the analyses rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NotPositiveDefinite, NotSquare, SingularSystem

RANK_THRESHOLD = 1e-8

_MAX_SWEEPS = 100


@dataclass(frozen=True)
class SymmetricEigen:
    """Eigenpairs sorted by descending eigenvalue; ``eigenvectors[:, i]`` pairs with ``eigenvalues[i]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class SvdResult:
    singular_values: np.ndarray
    numerical_rank: int
    rel_threshold: float


def _as_square(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NotSquare(f"expected a square matrix, got shape {A.shape}")
    return A


def sym_eigen(A) -> SymmetricEigen:
    """Eigen-decompose a symmetric matrix with cyclic Jacobi rotations.

    The input is symmetrized as ``(A + A.T) / 2`` first. Sweeps continue until
    the off-diagonal Frobenius norm drops to ``1e-14 * ||A||_F``.
    """
    A = _as_square(A)
    n = A.shape[0]
    a = 0.5 * (A + A.T)
    v = np.eye(n)
    norm = np.linalg.norm(a)
    if n == 1 or norm == 0.0:
        return _sorted_eigen(np.diag(a).copy(), v)

    target = 1e-14 * norm
    for _ in range(_MAX_SWEEPS):
        off = np.linalg.norm(a[~np.eye(n, dtype=bool)])
        if off <= target:
            break
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                rotated = True
                diff = a[q, q] - a[p, p]
                if abs(diff) > 1e150 * abs(apq):
                    # tau would overflow; the small-angle limit is exact to rounding
                    t = apq / diff
                else:
                    tau = diff / (2.0 * apq)
                    if tau >= 0.0:
                        t = 1.0 / (tau + np.hypot(1.0, tau))
                    else:
                        t = -1.0 / (-tau + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ rot
                a[idx, :] = rot.T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                v[:, idx] = v[:, idx] @ rot
        if not rotated:
            break
    return _sorted_eigen(np.diag(a).copy(), v)


def _sorted_eigen(w: np.ndarray, v: np.ndarray) -> SymmetricEigen:
    order = np.argsort(-w, kind="stable")
    return SymmetricEigen(eigenvalues=w[order], eigenvectors=v[:, order])


def svd_rank(A, rel_threshold: float = RANK_THRESHOLD) -> SvdResult:
    """Singular values (descending) and the count of those above ``rel_threshold * sigma_max``.

    Small matrices go through one-sided Jacobi rotations on the columns of
    ``A`` itself, which keeps tiny singular values accurate to about
    ``eps * sigma_max`` (squaring into ``A^T A`` would lose half the digits).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if min(A.shape) <= 32:
        sv = _one_sided_jacobi(A if A.shape[0] >= A.shape[1] else A.T)
    else:
        sv = np.linalg.svd(A, compute_uv=False)
    sv = np.sort(sv)[::-1]
    smax = sv[0] if sv.size else 0.0
    rank = 0 if smax == 0.0 else int(np.sum(sv > rel_threshold * smax))
    return SvdResult(singular_values=sv, numerical_rank=rank, rel_threshold=rel_threshold)


def _one_sided_jacobi(A: np.ndarray) -> np.ndarray:
    u = A.astype(float, copy=True)
    n = u.shape[1]
    eps = np.finfo(float).eps
    for _ in range(_MAX_SWEEPS):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                alpha = u[:, i] @ u[:, i]
                beta = u[:, j] @ u[:, j]
                gamma = u[:, i] @ u[:, j]
                if gamma == 0.0 or abs(gamma) <= eps * np.sqrt(alpha * beta):
                    continue
                rotated = True
                if abs(beta - alpha) > 1e150 * abs(gamma):
                    t = gamma / (beta - alpha)
                else:
                    zeta = (beta - alpha) / (2.0 * gamma)
                    t = np.copysign(1.0, zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                c = 1.0 / np.hypot(1.0, t)
                s = c * t
                ui = u[:, i].copy()
                u[:, i] = c * ui - s * u[:, j]
                u[:, j] = s * ui + c * u[:, j]
        if not rotated:
            break
    return np.linalg.norm(u, axis=0)


def cholesky_factor(S) -> np.ndarray:
    """Lower Cholesky factor, rejecting pivots below ``1e-13 * max(diag(S))``."""
    S = _as_square(S)
    scale = np.max(np.abs(np.diag(S))) if S.size else 0.0
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("matrix is not positive definite") from exc
    if scale == 0.0 or np.min(np.diag(L) ** 2) <= 1e-13 * scale:
        raise NotPositiveDefinite("Cholesky pivot below 1e-13 * max diagonal")
    return L


def cholesky_solve(S, B, factor: np.ndarray | None = None) -> np.ndarray:
    """Return ``S^{-1} B`` through a Cholesky factorization and two triangular solves."""
    L = cholesky_factor(S) if factor is None else factor
    B = np.asarray(B, dtype=float)
    y = solve_triangular(L, B, lower=True)
    return solve_triangular(L.T, y, lower=False)


def lyapunov_solve(A, Q) -> np.ndarray:
    """Solve ``A^T P + P A = -Q`` by vectorization and a dense LU solve.

    Sized for m up to ~20 (Kronecker systems of at most 400 x 400).
    """
    A = _as_square(A)
    Q = _as_square(Q)
    m = A.shape[0]
    if Q.shape != A.shape:
        raise NotSquare(f"Q has shape {Q.shape}, expected {A.shape}")
    eye = np.eye(m)
    # column-major vec: vec(A^T P) = (I kron A^T) vec(P), vec(P A) = (A^T kron I) vec(P)
    K = np.kron(eye, A.T) + np.kron(A.T, eye)
    rhs = -Q.reshape(-1, order="F")
    if np.linalg.cond(K) > 1e14:
        raise SingularSystem("Lyapunov operator is (numerically) singular")
    try:
        x = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("Lyapunov operator is singular") from exc
    P = x.reshape(m, m, order="F")
    return 0.5 * (P + P.T)
