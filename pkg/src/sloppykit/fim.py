"""Fisher information, infinitesimal sloppiness and local identifiability.

The FIM used here is the Hessian of ``d(., p0)`` at ``p0``: ``K J^T Sigma^{-1} J``
for Gaussian noise and ``K J^T diag(1/rho) J`` for categorical noise. Its
rank is read off the singular values of the whitened Jacobian.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, InvalidTrialCount, SloppyError, ZeroProbabilityCell
from .linalg import RANK_THRESHOLD, SymmetricEigen, cholesky_solve, svd_rank, sym_eigen
from .model import DEFAULT_FD_STEP, ModelInstance, evaluate, jacobian_with_info

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FimReport:
    """Fisher information at ``p0`` with its spectrum.

    Attributes
    ----------
    fim : ndarray (r, r)
    eigen : SymmetricEigen
        Eigenpairs of ``fim``, descending.
    condition_number : float
        ``lambda_max / lambda_min``, or ``inf`` when the FIM is rank deficient.
    numerical_rank : int
    class_dimension : int
        ``r - numerical_rank``, the local dimension of the equivalence class.
    stiffest_direction, sloppiest_direction : ndarray (r,)
        Unit eigenvectors of the largest and smallest eigenvalue.
    one_sided : bool
        True when a one-sided stencil had to be used at a boundary.
    """

    p0: np.ndarray
    fim: np.ndarray
    eigen: SymmetricEigen
    singular_values: np.ndarray
    condition_number: float
    numerical_rank: int
    class_dimension: int
    stiffest_direction: np.ndarray
    sloppiest_direction: np.ndarray
    rank_threshold: float = RANK_THRESHOLD
    one_sided: bool = False

    @property
    def dim(self) -> int:
        return self.fim.shape[0]

    @property
    def full_rank(self) -> bool:
        return self.numerical_rank == self.dim


def _sign_normalize(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    return v if v[k] >= 0 else -v


def whitened_jacobian(model: ModelInstance, J: np.ndarray, phi0: np.ndarray) -> np.ndarray:
    """``B`` with ``B^T B`` equal to the FIM."""
    K = model.noise.replicates
    if model.noise.kind == "categorical":
        if np.any(phi0 <= 0.0):
            raise ZeroProbabilityCell("an outcome has probability zero at p0; the FIM is undefined")
        return np.sqrt(K / phi0)[:, None] * J
    return np.sqrt(K) * solve_triangular(model.noise.chol, J, lower=True)


def fim(model: ModelInstance, p0, scheme: str = "auto", step: float = DEFAULT_FD_STEP,
        rank_threshold: float = RANK_THRESHOLD) -> FimReport:
    """Fisher information matrix of ``model`` at ``p0``."""
    p0 = model.space.check(p0)
    J, one_sided = jacobian_with_info(model, p0, scheme, step)
    if one_sided:
        logger.warning("one-sided differences used at boundary point %s", p0.tolist())
    phi0 = evaluate(model, p0)
    B = whitened_jacobian(model, J, phi0)
    F = B.T @ B
    F = 0.5 * (F + F.T)
    return report_from_fim(p0, F, B, rank_threshold, one_sided)


def report_from_fim(p0, F, B=None, rank_threshold=RANK_THRESHOLD, one_sided=False) -> FimReport:
    """Assemble a :class:`FimReport`; ``B`` (a square root of ``F``) sharpens the rank test."""
    F = np.asarray(F, dtype=float)
    r = F.shape[0]
    eig = sym_eigen(F)
    if B is None:
        lam = np.clip(eig.eigenvalues, 0.0, None)
        sv = np.sqrt(lam)
        rank = 0 if sv[0] == 0 else int(np.sum(sv > rank_threshold * sv[0]))
    else:
        res = svd_rank(B, rank_threshold)
        sv = np.zeros(r)
        sv[: res.singular_values.size] = res.singular_values[:r]
        rank = res.numerical_rank
    # squared singular values carry the small end of the spectrum more accurately
    cond = float((sv[0] / sv[r - 1]) ** 2) if rank == r else np.inf
    return FimReport(
        p0=np.asarray(p0, dtype=float),
        fim=F,
        eigen=eig,
        singular_values=sv,
        condition_number=cond,
        numerical_rank=rank,
        class_dimension=r - rank,
        stiffest_direction=_sign_normalize(eig.eigenvectors[:, 0].copy()),
        sloppiest_direction=_sign_normalize(eig.eigenvectors[:, -1].copy()),
        rank_threshold=rank_threshold,
        one_sided=one_sided,
    )


def d_fim(report: FimReport, p, p_prime) -> float:
    """Quadratic pseudometric ``1/2 <dp, F dp>``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(p_prime, dtype=float)
    if p.shape != q.shape or p.shape != (report.dim,):
        raise DimensionMismatch(f"points of shape {p.shape}, {q.shape} for a {report.dim}-dim FIM")
    dp = p - q
    return max(0.5 * float(dp @ report.fim @ dp), 0.0)


def infinitesimal_sloppiness(report: FimReport) -> float:
    """FIM condition number; ``inf`` when the FIM is not full rank."""
    return report.condition_number


@dataclass(frozen=True)
class LocalIdentifiability:
    locally_identifiable: bool
    numerical_rank: int
    class_dimension: int


def local_identifiability(model: ModelInstance, p0, **kwargs) -> LocalIdentifiability:
    rep = fim(model, p0, **kwargs)
    return LocalIdentifiability(rep.full_rank, rep.numerical_rank, rep.class_dimension)


@dataclass(frozen=True)
class CramerRaoCheck:
    """Monte-Carlo MLE covariance against the inverse FIM."""

    covariance: np.ndarray
    mean: np.ndarray
    fim_inverse: np.ndarray
    standard_errors: np.ndarray
    min_eig_gap: float
    min_eig_se: float
    n_trials: int
    n_failed: int

    @property
    def failure_rate(self) -> float:
        return self.n_failed / self.n_trials

    def z_scores(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return (self.covariance - self.fim_inverse) / self.standard_errors


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for trial ``index``; independent of evaluation order."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


def simulate_data(model: ModelInstance, phi0: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Sufficient statistic of K replicates: sample mean (Gaussian) or frequencies (categorical)."""
    K = model.noise.replicates
    if model.noise.kind == "categorical":
        probs = np.clip(phi0, 0.0, None)
        return rng.multinomial(K, probs / probs.sum()) / K
    eps = model.noise.chol @ rng.standard_normal(phi0.size)
    return phi0 + eps / np.sqrt(K)


def mle_covariance_mc(model: ModelInstance, p0, trials: int, seed: int, max_iter: int = 200) -> CramerRaoCheck:
    """Sample covariance of the MLE over ``trials`` simulated data sets.

    Each data set is drawn from its own stream ``(seed, trial)`` and fitted
    from ``p0``; failed fits are counted and excluded.
    """
    from .identifiability import mle

    if not isinstance(trials, (int, np.integer)) or trials <= 0:
        raise InvalidTrialCount(f"trials must be a positive integer, got {trials!r}")
    p0 = model.space.check(p0)
    rep = fim(model, p0)
    if not rep.full_rank:
        raise SloppyError("the FIM is singular at p0; no Cramer-Rao bound to compare against")
    phi0 = evaluate(model, p0)
    estimates, failed = [], 0
    for i in range(trials):
        z = simulate_data(model, phi0, trial_rng(seed, i))
        try:
            res = mle(model, z, p0, max_iter=max_iter)
        except SloppyError:
            failed += 1
            continue
        if not res.converged:
            failed += 1
            continue
        estimates.append(res.estimate)
    X = np.array(estimates)
    n = X.shape[0]
    if n < 2:
        raise SloppyError("fewer than two successful fits")
    if failed / trials > 0.05:
        logger.warning("MLE failed on %d of %d trials", failed, trials)
    mean = X.mean(axis=0)
    dev = X - mean
    cov = dev.T @ dev / (n - 1)
    prods = dev[:, :, None] * dev[:, None, :]
    se = prods.std(axis=0, ddof=1) / np.sqrt(n)
    inv = cholesky_solve(rep.fim, np.eye(rep.dim))
    gap = sym_eigen(cov - inv)
    v = gap.eigenvectors[:, -1]
    proj = (dev @ v) ** 2
    return CramerRaoCheck(
        covariance=cov,
        mean=mean,
        fim_inverse=0.5 * (inv + inv.T),
        standard_errors=se,
        min_eig_gap=float(gap.eigenvalues[-1]),
        min_eig_se=float(proj.std(ddof=1) / np.sqrt(n)),
        n_trials=trials,
        n_failed=failed,
    )
