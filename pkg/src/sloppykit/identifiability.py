"""Structural and practical identifiability probes.

Equivalence testing, continuation along one-dimensional equivalence classes,
maximum-likelihood fitting and likelihood-region boundedness checks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular
from scipy.stats import chi2, norm, qmc

from .errors import CorrectorDivergence, ModelDomainError, MleFailure, SloppyError, WrongKernelDimension
from .linalg import RANK_THRESHOLD, svd_rank, sym_eigen
from .model import ModelInstance, evaluate, jacobian_with_info

logger = logging.getLogger(__name__)

TINY_PROB = 1e-300
FLAT_REL = 1e-14
ARMIJO = 1e-4


# ---------------------------------------------------------------- equivalence


@dataclass(frozen=True)
class EquivalenceVerdict:
    equivalent: bool
    residual: float
    tolerance: float


def test_equivalence(model: ModelInstance, p, p_prime, tol: Optional[float] = None) -> EquivalenceVerdict:
    """Do ``p`` and ``p_prime`` give the same perfect data (sup norm, within ``tol``)?"""
    a = evaluate(model, p)
    b = evaluate(model, p_prime)
    if tol is None:
        tol = 1e-10 * max(1.0, float(np.max(np.abs(a))))
    res = float(np.max(np.abs(a - b)))
    return EquivalenceVerdict(res <= tol, res, float(tol))


# keep pytest from collecting the function above when it is imported into test modules
test_equivalence.__test__ = False


# ---------------------------------------------------------------- fiber tracing


@dataclass(frozen=True)
class FiberTrace:
    p0: np.ndarray
    points: np.ndarray
    arc_length: float
    drift: float
    stop_reason: str

    @property
    def n_steps(self) -> int:
        return self.points.shape[0] - 1


def _kernel(model, p, rank_threshold, scheme):
    J, _ = jacobian_with_info(model, p, scheme)
    rank = svd_rank(J, rank_threshold).numerical_rank
    eig = sym_eigen(J.T @ J)
    return J, model.dim - rank, eig.eigenvectors[:, -1]


def trace_fiber(model: ModelInstance, p0, steps: int = 100, step_size: float = 1e-2,
                tol: float = 1e-8, scheme: str = "auto", rank_threshold: float = RANK_THRESHOLD,
                max_corrector: int = 20) -> FiberTrace:
    """Follow the one-dimensional equivalence class through ``p0``.

    Predictor steps go along the unit kernel vector of the Jacobian (sign kept
    consistent between steps); Gauss-Newton corrections restricted to the
    complement of that vector pull ``phi`` back to ``phi(p0)`` until the
    residual is at most ``tol``. Stops at the boundary of P, after ``steps``
    steps, or when the kernel dimension changes.
    """
    if steps < 1 or not step_size > 0:
        raise ValueError("steps and step_size must be positive")
    p = model.space.check(p0).copy()
    phi0 = evaluate(model, p)
    _, kdim, v = _kernel(model, p, rank_threshold, scheme)
    if kdim != 1:
        raise WrongKernelDimension(f"kernel dimension at p0 is {kdim}, expected 1")
    k = int(np.argmax(np.abs(v)))
    direction = v if v[k] > 0 else -v

    points = [p.copy()]
    drift = 0.0
    reason = "steps"
    for _ in range(steps):
        h = step_size
        for _attempt in range(6):
            q = p + h * direction
            if not model.space.contains(q):
                reason = "boundary"
                break
            try:
                q, res = _correct(model, q, direction, phi0, tol, max_corrector)
            except (CorrectorDivergence, ModelDomainError):
                h *= 0.5
                continue
            break
        else:
            raise CorrectorDivergence(f"corrector failed near {p.tolist()}")
        if reason == "boundary":
            break
        if not model.space.contains(q):
            reason = "boundary"
            break
        p = q
        points.append(p.copy())
        drift = max(drift, res)
        try:
            _, kdim, v = _kernel(model, p, rank_threshold, scheme)
        except ModelDomainError:
            reason = "domain"
            break
        if kdim != 1:
            reason = "rank_change"
            break
        direction = v if v @ direction >= 0 else -v
    pts = np.array(points)
    arc = float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1))) if len(pts) > 1 else 0.0
    return FiberTrace(np.asarray(p0, dtype=float), pts, arc, drift, reason)


def _correct(model, q, direction, phi0, tol, max_iter):
    # orthonormal basis of the hyperplane normal to the predictor direction
    eye = np.eye(model.dim)
    basis = np.linalg.qr(np.column_stack([direction, eye]))[0][:, 1: model.dim]
    res = np.inf
    for _ in range(max_iter + 1):
        diff = evaluate(model, q) - phi0
        res = float(np.max(np.abs(diff)))
        if res <= tol:
            return q, res
        J, _ = jacobian_with_info(model, q)
        step, *_ = np.linalg.lstsq(J @ basis, -diff, rcond=None)
        q = model.space.clip(q + basis @ step)
    raise CorrectorDivergence(f"residual {res:.3g} after {max_iter} corrector iterations")


# ---------------------------------------------------------------- likelihood


def negative_log_likelihood(model: ModelInstance, p, z0) -> float:
    """``-log psi(p, z0)`` for the sufficient statistic ``z0`` of K replicates.

    Gaussian: ``K/2 ||z0 - phi||^2_{Sigma^-1} + NK/2 log(2 pi) + K/2 log det Sigma``
    with ``z0`` the replicate mean. Categorical: ``K sum z0_i (-log rho_i)``
    with ``z0`` the outcome frequencies.
    """
    return _nll_from_phi(model, evaluate(model, p), np.asarray(z0, dtype=float))


def _nll_from_phi(model, phi, z0) -> float:
    K = model.noise.replicates
    if model.noise.kind == "categorical":
        seen = z0 > 0
        if np.any(phi[seen] < TINY_PROB):
            return np.inf
        return float(-K * np.sum(z0[seen] * np.log(phi[seen])))
    w = solve_triangular(model.noise.chol, z0 - phi, lower=True)
    n = phi.size
    return float(0.5 * K * (w @ w) + 0.5 * n * K * np.log(2 * np.pi) + 0.5 * K * model.noise.log_det)


def _nll_gradient_and_hessian(model, p, z0):
    """Gradient of the nll and its Gauss-Newton / Fisher-scoring curvature."""
    J, _ = jacobian_with_info(model, p)
    phi = evaluate(model, p)
    K = model.noise.replicates
    if model.noise.kind == "categorical":
        live = phi >= TINY_PROB
        Jl = J[live]
        g = -K * Jl.T @ (z0[live] / phi[live])
        H = K * Jl.T @ (Jl / phi[live][:, None])
        return g, 0.5 * (H + H.T)
    L = model.noise.chol
    B = np.sqrt(K) * solve_triangular(L, J, lower=True)
    r = np.sqrt(K) * solve_triangular(L, z0 - phi, lower=True)
    H = B.T @ B
    return -B.T @ r, 0.5 * (H + H.T)


@dataclass(frozen=True)
class MleResult:
    estimate: np.ndarray
    neg_log_likelihood: float
    converged: bool
    iterations: int
    start: np.ndarray
    gradient_norm: float


def _projected(g, p, space):
    g = g.copy()
    at_lo = (p <= space.lower) & (g > 0)
    at_hi = (p >= space.upper) & (g < 0)
    g[at_lo | at_hi] = 0.0
    return g


def mle(model: ModelInstance, z0, start, max_iter: int = 200, gtol: float = 1e-8,
        damping: float = 1e-3) -> MleResult:
    """Maximum-likelihood estimate from ``start``.

    Levenberg-Marquardt (Gaussian) or damped Fisher scoring (categorical)
    with Marquardt diagonal scaling; coordinates pinned at a bound with the
    gradient pushing outward are frozen for the step and every trial point is
    projected back into P. Converged means the projected gradient is at most
    ``gtol * max(1, |nll|)``.
    """
    z0 = np.asarray(z0, dtype=float).reshape(-1)
    if z0.size != model.output_dim:
        raise ValueError(f"data has {z0.size} entries, model produces {model.output_dim}")
    space = model.space
    start = space.clip(space.check(start))
    p = start.copy()
    f = negative_log_likelihood(model, p, z0)
    if not np.isfinite(f):
        raise MleFailure("likelihood is zero at the start point")
    lam = damping
    g, H = _nll_gradient_and_hessian(model, p, z0)
    gp = _projected(g, p, space)
    it = 0
    converged = False
    while True:
        gnorm = float(np.linalg.norm(gp))
        if gnorm <= gtol * max(1.0, abs(f)):
            # polish: a few more exact steps cost little and tighten the fit
            converged = True
            if gnorm <= 1e-3 * gtol * max(1.0, abs(f)):
                break
        if it >= max_iter:
            break
        it += 1
        free = gp != 0.0
        if not np.any(free):
            break
        Hf = H[np.ix_(free, free)]
        diag = np.maximum(np.diag(Hf), 1e-12 * max(1.0, float(np.max(np.diag(H)))))
        accepted = False
        while lam <= 1e16:
            try:
                step = np.linalg.solve(Hf + lam * np.diag(diag), -g[free])
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            trial = p.copy()
            trial[free] += step
            trial = space.clip(trial)
            try:
                ft = negative_log_likelihood(model, trial, z0)
            except ModelDomainError:
                ft = np.inf
            actual = f - ft
            taken = trial[free] - p[free]
            predicted = -(g[free] @ taken + 0.5 * taken @ Hf @ taken)
            if actual > 0 and actual >= ARMIJO * predicted:
                accepted = True
                gain = actual / predicted if predicted > 0 else 1.0
                gt, Ht = _nll_gradient_and_hessian(model, trial, z0)
                break
            if ft <= f + FLAT_REL * max(1.0, abs(f)):
                # the nll is flat to rounding here; judge the step by the gradient
                gt, Ht = _nll_gradient_and_hessian(model, trial, z0)
                if np.linalg.norm(_projected(gt, trial, space)) < gnorm:
                    accepted = True
                    gain = 1.0
                    break
            lam *= 10
        if not accepted:
            break
        # gain-ratio damping: poor model agreement keeps the damping up even on
        # accepted steps, which stops Gauss-Newton from bouncing across a valley
        if gain > 0.75:
            lam = max(lam / 10, 1e-12)
        elif gain < 0.25:
            lam *= 10
        p, f = trial, ft
        g, H = gt, Ht
        gp = _projected(g, p, space)
    gnorm = float(np.linalg.norm(gp))
    converged = gnorm <= gtol * max(1.0, abs(f))
    return MleResult(p, f, converged, it, start, gnorm)


def start_points(model: ModelInstance, n: int, seed: int, box=None) -> np.ndarray:
    """``n`` scrambled Halton points in ``box`` (default: the model's sampling box)."""
    lo, hi = model.sampling_bounds() if box is None else (np.asarray(box[0], float), np.asarray(box[1], float))
    if n <= 0:
        return np.zeros((0, model.dim))
    u = qmc.Halton(d=model.dim, scramble=True, seed=np.random.default_rng(seed)).random(n)
    return model.space.clip(lo + u * (hi - lo))


def multistart_mle(model: ModelInstance, z0, starts: int, seed: int, start=None, box=None,
                   max_iter: int = 200) -> list[MleResult]:
    """One fit from ``start`` (if given) plus low-discrepancy starts, ``starts`` in total."""
    pts = []
    if start is not None:
        pts.append(model.space.check(start))
    pts.extend(start_points(model, starts - len(pts), seed, box))
    results = []
    for s in pts:
        try:
            results.append(mle(model, z0, s, max_iter=max_iter))
        except (MleFailure, ModelDomainError) as exc:
            logger.info("start %s failed: %s", np.asarray(s).tolist(), exc)
    return results


def best_result(results) -> MleResult:
    ok = [r for r in results if r.converged]
    if not ok:
        raise MleFailure("no start converged")
    return min(ok, key=lambda r: r.neg_log_likelihood)


# ---------------------------------------------------------------- confidence regions


def confidence_threshold(nll_hat: float, alpha: float, dim: int) -> float:
    """Likelihood-ratio level ``nll_hat + chi2_r(1 - alpha) / 2``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return float(nll_hat + 0.5 * chi2.ppf(1.0 - alpha, dim))


def in_confidence_region(model: ModelInstance, p, z0, epsilon: float) -> bool:
    return negative_log_likelihood(model, p, z0) < epsilon


def sphere_directions(dim: int, n: int, seed: int) -> np.ndarray:
    """Low-discrepancy unit vectors: Halton points pushed through the normal quantile."""
    u = qmc.Halton(d=dim, scramble=True, seed=np.random.default_rng(seed)).random(n)
    g = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(frozen=True)
class ConfidenceAssessment:
    z0: np.ndarray
    alpha: float
    epsilon: float
    bounded: bool
    escape_directions: list
    probe_radius: float
    n_directions: int
    estimate: MleResult
    mle_results: list = field(default_factory=list)


def assess_practical_identifiability(model: ModelInstance, z0, alpha: float = 0.05, starts: int = 8,
                                     seed: int = 0, start=None, start_box=None,
                                     r_max: Optional[float] = None,
                                     n_directions: Optional[int] = None,
                                     growth: float = 1.5) -> ConfidenceAssessment:
    """Is the likelihood region ``U_eps(z0)`` bounded (at probe resolution)?

    From the best MLE, rays in ``n_directions`` low-discrepancy directions are
    marched outwards geometrically up to reference radius ``r_max``. A ray is
    an escape when every feasible probe point stays below ``eps`` and the
    point at ``r_max`` itself is feasible.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    z0 = np.asarray(z0, dtype=float).reshape(-1)
    results = multistart_mle(model, z0, starts, seed, start, start_box)
    best = best_result(results)
    p_hat = best.estimate
    eps = confidence_threshold(best.neg_log_likelihood, alpha, model.dim)
    if r_max is None:
        r_max = 1e4 * (1.0 + float(np.linalg.norm(p_hat)))
    if n_directions is None:
        n_directions = 64 if model.dim <= 3 else 256
    inv_sqrt_w = 1.0 / model.metric.sqrt_weights(model.dim)
    radii = []
    rad = 1e-3 * (1.0 + float(np.linalg.norm(p_hat)))
    while rad < r_max:
        radii.append(rad)
        rad *= growth
    radii.append(r_max)

    escapes = []
    for u in sphere_directions(model.dim, n_directions, seed + 1):
        step = inv_sqrt_w * u
        escaped = True
        for rad in radii:
            q = p_hat + rad * step
            if not model.space.contains(q):
                if rad == r_max:
                    escaped = False
                continue
            try:
                val = negative_log_likelihood(model, q, z0)
            except ModelDomainError:
                if rad == r_max:
                    escaped = False
                continue
            if not val < eps:
                escaped = False
                break
        if escaped:
            escapes.append(u)
    return ConfidenceAssessment(z0, float(alpha), eps, not escapes, escapes, float(r_max),
                                int(n_directions), best, results)
