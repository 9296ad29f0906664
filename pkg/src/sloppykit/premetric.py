"""Noise-induced premetric d(p, p0) and the reference metric on parameter space.

d(p, p0) is the KL divergence between the data distributions at p and p0,
in closed form for Gaussian and categorical noise, plus the L2 distance
between output trajectories for linear parameter-varying systems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch
from .linalg import lyapunov_solve
from .model import ModelInstance, ReferenceMetric, evaluate

ROUNDOFF = 1e-12
TINY_PROB = 1e-300


@dataclass(frozen=True)
class PremetricValue:
    value: float
    kind: str

    def __float__(self):
        return self.value


def _clamp(v: float) -> float:
    if -ROUNDOFF <= v < 0.0:
        return 0.0
    return v


def gaussian_from_predictions(model: ModelInstance, phi, phi0) -> float:
    diff = np.asarray(phi, dtype=float) - np.asarray(phi0, dtype=float)
    w = solve_triangular(model.noise.chol, diff, lower=True)
    return _clamp(0.5 * model.noise.replicates * float(w @ w))


def categorical_from_predictions(model: ModelInstance, rho, rho0) -> float:
    rho = np.asarray(rho, dtype=float)
    rho0 = np.asarray(rho0, dtype=float)
    live = rho >= TINY_PROB
    if np.any(live & (rho0 < TINY_PROB)):
        return np.inf
    r, r0 = rho[live], rho0[live]
    return _clamp(model.noise.replicates * float(np.sum(r * np.log(r / r0))))


def d_gaussian(model: ModelInstance, p, p0) -> PremetricValue:
    """``K/2 <dphi, Sigma^{-1} dphi>`` with ``dphi = phi(p) - phi(p0)``."""
    v = gaussian_from_predictions(model, evaluate(model, p), evaluate(model, p0))
    return PremetricValue(v, "gaussian_kl")


def d_categorical(model: ModelInstance, p, p0) -> PremetricValue:
    """``K sum rho_i(p) log(rho_i(p) / rho_i(p0))``; ``inf`` when absolute continuity fails."""
    v = categorical_from_predictions(model, evaluate(model, p), evaluate(model, p0))
    return PremetricValue(v, "categorical_kl")


def premetric(model: ModelInstance, p, p0) -> PremetricValue:
    """Dispatch on the noise kind."""
    if model.noise.kind == "categorical":
        return d_categorical(model, p, p0)
    return d_gaussian(model, p, p0)


def premetric_from_predictions(model: ModelInstance, phi, phi0) -> float:
    if model.noise.kind == "categorical":
        return categorical_from_predictions(model, phi, phi0)
    return gaussian_from_predictions(model, phi, phi0)


def premetric_gradient_wrt_prediction(model: ModelInstance, phi, phi0) -> np.ndarray:
    """Gradient of d with respect to phi(p), holding phi(p0) fixed."""
    phi = np.asarray(phi, dtype=float)
    phi0 = np.asarray(phi0, dtype=float)
    K = model.noise.replicates
    if model.noise.kind == "categorical":
        g = np.zeros_like(phi)
        live = phi >= TINY_PROB
        g[live] = K * (np.log(phi[live] / phi0[live]) + 1.0)
        return g
    L = model.noise.chol
    w = solve_triangular(L, phi - phi0, lower=True)
    return K * solve_triangular(L.T, w, lower=False)


def d_infinity(model: ModelInstance, pa, pb) -> PremetricValue:
    """Integral over [0, inf) of ``||y(t; pa) - y(t; pb)||^2`` for an LPV model.

    Uses the augmented system ``diag(A(p), A(p'))`` with output ``[C, -C]`` and
    its observability Gramian.
    """
    ex = model.extras
    if "state_matrix" not in ex:
        raise TypeError("d_infinity needs an LPV model")
    k, m = ex["param_dim"], ex["state_dim"]
    pa = model.space.check(pa)
    pb = model.space.check(pb)
    Aa = ex["state_matrix"](pa[:k])
    Ab = ex["state_matrix"](pb[:k])
    C = ex["C"]
    A_bar = np.zeros((2 * m, 2 * m))
    A_bar[:m, :m] = Aa
    A_bar[m:, m:] = Ab
    C_bar = np.hstack([C, -C])
    P = lyapunov_solve(A_bar, C_bar.T @ C_bar)
    x_bar = np.concatenate([pa[k:], pb[k:]])
    return PremetricValue(_clamp(float(x_bar @ P @ x_bar)), "l2_continuous")


def d_reference(metric: ReferenceMetric, p, p0) -> float:
    """Euclidean or weighted Euclidean distance ``||W^{1/2} (p - p0)||``."""
    p = np.asarray(p, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    if p.shape != p0.shape:
        raise DimensionMismatch(f"shapes {p.shape} and {p0.shape} differ")
    if metric.weights is not None and metric.kind == "weighted" and metric.weights.shape != p.shape:
        raise DimensionMismatch("metric weights do not match the parameter dimension")
    return float(np.linalg.norm(metric.sqrt_weights(p.size) * (p - p0)))
