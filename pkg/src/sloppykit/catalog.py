"""Ready-made model instances with analytic Jacobians where formulas exist.

Each ``make_*`` constructor accepts the noise description (covariance and
replicate count) and returns an immutable :class:`ModelInstance`.
``CATALOG`` maps the public names to constructors and parameter docs.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Callable

import numpy as np

from .errors import Degenerate, DuplicateTimepoints, NotHurwitz, SloppyError
from .model import ModelInstance, NoiseModel, ParameterSpace, PredictionMap, ReferenceMetric
from .ode import IvpSpec, integrate

CONFLUENT_REL = 1e-7
DEGENERATE_TOL = 1e-12
HURWITZ_MARGIN = 1e-9


class NoPredictionMap(SloppyError):
    """The model has no finite-dimensional data (LPV without timepoints)."""


def _timepoints(t, positive=False, nonneg=False) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.ndim != 1 or t.size < 1:
        raise ValueError("timepoints must be a non-empty vector")
    if np.unique(t).size != t.size:
        raise DuplicateTimepoints(f"timepoints contain duplicates: {t.tolist()}")
    if positive and np.any(t <= 0):
        raise ValueError("timepoints must be positive")
    if nonneg and np.any(t < 0):
        raise ValueError("timepoints must be nonnegative")
    return t


def _noise(covariance, replicates, n_out) -> NoiseModel:
    if covariance is None or (isinstance(covariance, str) and covariance == "identity"):
        covariance = np.eye(n_out)
    cov = np.atleast_2d(np.asarray(covariance, dtype=float))
    if cov.shape == (1, 1) and n_out > 1:
        cov = cov[0, 0] * np.eye(n_out)
    return NoiseModel.gaussian(cov, replicates)


def _instance(name, lower, upper, n_out, f, jac, noise, sample_box, **extras) -> ModelInstance:
    space = ParameterSpace(np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))
    pred = PredictionMap(space.dim, n_out, f, jac)
    box = (np.asarray(sample_box[0], dtype=float), np.asarray(sample_box[1], dtype=float))
    return ModelInstance(name, space, pred, noise, ReferenceMetric(), box, extras)


# ---------------------------------------------------------------- line


def make_line(timepoints=(0.0, 1.0), covariance=None, replicates: int = 1) -> ModelInstance:
    """Straight line ``a0 + a1 t`` observed at ``timepoints``; P = R^2."""
    t = _timepoints(timepoints, nonneg=True)
    if t.size < 2:
        raise ValueError("the line model needs at least two timepoints")
    design = np.column_stack([np.ones_like(t), t])

    def f(p):
        return design @ p

    def jac(p):
        return design.copy()

    return _instance("line", [-np.inf] * 2, [np.inf] * 2, t.size, f, jac,
                     _noise(covariance, replicates, t.size), ([-2, -2], [2, 2]),
                     timepoints=t)


# ---------------------------------------------------------------- sum of exponentials


def make_sum_exp(timepoints=(1 / 3, 1.0, 3.0), covariance=None, replicates: int = 1) -> ModelInstance:
    """``exp(-a t) + exp(-b t)`` at positive ``timepoints``; P = [0, inf)^2."""
    t = _timepoints(timepoints, positive=True)

    def f(p):
        return np.exp(-p[0] * t) + np.exp(-p[1] * t)

    def jac(p):
        return np.column_stack([-t * np.exp(-p[0] * t), -t * np.exp(-p[1] * t)])

    return _instance("sum_exp", [0.0, 0.0], [np.inf, np.inf], t.size, f, jac,
                     _noise(covariance, replicates, t.size), ([0, 0], [5, 5]),
                     timepoints=t)


# ---------------------------------------------------------------- two compartments


def _q(s):
    """(1 - exp(-s)) / s for s >= 0, with q(0) = 1."""
    s = np.asarray(s, dtype=float)
    out = np.ones_like(s)
    nz = s > 0
    out[nz] = -np.expm1(-s[nz]) / s[nz]
    return out


def _dq(s):
    """Derivative of :func:`_q`; power series near zero."""
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    small = s < 0.1
    ss = s[small]
    acc = np.zeros_like(ss)
    fact = 2.0  # (k+1)!
    for k in range(1, 20):
        acc += (-1) ** k * k * ss ** (k - 1) / fact
        fact *= k + 2
    out[small] = acc
    sl = s[~small]
    out[~small] = (np.exp(-sl) * (sl + 1.0) - 1.0) / sl ** 2
    return out


def make_two_compartment(timepoints=(0.5, 1.0, 2.0), c1: float = 1.0, covariance=None,
                         replicates: int = 1) -> ModelInstance:
    """Two-compartment chain ``x1' = -p1 x1, x2' = p1 x1 - p2 x2`` from ``(c1, 0)``.

    Output is ``(x1(t_1), x2(t_1), x1(t_2), x2(t_2), ...)`` from the exact
    solution. P = [0, inf)^2 (the boundary p1 = 0 is included on purpose).
    """
    t = _timepoints(timepoints, positive=True)
    if not c1 > 0:
        raise ValueError("c1 must be positive")

    def parts(p):
        p1, p2 = p
        lo, hi = min(p1, p2), max(p1, p2)
        s = (hi - lo) * t
        base = np.exp(-lo * t)
        return p1, p2, lo, s, base

    def f(p):
        p1, p2, lo, s, base = parts(p)
        x1 = c1 * np.exp(-p1 * t)
        if abs(p1 - p2) < CONFLUENT_REL * max(1.0, abs(p1)):
            x2 = c1 * p1 * t * np.exp(-p1 * t)
        else:
            # (e^{-p1 t} - e^{-p2 t}) / (p2 - p1), symmetric in (p1, p2)
            x2 = c1 * p1 * base * t * _q(s)
        return np.column_stack([x1, x2]).reshape(-1)

    def jac(p):
        p1, p2, lo, s, base = parts(p)
        g = base * t * _q(s)
        d_hi = base * t * t * _dq(s)
        d_lo = -t * g - d_hi
        g1, g2 = (d_lo, d_hi) if p1 <= p2 else (d_hi, d_lo)
        J = np.zeros((2 * t.size, 2))
        J[0::2, 0] = -c1 * t * np.exp(-p1 * t)
        J[1::2, 0] = c1 * g + c1 * p1 * g1
        J[1::2, 1] = c1 * p1 * g2
        return J

    return _instance("two_compartment", [0.0, 0.0], [np.inf, np.inf], 2 * t.size, f, jac,
                     _noise(covariance, replicates, 2 * t.size), ([0.05, 0.05], [3, 3]),
                     timepoints=t, c1=float(c1))


# ---------------------------------------------------------------- two coins

_BINOM4 = np.array([comb(4, i) for i in range(5)], dtype=float)
_HEADS = np.arange(5)


def _bern(p):
    return p ** _HEADS * (1 - p) ** (4 - _HEADS)


def _dbern(p):
    up = np.where(_HEADS > 0, _HEADS * p ** np.maximum(_HEADS - 1, 0), 0.0) * (1 - p) ** (4 - _HEADS)
    down = np.where(_HEADS < 4, (4 - _HEADS) * (1 - p) ** np.maximum(3 - _HEADS, 0), 0.0) * p ** _HEADS
    return up - down


def make_coins(replicates: int = 1) -> ModelInstance:
    """Number of heads in four tosses of a randomly picked biased coin.

    ``p = (pick probability of coin 1, bias of coin 1, bias of coin 2)`` on
    the unit cube; data are the five outcome probabilities (categorical).
    """

    def f(p):
        p1, p2, p3 = p
        return _BINOM4 * (p1 * _bern(p2) + (1 - p1) * _bern(p3))

    def jac(p):
        p1, p2, p3 = p
        return np.column_stack([
            _BINOM4 * (_bern(p2) - _bern(p3)),
            _BINOM4 * p1 * _dbern(p2),
            _BINOM4 * (1 - p1) * _dbern(p3),
        ])

    space = ParameterSpace(np.zeros(3), np.ones(3))
    pred = PredictionMap(3, 5, f, jac)
    return ModelInstance("coins", space, pred, NoiseModel.categorical(replicates),
                         ReferenceMetric(), (np.zeros(3), np.ones(3)), {})


# ---------------------------------------------------------------- nonlinear ODE summary


def _check_u(p):
    if abs(p[1]) <= DEGENERATE_TOL or abs(p[4]) <= DEGENERATE_TOL:
        raise Degenerate("p2 and p5 must be nonzero")


def nonlinear_ode_in_u(p) -> bool:
    """Membership of the open set on which the summary is exhaustive.

    The summary map itself is finite wherever p2 != 0, so evaluation only
    rejects p2 = 0 and p5 = 0; the third condition is checked here.
    """
    p1, p2, p3, p4, p5 = np.asarray(p, dtype=float)
    return bool(abs(p2) > DEGENERATE_TOL and abs(p5) > DEGENERATE_TOL
                and abs(2 * p2 + p2 * p3 + p1 * p2 - 4 * p1 * p3 * p4) > DEGENERATE_TOL)


def make_nonlinear_ode_summary(covariance=None, replicates: int = 1) -> ModelInstance:
    """Exhaustive summary of a five-parameter nonlinear ODE model.

    The data depend on ``(p2, p4)`` only through ``p4 / p2``, so every class
    contains the curve ``(p1, q p2, p3, q p4, p5)``.
    """

    def f(p):
        _check_u(p)
        p1, p2, p3, p4, p5 = p
        r = p3 * p4 / p2
        return np.array([r - 1, -2 * p1 * r - p3, -p5, p1 * p1 * r + p1 * p3, p1 * p5])

    def jac(p):
        _check_u(p)
        p1, p2, p3, p4, p5 = p
        r = p3 * p4 / p2
        dr = np.array([0.0, -r / p2, p4 / p2, p3 / p2, 0.0])
        J = np.zeros((5, 5))
        J[0] = dr
        J[1] = -2 * p1 * dr
        J[1, 0] += -2 * r
        J[1, 2] += -1
        J[2, 4] = -1
        J[3] = p1 * p1 * dr
        J[3, 0] += 2 * p1 * r + p3
        J[3, 2] += p1
        J[4, 0] = p5
        J[4, 4] = p1
        return J

    return _instance("nonlinear_ode_summary", [-np.inf] * 5, [np.inf] * 5, 5, f, jac,
                     _noise(covariance, replicates, 5), ([0.5] * 5, [2.0] * 5))


def nonlinear_ode_invariants(phi) -> np.ndarray:
    """Recover ``(p1, p3, p4/p2, p5)`` from the summary values.

    Inverts ``phi3 = -p5``, ``phi5 = p1 p5``, ``phi2 = -2 p1 (phi1 + 1) - p3``
    and ``phi1 + 1 = p3 p4 / p2``.
    """
    phi1, phi2, phi3, phi4, phi5 = np.asarray(phi, dtype=float)
    p5 = -phi3
    p1 = -phi5 / phi3
    p3 = -phi2 - 2 * p1 * (phi1 + 1)
    ratio = (phi1 + 1) / p3
    return np.array([p1, p3, ratio, p5])


# ---------------------------------------------------------------- gaussian mixture moments

N_MOMENTS = 6


def _normal_moments(mu, sigma):
    """Raw moments 1..6 of N(mu, sigma^2) and their (mu, sigma) derivatives."""
    M = np.zeros(N_MOMENTS + 1)
    dmu = np.zeros(N_MOMENTS + 1)
    dsig = np.zeros(N_MOMENTS + 1)
    M[0], M[1], dmu[1] = 1.0, mu, 1.0
    s2 = sigma * sigma
    for k in range(2, N_MOMENTS + 1):
        M[k] = mu * M[k - 1] + (k - 1) * s2 * M[k - 2]
        dmu[k] = M[k - 1] + mu * dmu[k - 1] + (k - 1) * s2 * dmu[k - 2]
        dsig[k] = mu * dsig[k - 1] + 2 * (k - 1) * sigma * M[k - 2] + (k - 1) * s2 * dsig[k - 2]
    return M[1:], dmu[1:], dsig[1:]


def make_gaussian_mixture_moments(covariance=None, replicates: int = 1) -> ModelInstance:
    """First six raw moments of ``lam N(mu, sigma^2) + (1 - lam) N(nu, tau^2)``.

    ``p = (lam, mu, sigma, nu, tau)``; sigma and tau are standard deviations.
    """

    def f(p):
        lam, mu, sig, nu, tau = p
        return lam * _normal_moments(mu, sig)[0] + (1 - lam) * _normal_moments(nu, tau)[0]

    def jac(p):
        lam, mu, sig, nu, tau = p
        a, da_mu, da_sig = _normal_moments(mu, sig)
        b, db_nu, db_tau = _normal_moments(nu, tau)
        return np.column_stack([a - b, lam * da_mu, lam * da_sig, (1 - lam) * db_nu, (1 - lam) * db_tau])

    inf = np.inf
    return _instance("gaussian_mixture_moments", [0, -inf, 0, -inf, 0], [1, inf, inf, inf, inf],
                     N_MOMENTS, f, jac, _noise(covariance, replicates, N_MOMENTS),
                     ([0, -1, 0.2, -1, 0.2], [1, 1, 1.5, 1, 1.5]))


# ---------------------------------------------------------------- linear parameter-varying


def affine_family(A0, A_list) -> Callable[[np.ndarray], np.ndarray]:
    """``p -> A0 + sum_i p_i A_i``, the matrix family used by JSON configs."""
    A0 = np.asarray(A0, dtype=float)
    As = np.asarray(A_list, dtype=float).reshape(-1, *A0.shape)

    def A(p):
        return A0 + np.tensordot(np.asarray(p, dtype=float), As, axes=1)

    A.n_params = As.shape[0]
    return A


def check_hurwitz(M) -> None:
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise NotHurwitz("state matrix has non-finite entries")
    top = np.max(np.linalg.eigvals(M).real)
    if top >= -HURWITZ_MARGIN:
        raise NotHurwitz(f"state matrix not Hurwitz (max real part {top:.3g})")


def make_lpv(A: Callable, C, param_dim: int, covariance=None, replicates: int = 1,
             timepoints=None, sample_box=None) -> ModelInstance:
    """Linear system ``x' = A(p) x, y = C x`` with the initial state as parameters.

    The parameter vector is ``(p, x0)`` of length ``param_dim + m``. With
    ``timepoints`` the data are ``y(t_j)`` stacked; without them only the
    continuous-data distance is available.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n_out, m = C.shape
    A0 = np.asarray(A(np.zeros(param_dim)), dtype=float)
    if A0.shape != (m, m):
        raise ValueError(f"A(p) must be {m}x{m} to match C")
    r = param_dim + m
    t = None if timepoints is None else _timepoints(timepoints, nonneg=True)

    def split(q):
        return q[:param_dim], q[param_dim:]

    def state_matrix(p):
        M = np.asarray(A(p), dtype=float)
        check_hurwitz(M)
        return M

    def f(q):
        if t is None:
            raise NoPredictionMap("LPV model without timepoints has no finite data vector")
        p, x0 = split(q)
        M = state_matrix(p)
        if not np.any(x0):
            return np.zeros(n_out * t.size)
        t_end = max(float(t.max()), 1e-12)
        spec = IvpSpec(lambda _t, x: M @ x, x0, (0.0, t_end), rel_tol=1e-11, abs_tol=1e-13)
        xs = integrate(spec, t)
        return (xs @ C.T).reshape(-1)

    n_data = n_out if t is None else n_out * t.size
    if sample_box is None:
        sample_box = ([-1.0] * r, [1.0] * r)
    return _instance("lpv", [-np.inf] * r, [np.inf] * r, n_data, f, None,
                     _noise(covariance, replicates, n_data), sample_box,
                     A=A, C=C, param_dim=param_dim, state_dim=m, timepoints=t,
                     state_matrix=state_matrix)


# ---------------------------------------------------------------- small test models


def make_conformal(covariance=None, replicates: int = 1) -> ModelInstance:
    """``(a, b) -> (a, -b) / (a^2 + b^2)`` on [1/2, inf) x R.

    Globally identifiable, yet the image accumulates at the origin, so data
    near 0 give unbounded likelihood regions.
    """

    def f(p):
        a, b = p
        n2 = a * a + b * b
        return np.array([a / n2, -b / n2])

    def jac(p):
        a, b = p
        n2 = a * a + b * b
        n4 = n2 * n2
        return np.array([[(b * b - a * a) / n4, -2 * a * b / n4],
                         [2 * a * b / n4, (b * b - a * a) / n4]])

    return _instance("conformal", [0.5, -np.inf], [np.inf, np.inf], 2, f, jac,
                     _noise(covariance, replicates, 2), ([0.5, -2], [3, 2]))


def make_circle(covariance=None, replicates: int = 1) -> ModelInstance:
    """``(a, b) -> a^2 + b^2`` on [1/2, inf) x R; equivalence classes are arcs."""

    def f(p):
        return np.array([p[0] ** 2 + p[1] ** 2])

    def jac(p):
        return np.array([[2 * p[0], 2 * p[1]]])

    return _instance("circle", [0.5, -np.inf], [np.inf, np.inf], 1, f, jac,
                     _noise(covariance, replicates, 1), ([0.5, -2], [2, 2]))


def make_linear(matrix, offset=None, covariance=None, replicates: int = 1) -> ModelInstance:
    """Affine map ``p -> M p + c`` on R^r."""
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    n_out, r = M.shape
    c = np.zeros(n_out) if offset is None else np.asarray(offset, dtype=float).reshape(n_out)
    return _instance("linear", [-np.inf] * r, [np.inf] * r, n_out,
                     lambda p: M @ p + c, lambda p: M.copy(),
                     _noise(covariance, replicates, n_out), ([-2] * r, [2] * r))


def make_constant(value=(1.0,), dim: int = 2, covariance=None, replicates: int = 1) -> ModelInstance:
    """Prediction map that ignores its parameter; zero Fisher information."""
    v = np.atleast_1d(np.asarray(value, dtype=float))
    return _instance("constant", [-np.inf] * dim, [np.inf] * dim, v.size,
                     lambda p: v.copy(), lambda p: np.zeros((v.size, dim)),
                     _noise(covariance, replicates, v.size), ([-2] * dim, [2] * dim))


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    constructor: Callable[..., ModelInstance]
    params: dict
    summary: str


_GAUSS = {"covariance": "N x N matrix or 'identity' (default)", "replicates": "K, positive integer"}

CATALOG = {
    e.name: e
    for e in [
        CatalogEntry("line", make_line, {"timepoints": "two or more distinct t >= 0", **_GAUSS},
                     "line a0 + a1 t sampled at the timepoints"),
        CatalogEntry("sum_exp", make_sum_exp, {"timepoints": "distinct t > 0", **_GAUSS},
                     "exp(-a t) + exp(-b t); (a, b) and (b, a) are equivalent"),
        CatalogEntry("two_compartment", make_two_compartment,
                     {"timepoints": "distinct t > 0", "c1": "initial amount in compartment 1", **_GAUSS},
                     "linear two-compartment chain, exact solution"),
        CatalogEntry("coins", make_coins, {"replicates": "K repetitions of the four-toss experiment"},
                     "two biased coins, categorical data"),
        CatalogEntry("nonlinear_ode_summary", make_nonlinear_ode_summary, dict(_GAUSS),
                     "exhaustive summary of a five-parameter nonlinear ODE; 1-D classes"),
        CatalogEntry("gaussian_mixture_moments", make_gaussian_mixture_moments, dict(_GAUSS),
                     "first six moments of a two-component Gaussian mixture"),
        CatalogEntry("lpv", make_lpv,
                     {"A0": "m x m matrix", "A": "list of m x m matrices, A(p) = A0 + sum p_i A_i",
                      "C": "n x m output matrix", "timepoints": "optional, t >= 0", **_GAUSS},
                     "linear parameter-varying system with the initial state as parameter"),
        CatalogEntry("conformal", make_conformal, dict(_GAUSS),
                     "(a, -b) / (a^2 + b^2) on a >= 1/2; unbounded confidence regions near 0"),
        CatalogEntry("circle", make_circle, dict(_GAUSS), "a^2 + b^2 on a >= 1/2"),
        CatalogEntry("linear", make_linear,
                     {"matrix": "N x r matrix", "offset": "optional length-N vector", **_GAUSS},
                     "affine map"),
        CatalogEntry("constant", make_constant,
                     {"value": "output vector", "dim": "parameter dimension", **_GAUSS},
                     "constant map, zero information"),
    ]
}
