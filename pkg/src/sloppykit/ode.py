"""Explicit Runge-Kutta integration and L2 quadrature.

Dormand-Prince 5(4) with proportional-integral step control and the usual
fourth-order continuous extension for output at arbitrary times. Only the
non-stiff problems of the model catalog are in scope.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonFinite, NonFiniteState, StepSizeUnderflow

MAX_STEPS = 1_000_000

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B_LOW = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B - _B_LOW
# continuous extension: y(t + theta h) = y + h * K^T @ _DENSE @ [theta, theta^2, theta^3, theta^4]
_DENSE = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

_SAFETY = 0.9
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


@dataclass(frozen=True)
class IvpSpec:
    rhs: Callable[[float, np.ndarray], np.ndarray]
    x0: np.ndarray
    t_span: tuple[float, float]
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10

    def __post_init__(self):
        t0, t1 = self.t_span
        if not t0 < t1:
            raise ValueError("t_span must satisfy t_start < t_end")
        for name in ("rel_tol", "abs_tol"):
            tol = getattr(self, name)
            if not 1e-14 <= tol <= 1e-2:
                raise ValueError(f"{name}={tol} outside [1e-14, 1e-2]")


class DenseSolution:
    """Piecewise quartic interpolant over the accepted steps."""

    def __init__(self, ts, xs, ks):
        self.ts = np.asarray(ts)
        self._xs = xs
        self._ks = ks

    @property
    def n_steps(self) -> int:
        return len(self._ks)

    def __call__(self, t: float) -> np.ndarray:
        ts = self.ts
        if t < ts[0] or t > ts[-1]:
            raise ValueError(f"t={t} outside the integrated interval")
        i = int(np.searchsorted(ts, t, side="right")) - 1
        i = min(max(i, 0), len(self._ks) - 1)
        h = ts[i + 1] - ts[i]
        theta = (t - ts[i]) / h
        powers = theta ** np.arange(1, 5)
        return self._xs[i] + h * (self._ks[i].T @ (_DENSE @ powers))


def _initial_step(rhs, t0, x0, f0, direction_len, rtol, atol) -> float:
    scale = atol + rtol * np.max(np.abs(x0))
    d0 = np.max(np.abs(x0)) / scale
    d1 = np.max(np.abs(f0)) / scale
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_len)
    x1 = x0 + h0 * f0
    f1 = rhs(t0 + h0, x1)
    d2 = np.max(np.abs(f1 - f0)) / scale / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, direction_len)


def solve_dense(spec: IvpSpec) -> DenseSolution:
    """Integrate over the whole ``t_span`` and keep the dense interpolant."""
    rhs = spec.rhs
    t, t_end = map(float, spec.t_span)
    x = np.array(spec.x0, dtype=float)
    rtol, atol = spec.rel_tol, spec.abs_tol
    f = np.asarray(rhs(t, x), dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(f))):
        raise NonFiniteState("non-finite initial state or derivative")

    h = _initial_step(rhs, t, x, f, t_end - t, rtol, atol)
    ts, xs, ks = [t], [x], []
    err_prev = 1e-4
    n_dim = x.size
    for _ in range(MAX_STEPS):
        if t >= t_end:
            break
        if h < 16 * np.finfo(float).eps * max(1.0, abs(t)):
            raise StepSizeUnderflow(f"step size underflow at t={t}")
        h = min(h, t_end - t)
        K = np.empty((7, n_dim))
        K[0] = f
        for s in range(1, 7):
            dx = np.dot(_A[s], K[:s]) * h
            K[s] = rhs(t + _C[s] * h, x + dx)
        x_new = x + h * (_B[:6] @ K[:6])
        if not np.all(np.isfinite(x_new)):
            h *= 0.25
            continue
        err_vec = h * (_E @ K)
        scale = atol + rtol * max(np.max(np.abs(x)), np.max(np.abs(x_new)))
        err = np.max(np.abs(err_vec)) / scale
        if err <= 1.0:
            t_new = t + h
            if t_end - t_new < 1e-14 * max(1.0, abs(t_end)):
                t_new = t_end
            ts.append(t_new)
            xs.append(x_new)
            ks.append(K)
            t, x, f = t_new, x_new, K[6]
            if err == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = _SAFETY * err ** -_ALPHA * err_prev ** _BETA
            h *= min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            err_prev = max(err, 1e-4)
        else:
            h *= max(_MIN_FACTOR, _SAFETY * err ** -_ALPHA)
    else:
        raise StepSizeUnderflow(f"exceeded {MAX_STEPS} steps before t_end")
    if not np.all(np.isfinite(x)):
        raise NonFiniteState("state became non-finite")
    return DenseSolution(ts, xs, ks)


def integrate(spec: IvpSpec, output_times) -> np.ndarray:
    """States at ``output_times`` as a ``(len(output_times), dim)`` array."""
    times = np.asarray(output_times, dtype=float)
    t0, t1 = spec.t_span
    if np.any(times < t0) or np.any(times > t1):
        raise ValueError("output_times must lie within t_span")
    if np.any(np.diff(times) < 0):
        raise ValueError("output_times must be sorted")
    sol = solve_dense(spec)
    return np.array([sol(t) for t in times]).reshape(times.size, -1)


def quadrature_l2(traj_diff: Callable[[float], np.ndarray], t_end: float, tol: float = 1e-10) -> float:
    """Adaptive Simpson estimate of the integral of ``||traj_diff(t)||^2`` over ``[0, t_end]``."""
    if not t_end > 0:
        raise ValueError("t_end must be positive")

    def g(t):
        v = np.atleast_1d(np.asarray(traj_diff(t), dtype=float))
        val = float(v @ v)
        if not np.isfinite(val):
            raise NonFinite(f"non-finite integrand at t={t}")
        return val

    def simpson(a, fa, b, fb):
        m = 0.5 * (a + b)
        fm = g(m)
        return m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    # a handful of initial panels so that fast transients near t=0 are seen
    edges = np.linspace(0.0, t_end, 9)
    total = 0.0
    fvals = [g(t) for t in edges]
    panel_tol = tol / (len(edges) - 1)
    for a, b, fa, fb in zip(edges[:-1], edges[1:], fvals[:-1], fvals[1:]):
        m, fm, whole = simpson(a, fa, b, fb)
        stack = [(a, fa, b, fb, m, fm, whole, panel_tol, 0)]
        while stack:
            a_, fa_, b_, fb_, m_, fm_, whole_, tol_, depth = stack.pop()
            lm, flm, left = simpson(a_, fa_, m_, fm_)
            rm, frm, right = simpson(m_, fm_, b_, fb_)
            delta = left + right - whole_
            if depth >= 50 or abs(delta) <= 15.0 * tol_:
                total += left + right + delta / 15.0
            else:
                stack.append((a_, fa_, m_, fm_, lm, flm, left, tol_ / 2, depth + 1))
                stack.append((m_, fm_, b_, fb_, rm, frm, right, tol_ / 2, depth + 1))
    return max(total, 0.0)
