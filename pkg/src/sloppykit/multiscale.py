"""delta-sloppiness: extrema of d(., p0) over reference-metric spheres.

For each radius delta the sphere ``||W^{1/2} (p - p0)|| = delta`` intersected
with P is searched by multi-start Riemannian gradient ascent (for the sup)
and descent (for the inf). Work happens in scaled coordinates
``q = W^{1/2} (p - p0)`` where the sphere is round.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ModelDomainError, SloppyError
from .fim import fim
from .model import ModelInstance, evaluate, jacobian_with_info
from .premetric import premetric_from_predictions, premetric_gradient_wrt_prediction

logger = logging.getLogger(__name__)

ARMIJO = 1e-4
GRAD_TOL = 1e-9
DISTINCT_ANGLE = 1e-3
DEFAULT_STARTS = 16
STALL_REL = 1e-13
STALL_ITERS = 5


@dataclass(frozen=True)
class SpherePoint:
    direction: np.ndarray  # unit vector in scaled coordinates
    radius: float
    point: np.ndarray
    feasible: bool
    value: float


@dataclass
class DeltaSloppinessCurve:
    """Per-radius extrema of ``d(., p0)``.

    ``status[j]`` is ``"ok"`` or ``"empty_sphere"`` (no start survived
    projection onto the sphere inside P); empty radii carry NaN values.
    ``infinite_excluded[j]`` counts starts dropped from the inf search because
    d was infinite there.
    """

    p0: np.ndarray
    deltas: np.ndarray
    sup_d: np.ndarray
    inf_d: np.ndarray
    ratio: np.ndarray
    max_disruptive: list
    min_disruptive: list
    starts_used: int
    max_optima: list = field(default_factory=list)
    min_optima: list = field(default_factory=list)
    abandoned: list = field(default_factory=list)
    infinite_excluded: list = field(default_factory=list)
    status: list = field(default_factory=list)


class _Objective:
    """d(., p0) and its gradient in scaled coordinates."""

    def __init__(self, model: ModelInstance, p0: np.ndarray):
        self.model = model
        self.p0 = p0
        self.phi0 = evaluate(model, p0)
        self.inv_sqrt_w = 1.0 / model.metric.sqrt_weights(model.dim)
        self.lo = (model.space.lower - p0) / self.inv_sqrt_w
        self.hi = (model.space.upper - p0) / self.inv_sqrt_w

    def point(self, q):
        return self.p0 + self.inv_sqrt_w * q

    def value(self, q) -> float:
        try:
            phi = evaluate(self.model, self.model.space.clip(self.point(q)))
        except ModelDomainError:
            return np.nan
        return premetric_from_predictions(self.model, phi, self.phi0)

    def gradient(self, q) -> np.ndarray:
        p = self.model.space.clip(self.point(q))
        phi = evaluate(self.model, p)
        J, _ = jacobian_with_info(self.model, p)
        return self.inv_sqrt_w * (J.T @ premetric_gradient_wrt_prediction(self.model, phi, self.phi0))


def project_sphere_box(y, radius, lo, hi) -> Optional[np.ndarray]:
    """Point of ``{||x|| = radius} ∩ [lo, hi]`` obtained by clipping and rescaling.

    Coordinates that hit a bound are frozen there and the others rescaled to
    the remaining radius, repeated until nothing new is clipped. Returns
    ``None`` when the free coordinates cannot make up the radius.
    """
    x = np.clip(y, lo, hi)
    fixed = (x != y)
    for _ in range(x.size + 1):
        free = ~fixed
        rem = radius * radius - float(x[fixed] @ x[fixed])
        nf = float(np.linalg.norm(x[free]))
        if rem < 0.0 or not np.any(free):
            return None
        if nf == 0.0:
            return None if rem > 0.0 else x
        x[free] *= np.sqrt(rem) / nf
        clipped = np.clip(x, lo, hi)
        new = (clipped != x) & free
        if not np.any(new):
            return x
        x = clipped
        fixed |= new
    return None


def _tangent(g, q, lo, hi):
    """Gradient component along the feasible part of the sphere at q."""
    g = g.copy()
    active = ((q <= lo) & (g > 0)) | ((q >= hi) & (g < 0))
    g[active] = 0.0
    free = ~active
    qf = q[free]
    nq = float(qf @ qf)
    if nq > 0.0:
        g[free] -= (g[free] @ qf) / nq * qf
    return g


def _search(obj: _Objective, q, radius, sign, ref, max_iter):
    """Minimize ``sign * d`` on the sphere from ``q``; returns (q, d, best_q, best_d, visited_max)."""
    lo, hi = obj.lo, obj.hi
    f = obj.value(q)
    seen_max = f
    best_q, best_f = q, f
    if not np.isfinite(f):
        return q, f, best_q, best_f, seen_max
    prev_q = prev_g = None
    eta = None
    flat = 0
    for _ in range(max_iter):
        g = sign * obj.gradient(q)
        gt = _tangent(g, q, lo, hi)
        gn = float(np.linalg.norm(gt))
        # absolute test, plus a scale-free one for small spheres and small d
        if gn <= GRAD_TOL * max(1.0, abs(f)) or radius * gn <= GRAD_TOL * max(abs(f), ref[0]):
            break
        if prev_q is not None:
            s = q - prev_q
            y = gt - prev_g
            sy = float(s @ y)
            eta = abs(float(s @ s) / sy) if sy != 0.0 else None
        if eta is None or not np.isfinite(eta) or eta <= 0.0:
            eta = 0.1 * radius / gn
        eta = min(eta, 2.0 * radius / gn)
        F = sign * f
        moved = False
        for _ls in range(80):
            trial = project_sphere_box(q - eta * gt, radius, lo, hi)
            if trial is not None:
                ft = obj.value(trial)
                if np.isfinite(ft) or (sign < 0 and ft == np.inf):
                    seen_max = max(seen_max, ft)
                    if sign * ft <= F - ARMIJO * eta * gn * gn:
                        moved = True
                        break
                elif ft == np.inf:
                    seen_max = np.inf
            eta *= 0.5
        if not moved:
            break
        prev_q, prev_g = q, gt
        # progress below rounding level for several iterations in a row: stalled
        flat = flat + 1 if abs(ft - f) <= STALL_REL * max(abs(f), ref[0]) else 0
        q, f = trial, ft
        if sign * f < sign * best_f:
            best_q, best_f = q, f
        ref[0] = max(ref[0], f if np.isfinite(f) else ref[0])
        if not np.isfinite(f) or flat >= STALL_ITERS:
            break
    return q, f, best_q, best_f, seen_max


def _start_directions(model, p0, obj, j, n_random, seed):
    dirs = []
    try:
        rep = fim(model, p0)
        M = rep.fim * np.outer(obj.inv_sqrt_w, obj.inv_sqrt_w)
        from .linalg import sym_eigen

        eig = sym_eigen(M)
        dirs.append(eig.eigenvectors[:, 0])
        dirs.append(eig.eigenvectors[:, -1])
    except (SloppyError, ValueError) as exc:
        logger.info("no eigen-direction starts: %s", exc)
    for k in range(n_random):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), j, k])))
        v = rng.standard_normal(model.dim)
        dirs.append(v / np.linalg.norm(v))
    return dirs


def _distinct(points, values):
    out = []
    for q, v in sorted(zip(points, values), key=lambda t: t[1]):
        u = q / np.linalg.norm(q)
        if all(np.arccos(np.clip(u @ w, -1.0, 1.0)) > DISTINCT_ANGLE for w, _ in out):
            out.append((u, v))
    return out


def delta_sloppiness(model: ModelInstance, p0, deltas, starts: int = DEFAULT_STARTS, seed: int = 0,
                     max_iter: int = 500) -> DeltaSloppinessCurve:
    """sup and inf of ``d(., p0)`` on the sphere of each radius in ``deltas``.

    Uses the FIM stiffest and sloppiest directions plus ``starts`` random
    directions drawn from the stream ``(seed, radius index, start index)``.
    """
    p0 = model.space.check(p0)
    deltas = np.asarray(deltas, dtype=float).reshape(-1)
    if deltas.size == 0:
        raise ValueError("deltas must be non-empty")
    if np.any(deltas <= 0) or np.any(np.diff(deltas) < 0):
        raise ValueError("deltas must be positive and sorted")
    if starts < 0:
        raise ValueError("starts must be nonnegative")
    obj = _Objective(model, p0)
    n = deltas.size
    sup_d, inf_d = np.full(n, np.nan), np.full(n, np.nan)
    max_pts, min_pts, max_opt, min_opt = [], [], [], []
    abandoned, inf_excl, status = [], [], []
    n_used = 0
    for j, delta in enumerate(deltas):
        dirs = _start_directions(model, p0, obj, j, starts, seed)
        n_used = len(dirs)
        ref = [0.0]
        top = (-np.inf, None)
        bottom = (np.inf, None)
        ends_max, vals_max, ends_min, vals_min = [], [], [], []
        lost = excluded = 0
        for u in dirs:
            q0 = project_sphere_box(delta * u, delta, obj.lo, obj.hi)
            if q0 is None:
                lost += 1
                continue
            f0 = obj.value(q0)
            if np.isnan(f0):
                lost += 1
                continue
            ref[0] = max(ref[0], f0 if np.isfinite(f0) else 0.0)
            q, f, bq, bf, seen = _search(obj, q0, delta, -1.0, ref, max_iter)
            if bf > top[0] or top[1] is None:
                top = (bf, bq)
            ends_max.append(q)
            vals_max.append(-f if np.isfinite(f) else -np.inf)
            if f0 == np.inf:
                excluded += 1
                continue
            q, f, bq, bf, _ = _search(obj, q0, delta, 1.0, ref, max_iter)
            if bf < bottom[0]:
                bottom = (bf, bq)
            ends_min.append(q)
            vals_min.append(f)
        abandoned.append(lost)
        inf_excl.append(excluded)
        if top[1] is None:
            status.append("empty_sphere")
            max_pts.append(None)
            min_pts.append(None)
            max_opt.append([])
            min_opt.append([])
            continue
        status.append("ok")
        sup_d[j] = top[0]
        max_pts.append(_sphere_point(obj, top[1], delta, top[0]))
        max_opt.append([_sphere_point(obj, delta * u, delta, -v) for u, v in _distinct(ends_max, vals_max)])
        if bottom[1] is not None:
            inf_d[j] = bottom[0]
            min_pts.append(_sphere_point(obj, bottom[1], delta, bottom[0]))
            min_opt.append([_sphere_point(obj, delta * u, delta, v) for u, v in _distinct(ends_min, vals_min)])
        else:
            min_pts.append(None)
            min_opt.append([])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(inf_d > 0, sup_d / inf_d, np.where(np.isnan(inf_d), np.nan, np.inf))
    ratio = np.where(np.isnan(sup_d), np.nan, ratio)
    return DeltaSloppinessCurve(p0, deltas, sup_d, inf_d, ratio, max_pts, min_pts, n_used,
                                max_opt, min_opt, abandoned, inf_excl, status)


def _sphere_point(obj: _Objective, q, delta, value) -> SpherePoint:
    q = np.asarray(q, dtype=float)
    p = obj.model.space.clip(obj.point(q))
    return SpherePoint(q / delta, float(delta), p, obj.model.space.contains(p), float(value))


# ---------------------------------------------------------------- level-set grids


@dataclass(frozen=True)
class LevelSetGrid:
    """``values[a, b]`` is d at the point with ``p[axis_i] = x[a]``, ``p[axis_j] = y[b]``.

    Infeasible points (outside P or where the model fails) hold NaN.
    """

    p0: np.ndarray
    axis_i: int
    axis_j: int
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    sqrt_mode: bool

    def with_sqrt_mode(self, on: bool) -> "LevelSetGrid":
        if on == self.sqrt_mode:
            return self
        vals = np.sqrt(self.values) if on else self.values ** 2
        return LevelSetGrid(self.p0, self.axis_i, self.axis_j, self.x, self.y, vals, on)


def level_set_grid(model: ModelInstance, p0, axis_i: int = 0, axis_j: int = 1, ranges=((0.0, 1.0), (0.0, 1.0)),
                   resolution=(50, 50), sqrt_mode: bool = False) -> LevelSetGrid:
    """Evaluate ``d(., p0)`` (or its square root) over a 2-D slice through ``p0``."""
    p0 = model.space.check(p0)
    if axis_i == axis_j or not (0 <= axis_i < model.dim and 0 <= axis_j < model.dim):
        raise ValueError("axes must be two distinct coordinate indices")
    if np.isscalar(resolution):
        resolution = (int(resolution), int(resolution))
    ni, nj = map(int, resolution)
    if ni < 2 or nj < 2:
        raise ValueError("resolution must be at least 2 per axis")
    (xa, xb), (ya, yb) = ranges
    if not (xa < xb and ya < yb):
        raise ValueError("ranges must be increasing")
    x = np.linspace(xa, xb, ni)
    y = np.linspace(ya, yb, nj)
    phi0 = evaluate(model, p0)
    values = np.full((ni, nj), np.nan)
    p = p0.copy()
    for a in range(ni):
        for b in range(nj):
            p[axis_i], p[axis_j] = x[a], y[b]
            if not model.space.contains(p):
                continue
            try:
                values[a, b] = premetric_from_predictions(model, evaluate(model, p), phi0)
            except ModelDomainError:
                continue
    if sqrt_mode:
        values = np.sqrt(values)
    return LevelSetGrid(p0, axis_i, axis_j, x, y, values, bool(sqrt_mode))
