"""Model objects: parameter space, prediction map, noise law, reference metric.

A :class:`ModelInstance` bundles the four and is what every analysis in the
package consumes. Parameter points are plain 1-D float arrays.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .errors import (
    MissingAnalyticJacobian,
    ModelDomainError,
    NonFinite,
    NotPositiveDefinite,
    NotSquare,
    OutOfDomain,
)
from .linalg import cholesky_factor

BOUND_SLACK = 1e-12
DEFAULT_FD_STEP = float(np.cbrt(np.finfo(float).eps))


@dataclass(frozen=True)
class ParameterSpace:
    """Closed box ``[lower, upper]`` in R^r; bounds may be infinite."""

    lower: np.ndarray
    upper: np.ndarray
    slack: float = BOUND_SLACK

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size < 1:
            raise ValueError("lower and upper must be 1-D and of equal positive length")
        if not np.all(lo < hi):
            raise ValueError("every lower bound must be strictly below its upper bound")

    @classmethod
    def unbounded(cls, dim: int) -> "ParameterSpace":
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dim,):
            return False
        return bool(np.all(p >= self.lower - self.slack) and np.all(p <= self.upper + self.slack))

    def check(self, p) -> np.ndarray:
        """Return ``p`` as a float array, raising :class:`OutOfDomain` if it is outside."""
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dim,):
            raise OutOfDomain(f"expected {self.dim} coordinates, got shape {p.shape}")
        if not self.contains(p):
            raise OutOfDomain(f"point {p.tolist()} violates bounds")
        return p

    def clip(self, p) -> np.ndarray:
        return np.clip(p, self.lower, self.upper)


@dataclass(frozen=True)
class PredictionMap:
    input_dim: int
    output_dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    analytic_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None


def _replicates(k) -> int:
    if int(k) != k or k < 1:
        raise ValueError(f"replicates must be a positive integer, got {k!r}")
    return int(k)


@dataclass(frozen=True)
class NoiseModel:
    """``gaussian``: data ~ N(phi(p), covariance) with ``replicates`` repeats.

    ``categorical``: ``replicates`` draws from the outcome distribution phi(p).
    """

    kind: str
    covariance: Optional[np.ndarray] = None
    replicates: int = 1

    @classmethod
    def gaussian(cls, covariance, replicates: int = 1) -> "NoiseModel":
        S = np.atleast_2d(np.asarray(covariance, dtype=float))
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise NotSquare(f"covariance must be square, got shape {S.shape}")
        return cls("gaussian", S, _replicates(replicates))

    @classmethod
    def categorical(cls, replicates: int = 1) -> "NoiseModel":
        return cls("categorical", None, _replicates(replicates))

    @cached_property
    def chol(self) -> np.ndarray:
        return cholesky_factor(self.covariance)

    @cached_property
    def log_det(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self.chol))))


@dataclass(frozen=True)
class ReferenceMetric:
    kind: str = "euclidean"
    weights: Optional[np.ndarray] = None

    @classmethod
    def weighted(cls, weights) -> "ReferenceMetric":
        w = np.atleast_1d(np.asarray(weights, dtype=float))
        if not np.all(np.isfinite(w)) or not np.all(w > 0):
            raise ValueError("reference metric weights must be finite and strictly positive")
        return cls("weighted", w)

    def sqrt_weights(self, dim: int) -> np.ndarray:
        if self.kind == "euclidean" or self.weights is None:
            return np.ones(dim)
        return np.sqrt(self.weights)


@dataclass(frozen=True)
class ModelInstance:
    name: str
    space: ParameterSpace
    prediction: PredictionMap
    noise: NoiseModel
    metric: ReferenceMetric = field(default_factory=ReferenceMetric)
    # finite box used when the analyses need random parameter points
    sample_box: Optional[tuple[np.ndarray, np.ndarray]] = None
    extras: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def output_dim(self) -> int:
        return self.prediction.output_dim

    def with_noise(self, noise: NoiseModel) -> "ModelInstance":
        return dataclasses.replace(self, noise=noise)

    def with_metric(self, metric: ReferenceMetric) -> "ModelInstance":
        return dataclasses.replace(self, metric=metric)

    def sampling_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.sample_box is not None:
            lo, hi = self.sample_box
            return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        lo = np.where(np.isfinite(self.space.lower), self.space.lower, -1.0)
        hi = np.where(np.isfinite(self.space.upper), self.space.upper, lo + 2.0)
        return lo, hi

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo, hi = self.sampling_bounds()
        return rng.uniform(lo, hi, size=(n, self.dim))


def evaluate(model: ModelInstance, p) -> np.ndarray:
    """Perfect data phi(p) for a point of the parameter space."""
    p = model.space.check(p)
    out = np.asarray(model.prediction.eval(p), dtype=float).reshape(-1)
    if out.size != model.output_dim:
        raise ValueError(f"prediction map returned {out.size} values, expected {model.output_dim}")
    if not np.all(np.isfinite(out)):
        raise NonFinite(f"prediction map is not finite at {p.tolist()}")
    return out


def jacobian(model: ModelInstance, p, scheme: str = "auto", step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """N x r Jacobian of the prediction map.

    ``scheme`` is ``"analytic"``, ``"central_fd"`` or ``"auto"`` (analytic
    when the model provides it). Finite differences use per-coordinate steps
    ``step * max(1, |p_i|)`` and switch to second-order one-sided stencils
    where the central stencil would leave the parameter space.
    """
    return jacobian_with_info(model, p, scheme, step)[0]


def jacobian_with_info(model, p, scheme="auto", step=DEFAULT_FD_STEP):
    """Like :func:`jacobian` but also returns whether a one-sided stencil was used."""
    p = model.space.check(p)
    if scheme == "auto":
        scheme = "analytic" if model.prediction.analytic_jacobian is not None else "central_fd"
    if scheme == "analytic":
        if model.prediction.analytic_jacobian is None:
            raise MissingAnalyticJacobian(f"model {model.name!r} has no analytic Jacobian")
        J = np.asarray(model.prediction.analytic_jacobian(p), dtype=float)
        J = J.reshape(model.output_dim, model.dim)
        if not np.all(np.isfinite(J)):
            raise NonFinite(f"analytic Jacobian not finite at {p.tolist()}")
        return J, False
    if scheme != "central_fd":
        raise ValueError(f"unknown Jacobian scheme {scheme!r}")
    return _fd_jacobian(model, p, step)


def _fd_jacobian(model, p, step):
    lo, hi = model.space.lower, model.space.upper
    f0 = None
    one_sided = False
    cols = []
    for i in range(model.dim):
        h = step * max(1.0, abs(p[i]))
        e = np.zeros_like(p)
        e[i] = h
        if p[i] - h >= lo[i] and p[i] + h <= hi[i]:
            cols.append((evaluate(model, p + e) - evaluate(model, p - e)) / (2 * h))
            continue
        one_sided = True
        if f0 is None:
            f0 = evaluate(model, p)
        if p[i] + 2 * h <= hi[i]:
            f1, f2 = evaluate(model, p + e), evaluate(model, p + 2 * e)
            cols.append((-3 * f0 + 4 * f1 - f2) / (2 * h))
        elif p[i] - 2 * h >= lo[i]:
            f1, f2 = evaluate(model, p - e), evaluate(model, p - 2 * e)
            cols.append((3 * f0 - 4 * f1 + f2) / (2 * h))
        else:
            raise OutOfDomain(f"coordinate {i} has no room for a difference stencil")
    return np.column_stack(cols), one_sided


@dataclass
class ValidationReport:
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(model: ModelInstance, n_samples: int = 100, seed: int = 0) -> ValidationReport:
    """Check the structural invariants of a model; never raises."""
    problems = []
    space, pred, noise = model.space, model.prediction, model.noise
    if space.dim < 1:
        problems.append("parameter space has dimension < 1")
    if not np.all(space.lower < space.upper):
        problems.append("lower bound not below upper bound")
    if pred.input_dim != space.dim:
        problems.append("prediction input_dim differs from parameter space dim")
    if noise.replicates < 1:
        problems.append("replicates must be a positive integer")
    if noise.kind == "gaussian":
        S = noise.covariance
        if S is None or S.shape != (pred.output_dim, pred.output_dim):
            problems.append("covariance dimension differs from output_dim")
        else:
            scale = max(1.0, float(np.max(np.abs(S))))
            if not np.allclose(S, S.T, rtol=0.0, atol=1e-12 * scale):
                problems.append("covariance not symmetric")
            else:
                try:
                    cholesky_factor(S)
                except NotPositiveDefinite:
                    problems.append("covariance not positive definite")
    elif noise.kind != "categorical":
        problems.append(f"unknown noise kind {noise.kind!r}")
    metric = model.metric
    if metric.kind == "weighted":
        w = metric.weights
        if w is None or w.shape != (space.dim,):
            problems.append("metric weights have the wrong length")
        elif not np.all(w > 0):
            problems.append("metric weights must be strictly positive")
    elif metric.kind != "euclidean":
        problems.append(f"unknown metric kind {metric.kind!r}")

    if noise.kind == "categorical" and pred.input_dim == space.dim:
        rng = np.random.default_rng(seed)
        for p in model.sample(rng, n_samples):
            try:
                rho = evaluate(model, p)
            except ModelDomainError as exc:
                problems.append(f"evaluation failed at sampled point: {exc}")
                break
            if abs(rho.sum() - 1.0) > 1e-12 or np.any(rho < -1e-14):
                problems.append("output not on simplex")
                break
    return ValidationReport(problems)
