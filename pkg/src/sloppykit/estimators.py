"""scikit-learn style wrappers around the analyses.

The analyses are per-point rather than per-dataset, so the mapping is loose:
``fit`` takes the base point (or the observed data vector) as its single
sample, and fitted results live in trailing-underscore attributes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .fim import d_fim, fim
from .identifiability import assess_practical_identifiability, best_result, multistart_mle, negative_log_likelihood
from .linalg import RANK_THRESHOLD
from .model import evaluate
from .multiscale import DEFAULT_STARTS, delta_sloppiness


def _single_row(X, width, what):
    X = check_array(np.atleast_2d(np.asarray(X, dtype=float)), ensure_2d=True)
    if X.shape != (1, width):
        raise ValueError(f"{what} must be a single row of length {width}, got shape {X.shape}")
    return X[0]


class FisherInformation(TransformerMixin, BaseEstimator):
    """FIM at a base point; ``transform`` maps points to ``d_FIM(p, p0)``."""

    def __init__(self, model=None, scheme="auto", rank_threshold=RANK_THRESHOLD):
        self.model = model
        self.scheme = scheme
        self.rank_threshold = rank_threshold

    def fit(self, X, y=None):
        p0 = _single_row(X, self.model.dim, "p0")
        self.report_ = fim(self.model, p0, scheme=self.scheme, rank_threshold=self.rank_threshold)
        self.fim_ = self.report_.fim
        self.eigenvalues_ = self.report_.eigen.eigenvalues
        self.condition_number_ = self.report_.condition_number
        self.numerical_rank_ = self.report_.numerical_rank
        self.class_dimension_ = self.report_.class_dimension
        self.n_features_in_ = self.model.dim
        return self

    def transform(self, X):
        check_is_fitted(self, "report_")
        X = check_array(X)
        p0 = self.report_.p0
        return np.array([[d_fim(self.report_, x, p0)] for x in X])


class DeltaSloppiness(BaseEstimator):
    """delta-sloppiness curve about a base point."""

    def __init__(self, model=None, deltas=(0.1,), starts=DEFAULT_STARTS, seed=0, max_iter=500):
        self.model = model
        self.deltas = deltas
        self.starts = starts
        self.seed = seed
        self.max_iter = max_iter

    def fit(self, X, y=None):
        p0 = _single_row(X, self.model.dim, "p0")
        self.curve_ = delta_sloppiness(self.model, p0, self.deltas, self.starts, self.seed, self.max_iter)
        self.ratio_ = self.curve_.ratio
        self.n_features_in_ = self.model.dim
        return self


class MaximumLikelihood(BaseEstimator):
    """Multi-start MLE for one observed data vector."""

    def __init__(self, model=None, starts=1, seed=0, start=None, start_box=None, max_iter=200):
        self.model = model
        self.starts = starts
        self.seed = seed
        self.start = start
        self.start_box = start_box
        self.max_iter = max_iter

    def fit(self, X, y=None):
        z0 = _single_row(X, self.model.output_dim, "data")
        start = self.start
        if start is None and self.starts == 1:
            lo, hi = self.model.sampling_bounds()
            start = 0.5 * (lo + hi)
        self.results_ = multistart_mle(self.model, z0, self.starts, self.seed, start, self.start_box, self.max_iter)
        self.result_ = best_result(self.results_)
        self.estimate_ = self.result_.estimate
        self.z0_ = z0
        return self

    def predict(self, X=None):
        """Perfect data at the estimate."""
        check_is_fitted(self, "estimate_")
        return evaluate(self.model, self.estimate_)

    def score(self, X, y=None):
        """Log-likelihood of ``X`` (one data vector) at the estimate."""
        check_is_fitted(self, "estimate_")
        z = _single_row(X, self.model.output_dim, "data")
        return -negative_log_likelihood(self.model, self.estimate_, z)


class PracticalIdentifiability(BaseEstimator):
    """Boundedness of the likelihood region for one observed data vector."""

    def __init__(self, model=None, alpha=0.05, starts=8, seed=0, start=None, start_box=None,
                 r_max=None, n_directions=None):
        self.model = model
        self.alpha = alpha
        self.starts = starts
        self.seed = seed
        self.start = start
        self.start_box = start_box
        self.r_max = r_max
        self.n_directions = n_directions

    def fit(self, X, y=None):
        z0 = _single_row(X, self.model.output_dim, "data")
        self.assessment_ = assess_practical_identifiability(
            self.model, z0, self.alpha, self.starts, self.seed, self.start, self.start_box,
            self.r_max, self.n_directions)
        self.bounded_ = self.assessment_.bounded
        self.epsilon_ = self.assessment_.epsilon
        return self
