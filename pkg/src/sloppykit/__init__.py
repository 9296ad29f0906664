"""Sloppiness and identifiability analysis for parametric models.

The usual entry points::

    from sloppykit import catalog, fim, delta_sloppiness
    model = catalog.make_sum_exp([1/3, 1, 3])
    report = fim(model, [4, 1/8])
    curve = delta_sloppiness(model, [4, 1/8], [1e-3, 0.5, 1.0])
"""

from . import catalog
from .catalog import CATALOG
from .errors import SloppyError
from .fim import FimReport, d_fim, fim, infinitesimal_sloppiness, local_identifiability, mle_covariance_mc
from .identifiability import (
    assess_practical_identifiability,
    mle,
    multistart_mle,
    negative_log_likelihood,
    test_equivalence,
    trace_fiber,
)
from .model import ModelInstance, NoiseModel, ParameterSpace, PredictionMap, ReferenceMetric, evaluate, jacobian, validate
from .multiscale import DeltaSloppinessCurve, LevelSetGrid, delta_sloppiness, level_set_grid
from .premetric import d_categorical, d_gaussian, d_infinity, d_reference, premetric

__version__ = "0.1.0"

__all__ = [
    "CATALOG",
    "DeltaSloppinessCurve",
    "FimReport",
    "LevelSetGrid",
    "ModelInstance",
    "NoiseModel",
    "ParameterSpace",
    "PredictionMap",
    "ReferenceMetric",
    "SloppyError",
    "assess_practical_identifiability",
    "catalog",
    "d_categorical",
    "d_fim",
    "d_gaussian",
    "d_infinity",
    "d_reference",
    "delta_sloppiness",
    "evaluate",
    "fim",
    "infinitesimal_sloppiness",
    "jacobian",
    "level_set_grid",
    "local_identifiability",
    "mle",
    "mle_covariance_mc",
    "multistart_mle",
    "negative_log_likelihood",
    "premetric",
    "test_equivalence",
    "trace_fiber",
    "validate",
]
