"""JSON schemas for run configurations and for the documents the CLI writes."""

from __future__ import annotations

NUMBER = {"type": "number"}
EXT_REAL = {"anyOf": [{"type": "number"}, {"enum": ["inf", "-inf", "+inf"]}]}
VECTOR = {"type": "array", "items": NUMBER, "minItems": 1}
NONEMPTY_VECTOR = VECTOR
MATRIX = {"type": "array", "items": VECTOR, "minItems": 1}
POS_INT = {"type": "integer", "minimum": 1}
SEED = {"type": "integer", "minimum": 0}
NULLABLE_NUMBER = {"anyOf": [{"type": "number"}, {"enum": ["inf", "-inf"]}, {"type": "null"}]}
NULLABLE_VECTOR = {"type": "array", "items": NULLABLE_NUMBER}


def _params(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


MODEL_PARAMS = {
    "line": _params({"timepoints": VECTOR}),
    "sum_exp": _params({"timepoints": VECTOR}),
    "two_compartment": _params({"timepoints": VECTOR, "c1": {"type": "number", "exclusiveMinimum": 0}}),
    "coins": _params({}),
    "nonlinear_ode_summary": _params({}),
    "gaussian_mixture_moments": _params({}),
    "lpv": _params({"A0": MATRIX, "A": {"type": "array", "items": MATRIX}, "C": MATRIX,
                    "timepoints": VECTOR, "sample_box": {"type": "array", "items": VECTOR,
                                                         "minItems": 2, "maxItems": 2}},
                   required=("A0", "A", "C")),
    "conformal": _params({}),
    "circle": _params({}),
    "linear": _params({"matrix": MATRIX, "offset": VECTOR}, required=("matrix",)),
    "constant": _params({"value": VECTOR, "dim": POS_INT}),
}

_model_rules = [
    {"if": {"properties": {"name": {"const": name}}}, "then": {"properties": {"params": schema}}}
    for name, schema in MODEL_PARAMS.items()
]

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["model"],
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {"name": {"enum": sorted(MODEL_PARAMS)}, "params": {"type": "object"}},
            "allOf": _model_rules,
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "minProperties": 1,
            "maxProperties": 1,
            "properties": {
                "gaussian": _params({
                    "sigma": {"anyOf": [{"const": "identity"}, {"type": "number", "exclusiveMinimum": 0}, MATRIX]},
                    "replicates": POS_INT,
                }),
                "categorical": _params({"replicates": POS_INT}),
            },
        },
        "metric": {"anyOf": [{"const": "euclidean"}, _params({"weighted": VECTOR}, required=("weighted",))]},
        "p0": VECTOR,
        "p": VECTOR,
        "jacobian": {"enum": ["auto", "analytic", "central_fd"]},
        "fd_step": {"type": "number", "exclusiveMinimum": 0},
        "rank_threshold": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "multiscale": _params({
            "deltas": {"type": "array", "items": NUMBER},
            "starts": {"type": "integer", "minimum": 0},
            "seed": SEED,
            "max_iter": POS_INT,
        }, required=("deltas", "seed")),
        "grid": _params({
            "axes": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
            "ranges": {"type": "array", "items": {"type": "array", "items": NUMBER, "minItems": 2, "maxItems": 2},
                       "minItems": 2, "maxItems": 2},
            "resolution": {"anyOf": [{"type": "integer"},
                                     {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}]},
            "sqrt_mode": {"type": "boolean"},
            "levels": {"type": "array", "items": NUMBER},
            "labels": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2},
        }, required=("ranges", "resolution")),
        "trace": {"anyOf": [{"type": "boolean"}, _params({
            "steps": POS_INT,
            "step_size": {"type": "number", "exclusiveMinimum": 0},
            "tol": {"type": "number", "exclusiveMinimum": 0},
        })]},
        "confidence": _params({
            "z0": VECTOR,
            "alpha": NUMBER,
            "starts": POS_INT,
            "seed": SEED,
            "start": VECTOR,
            "start_box": {"type": "array", "items": {"type": "array", "items": EXT_REAL}, "minItems": 2, "maxItems": 2},
            "probe": _params({"r_max": {"type": "number", "exclusiveMinimum": 0}, "n_directions": POS_INT}),
        }, required=("z0", "alpha", "seed")),
    },
}

# ---------------------------------------------------------------- output documents

_SPHERE_POINT = {"anyOf": [{"type": "null"}, _params({
    "direction": VECTOR, "radius": NUMBER, "point": VECTOR, "feasible": {"type": "boolean"}, "value": NULLABLE_NUMBER,
}, required=("direction", "radius", "point", "feasible", "value"))]}

FIM_OUTPUT = _params({
    "command": {"const": "fim"}, "model": {"type": "string"}, "p0": VECTOR, "fim": MATRIX,
    "eigenvalues": VECTOR, "eigenvectors": MATRIX, "condition_number": NULLABLE_NUMBER,
    "rank": {"type": "integer"}, "class_dimension": {"type": "integer"},
    "locally_identifiable": {"type": "boolean"}, "stiffest_direction": VECTOR, "sloppiest_direction": VECTOR,
    "singular_values": VECTOR, "rank_threshold": NUMBER, "one_sided": {"type": "boolean"},
}, required=("fim", "eigenvalues", "condition_number", "rank", "class_dimension"))

MULTISCALE_OUTPUT = _params({
    "command": {"const": "multiscale"}, "model": {"type": "string"}, "p0": VECTOR, "deltas": VECTOR,
    "sup_d": NULLABLE_VECTOR, "inf_d": NULLABLE_VECTOR, "ratio": NULLABLE_VECTOR,
    "status": {"type": "array", "items": {"enum": ["ok", "empty_sphere"]}},
    "starts_used": {"type": "integer"}, "abandoned": {"type": "array", "items": {"type": "integer"}},
    "infinite_excluded": {"type": "array", "items": {"type": "integer"}},
    "max_disruptive": {"type": "array", "items": _SPHERE_POINT},
    "min_disruptive": {"type": "array", "items": _SPHERE_POINT},
    "max_optima": {"type": "array", "items": {"type": "array", "items": _SPHERE_POINT}},
    "min_optima": {"type": "array", "items": {"type": "array", "items": _SPHERE_POINT}},
}, required=("deltas", "sup_d", "inf_d", "ratio"))

_FIBER = {"anyOf": [{"type": "null"}, _params({
    "n_points": {"type": "integer"}, "arc_length": NUMBER, "drift": NUMBER, "stop_reason": {"type": "string"},
})]}

IDENTIFIABILITY_OUTPUT = _params({
    "command": {"const": "identifiability"}, "model": {"type": "string"}, "p0": VECTOR,
    "locally_identifiable": {"type": "boolean"}, "rank": {"type": "integer"},
    "class_dimension": {"type": "integer"}, "singular_values": VECTOR, "fiber": _FIBER,
}, required=("locally_identifiable", "rank", "class_dimension"))

_MLE = _params({
    "estimate": VECTOR, "neg_log_likelihood": NULLABLE_NUMBER, "converged": {"type": "boolean"},
    "iterations": {"type": "integer"}, "start": VECTOR, "gradient_norm": NULLABLE_NUMBER,
})

CONFIDENCE_OUTPUT = _params({
    "command": {"const": "confidence"}, "model": {"type": "string"}, "z0": VECTOR,
    "alpha": NUMBER, "epsilon": NUMBER, "bounded": {"type": "boolean"},
    "escape_directions": {"type": "array", "items": VECTOR}, "probe_radius": NUMBER,
    "n_directions": {"type": "integer"}, "estimate": _MLE, "mle_results": {"type": "array", "items": _MLE},
}, required=("bounded", "epsilon", "escape_directions", "mle_results"))

DISTANCE_OUTPUT = _params({
    "kind": {"enum": ["gaussian_kl", "categorical_kl", "l2_continuous"]},
    "value": {"anyOf": [{"type": "number", "minimum": 0}, {"const": "+inf"}]},
}, required=("kind", "value"))

OUTPUT_SCHEMAS = {
    "fim": FIM_OUTPUT,
    "multiscale": MULTISCALE_OUTPUT,
    "identifiability": IDENTIFIABILITY_OUTPUT,
    "confidence": CONFIDENCE_OUTPUT,
    "distance": DISTANCE_OUTPUT,
}
