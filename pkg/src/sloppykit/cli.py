"""Command-line front end.

``sloppykit <command> --config run.json [--out DIR]``

Exit codes: 0 success, 2 invalid invocation or configuration, 3 failure
inside an analysis (model domain errors, solver failures).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import jsonschema
import numpy as np

from . import catalog
from .contour import contour_polylines, render_svg
from .errors import SloppyError
from .fim import fim
from .identifiability import assess_practical_identifiability, trace_fiber
from .model import DEFAULT_FD_STEP, ReferenceMetric, validate
from .multiscale import delta_sloppiness, level_set_grid
from .premetric import d_infinity, premetric
from .schema import CONFIG_SCHEMA, OUTPUT_SCHEMAS

logger = logging.getLogger("sloppykit")

COMMANDS = ("fim", "multiscale", "levelset", "identifiability", "confidence", "distance", "models")
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class ConfigError(Exception):
    """Invalid configuration; maps to exit code 2."""


# ---------------------------------------------------------------- encoding


def encode(obj):
    """JSON-ready copy: arrays to lists, infinities to strings, NaN to null."""
    if isinstance(obj, dict):
        return {k: encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return encode(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def fmt_csv(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return ""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return "%.17g" % v


def _ext_real(v) -> float:
    if isinstance(v, str):
        return float(v.replace("+", ""))
    return float(v)


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(doc) -> str:
    return json.dumps(encode(doc), indent=2, allow_nan=False) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------- config


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {loc}: {exc.message}") from exc
    return cfg


def build_model(cfg: dict):
    """Construct the catalog model described by a (schema-valid) config."""
    name = cfg["model"]["name"]
    params = dict(cfg["model"].get("params", {}))
    noise = cfg.get("noise")
    kwargs = {}
    if name == "coins":
        if noise is not None and "gaussian" in noise:
            raise ConfigError("the coins model has categorical noise")
        kwargs["replicates"] = (noise or {}).get("categorical", {}).get("replicates", 1)
    else:
        if noise is not None and "categorical" in noise:
            raise ConfigError(f"model {name!r} needs gaussian noise")
        g = (noise or {}).get("gaussian", {})
        sigma = g.get("sigma", "identity")
        kwargs["covariance"] = None if sigma == "identity" else sigma
        kwargs["replicates"] = g.get("replicates", 1)
    if name == "lpv":
        A = catalog.affine_family(params.pop("A0"), params.pop("A"))
        params["A"] = A
        params["param_dim"] = A.n_params
    try:
        model = catalog.CATALOG[name].constructor(**params, **kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"cannot build model {name!r}: {exc}") from exc
    metric = cfg.get("metric", "euclidean")
    if isinstance(metric, dict):
        w = np.asarray(metric["weighted"], dtype=float)
        if w.shape != (model.dim,) or not np.all(w > 0):
            raise ConfigError(f"metric weights must be {model.dim} positive numbers")
        model = model.with_metric(ReferenceMetric.weighted(w))
    report = validate(model, n_samples=20)
    if not report.ok:
        raise ConfigError("invalid model: " + "; ".join(report.violations))
    return model


def _point(cfg, key, model):
    if key not in cfg:
        raise ConfigError(f"config needs {key!r}")
    p = np.asarray(cfg[key], dtype=float)
    if p.shape != (model.dim,):
        raise ConfigError(f"{key} must have {model.dim} entries")
    if not model.space.contains(p):
        raise ConfigError(f"{key} lies outside the parameter space")
    return p


def _block(cfg, key):
    if key not in cfg:
        raise ConfigError(f"config needs a {key!r} block")
    return cfg[key]


def _fim_kwargs(cfg):
    return {
        "scheme": cfg.get("jacobian", "auto"),
        "step": cfg.get("fd_step", DEFAULT_FD_STEP),
        "rank_threshold": cfg.get("rank_threshold", 1e-8),
    }


# ---------------------------------------------------------------- commands


def cmd_fim(cfg, out: Path):
    model = build_model(cfg)
    p0 = _point(cfg, "p0", model)
    rep = fim(model, p0, **_fim_kwargs(cfg))
    doc = {
        "command": "fim",
        "model": model.name,
        "p0": p0,
        "fim": rep.fim,
        "eigenvalues": rep.eigen.eigenvalues,
        "eigenvectors": rep.eigen.eigenvectors,
        "condition_number": rep.condition_number,
        "rank": rep.numerical_rank,
        "class_dimension": rep.class_dimension,
        "locally_identifiable": rep.full_rank,
        "stiffest_direction": rep.stiffest_direction,
        "sloppiest_direction": rep.sloppiest_direction,
        "singular_values": rep.singular_values,
        "rank_threshold": rep.rank_threshold,
        "one_sided": rep.one_sided,
    }
    write_atomic(out / "fim.json", dump_json(doc))
    return doc


def _sphere_doc(sp):
    if sp is None:
        return None
    return {"direction": sp.direction, "radius": sp.radius, "point": sp.point,
            "feasible": sp.feasible, "value": sp.value}


def cmd_multiscale(cfg, out: Path):
    model = build_model(cfg)
    p0 = _point(cfg, "p0", model)
    block = _block(cfg, "multiscale")
    deltas = block["deltas"]
    if not deltas:
        raise ConfigError("deltas must be non-empty")
    if any(d <= 0 for d in deltas) or any(b < a for a, b in zip(deltas, deltas[1:])):
        raise ConfigError("deltas must be positive and sorted")
    curve = delta_sloppiness(model, p0, deltas, block.get("starts", 16), block["seed"], block.get("max_iter", 500))
    doc = {
        "command": "multiscale",
        "model": model.name,
        "p0": p0,
        "deltas": curve.deltas,
        "sup_d": curve.sup_d,
        "inf_d": curve.inf_d,
        "ratio": curve.ratio,
        "status": curve.status,
        "starts_used": curve.starts_used,
        "abandoned": curve.abandoned,
        "infinite_excluded": curve.infinite_excluded,
        "max_disruptive": [_sphere_doc(s) for s in curve.max_disruptive],
        "min_disruptive": [_sphere_doc(s) for s in curve.min_disruptive],
        "max_optima": [[_sphere_doc(s) for s in opt] for opt in curve.max_optima],
        "min_optima": [[_sphere_doc(s) for s in opt] for opt in curve.min_optima],
    }
    r = model.dim
    header = ["delta", "sup_d", "inf_d", "ratio"]
    header += [f"max_dir_{k + 1}" for k in range(r)] + [f"min_dir_{k + 1}" for k in range(r)]
    rows = []
    for j, delta in enumerate(curve.deltas):
        mx, mn = curve.max_disruptive[j], curve.min_disruptive[j]
        row = [fmt_csv(delta), fmt_csv(curve.sup_d[j]), fmt_csv(curve.inf_d[j]), fmt_csv(curve.ratio[j])]
        row += [fmt_csv(v) for v in (mx.direction if mx is not None else [None] * r)]
        row += [fmt_csv(v) for v in (mn.direction if mn is not None else [None] * r)]
        rows.append(row)
    write_atomic(out / "multiscale.json", dump_json(doc))
    write_atomic(out / "multiscale.csv", csv_text(header, rows))
    return doc


def cmd_levelset(cfg, out: Path):
    model = build_model(cfg)
    p0 = _point(cfg, "p0", model)
    g = _block(cfg, "grid")
    axes = g.get("axes", [0, 1])
    if axes[0] == axes[1] or max(axes) >= model.dim:
        raise ConfigError("grid axes must be two distinct parameter indices")
    res = g["resolution"]
    res = (res, res) if isinstance(res, int) else tuple(res)
    if min(res) < 2:
        raise ConfigError("grid resolution must be at least 2 per axis")
    ranges = g["ranges"]
    if any(lo >= hi for lo, hi in ranges):
        raise ConfigError("grid ranges must be increasing")
    grid = level_set_grid(model, p0, axes[0], axes[1], ranges, res, g.get("sqrt_mode", False))
    rows = []
    for a, x in enumerate(grid.x):
        for b, y in enumerate(grid.y):
            rows.append([a, b, fmt_csv(x), fmt_csv(y), fmt_csv(grid.values[a, b])])
    write_atomic(out / "levelset.csv", csv_text(["i", "j", "p_i", "p_j", "value"], rows))
    written = ["levelset.csv"]
    if "levels" in g:
        levels = g["levels"]
        lines = contour_polylines(grid, levels)
        labels = g.get("labels")
        write_atomic(out / "levelset.svg", render_svg(grid, levels, lines, labels))
        crow = []
        for level, polys in zip(levels, lines):
            for k, poly in enumerate(polys):
                for v, (x, y) in enumerate(poly.points):
                    crow.append([fmt_csv(level), k, int(poly.closed), v, fmt_csv(x), fmt_csv(y)])
        write_atomic(out / "contours.csv", csv_text(["level", "polyline", "closed", "vertex", "x", "y"], crow))
        written += ["levelset.svg", "contours.csv"]
    return {"written": written, "grid": grid}


def cmd_identifiability(cfg, out: Path):
    model = build_model(cfg)
    p0 = _point(cfg, "p0", model)
    rep = fim(model, p0, **_fim_kwargs(cfg))
    doc = {
        "command": "identifiability",
        "model": model.name,
        "p0": p0,
        "locally_identifiable": rep.full_rank,
        "rank": rep.numerical_rank,
        "class_dimension": rep.class_dimension,
        "singular_values": rep.singular_values,
        "fiber": None,
    }
    trace = cfg.get("trace", False)
    if trace:
        opts = trace if isinstance(trace, dict) else {}
        tr = trace_fiber(model, p0, steps=opts.get("steps", 100), step_size=opts.get("step_size", 1e-2),
                         tol=opts.get("tol", 1e-8), scheme=cfg.get("jacobian", "auto"))
        doc["fiber"] = {"n_points": int(tr.points.shape[0]), "arc_length": tr.arc_length,
                        "drift": tr.drift, "stop_reason": tr.stop_reason}
        header = ["step"] + [f"p_{k + 1}" for k in range(model.dim)]
        rows = [[s] + [fmt_csv(v) for v in pt] for s, pt in enumerate(tr.points)]
        write_atomic(out / "fiber.csv", csv_text(header, rows))
    write_atomic(out / "identifiability.json", dump_json(doc))
    return doc


def _mle_doc(res):
    return {"estimate": res.estimate, "neg_log_likelihood": res.neg_log_likelihood, "converged": res.converged,
            "iterations": res.iterations, "start": res.start, "gradient_norm": res.gradient_norm}


def cmd_confidence(cfg, out: Path):
    model = build_model(cfg)
    c = _block(cfg, "confidence")
    alpha = c["alpha"]
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1)")
    z0 = np.asarray(c["z0"], dtype=float)
    if z0.shape != (model.output_dim,):
        raise ConfigError(f"z0 must have {model.output_dim} entries")
    start = _point(c, "start", model) if "start" in c else None
    box = None
    if "start_box" in c:
        box = tuple(np.array([_ext_real(v) for v in row]) for row in c["start_box"])
        if any(b.shape != (model.dim,) for b in box) or not np.all(np.isfinite(box[0]) & np.isfinite(box[1])):
            raise ConfigError("start_box must hold two finite rows of parameter length")
    probe = c.get("probe", {})
    a = assess_practical_identifiability(model, z0, alpha, c.get("starts", 8), c["seed"], start, box,
                                         probe.get("r_max"), probe.get("n_directions"))
    doc = {
        "command": "confidence",
        "model": model.name,
        "z0": a.z0,
        "alpha": a.alpha,
        "epsilon": a.epsilon,
        "bounded": a.bounded,
        "escape_directions": a.escape_directions,
        "probe_radius": a.probe_radius,
        "n_directions": a.n_directions,
        "estimate": _mle_doc(a.estimate),
        "mle_results": [_mle_doc(r) for r in a.mle_results],
    }
    write_atomic(out / "confidence.json", dump_json(doc))
    return doc


def cmd_distance(cfg, out: Path):
    model = build_model(cfg)
    p = _point(cfg, "p", model)
    p0 = _point(cfg, "p0", model)
    if model.name == "lpv":
        val = d_infinity(model, p, p0)
    else:
        val = premetric(model, p, p0)
    value = "+inf" if math.isinf(val.value) else val.value
    doc = {"kind": val.kind, "value": value}
    sys.stdout.write(json.dumps(doc) + "\n")
    return doc


def cmd_models(cfg=None, out=None):
    doc = {name: {"summary": e.summary, "params": e.params} for name, e in catalog.CATALOG.items()}
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    return doc


HANDLERS = {
    "fim": cmd_fim,
    "multiscale": cmd_multiscale,
    "levelset": cmd_levelset,
    "identifiability": cmd_identifiability,
    "confidence": cmd_confidence,
    "distance": cmd_distance,
}


def _setup_logging():
    level = os.environ.get("SLOPPYKIT_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sloppykit", description="Sloppiness and identifiability analyses.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="path to the JSON run configuration")
    ap.add_argument("--out", default="out", help="output directory (default: ./out)")
    return ap


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.command == "models":
        cmd_models()
        return EXIT_OK
    try:
        if not args.config:
            raise ConfigError("--config is required")
        cfg = load_config(args.config)
        HANDLERS[args.command](cfg, Path(args.out))
    except ConfigError as exc:
        print(f"sloppykit: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SloppyError as exc:
        print(f"sloppykit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"sloppykit: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
