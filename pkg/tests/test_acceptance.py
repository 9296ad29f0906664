"""Acceptance suite: one test per criterion, each timed and reported.

Every test records a PASS/FAIL line, which the terminal summary prints under
"acceptance criteria", and then asserts.
"""

import csv
import json
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import record_acceptance
from sloppykit import catalog
from sloppykit.catalog import affine_family, nonlinear_ode_in_u
from sloppykit.cli import main
from sloppykit.fim import d_fim, fim, mle_covariance_mc, simulate_data, trial_rng
from sloppykit.identifiability import (
    assess_practical_identifiability,
    confidence_threshold,
    in_confidence_region,
    mle,
    trace_fiber,
)
from sloppykit.model import evaluate
from sloppykit.multiscale import delta_sloppiness
from sloppykit.ode import IvpSpec, quadrature_l2, solve_dense
from sloppykit.premetric import d_gaussian, d_infinity, premetric

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def report(label, checks, elapsed, limit, detail):
    ok = bool(all(checks)) and elapsed < limit
    record_acceptance(label, ok, f"{detail}; {elapsed:.2f}s (limit {limit:g}s)")
    print(f"{'PASS' if ok else 'FAIL'} {label}: {detail}; {elapsed:.2f}s")
    return ok


def sum_exp_fim_closed_form(a, b, t=(1 / 3, 1.0, 3.0)):
    t = np.asarray(t)
    ea, eb = t * np.exp(-a * t), t * np.exp(-b * t)
    return np.array([[ea @ ea, ea @ eb], [ea @ eb, eb @ eb]])


def test_ac01_line_fim(tmp_path):
    cfg = tmp_path / "line.json"
    cfg.write_text((CONFIGS / "line_fim.json").read_text())
    with Timer() as t:
        code = main(["fim", "--config", str(cfg), "--out", str(tmp_path / "out")])
    doc = json.loads((tmp_path / "out" / "fim.json").read_text())
    err = float(np.max(np.abs(np.array(doc["fim"]) - [[2, 1], [1, 1]])))
    kerr = abs(doc["condition_number"] - (7 + 3 * np.sqrt(5)) / 2)
    assert report("AC1 line-fit FIM", [code == 0, err <= 1e-12, kerr <= 1e-10], t.elapsed, 1.0,
                  f"max|F-[[2,1],[1,1]]|={err:.1e}, |kappa-(7+3sqrt5)/2|={kerr:.1e}")


def test_ac02_sum_exp_fim():
    model = catalog.make_sum_exp([1 / 3, 1.0, 3.0])
    rng = np.random.default_rng(2)
    with Timer() as t:
        worst_a = worst_f = 0.0
        for a, b in rng.uniform(0, 5, size=(20, 2)):
            F = sum_exp_fim_closed_form(a, b)
            Fa = fim(model, [a, b], scheme="analytic").fim
            Ff = fim(model, [a, b], scheme="central_fd").fim
            worst_a = max(worst_a, float(np.max(np.abs(Fa - F) / np.abs(F))))
            worst_f = max(worst_f, float(np.max(np.abs(Ff - F) / np.abs(F))))
    assert report("AC2 sum-of-exponentials FIM", [worst_a <= 1e-10, worst_f <= 1e-4], t.elapsed, 1.0,
                  f"max rel err analytic={worst_a:.1e}, fd={worst_f:.1e}")


def test_ac03_linear_map_exactness():
    rng = np.random.default_rng(3)
    with Timer() as t:
        worst = 0.0
        for k in range(50):
            n, r = rng.integers(1, 9, size=2)
            M = rng.normal(size=(n, r))
            R = rng.normal(size=(n, n))
            S = R @ R.T + 0.5 * np.eye(n)
            model = catalog.make_linear(M, offset=rng.normal(size=n), covariance=S, replicates=(1, 5)[k % 2])
            rep = fim(model, rng.normal(size=r))
            for _ in range(20):
                p, q = rng.normal(size=r) * 2, rng.normal(size=r) * 2
                d = d_gaussian(model, p, q).value
                worst = max(worst, abs(d_fim(rep, p, q) - d) / max(1.0, d))
    assert report("AC3 linear-map d_FIM = d", [worst <= 1e-10], t.elapsed, 5.0, f"max rel gap={worst:.1e}")


def test_ac04_small_delta_limit():
    model = catalog.make_sum_exp([1 / 3, 1.0, 3.0])
    p0 = [4.0, 0.125]
    with Timer() as t:
        kappa = fim(model, p0).condition_number
        curve = delta_sloppiness(model, p0, [1e-3])
    gap = abs(curve.ratio[0] / kappa - 1)
    assert report("AC4 delta->0 limit", [gap <= 1e-2], t.elapsed, 10.0,
                  f"S(1e-3)={curve.ratio[0]:.6g}, kappa={kappa:.6g}, |S/kappa-1|={gap:.2e}")


def brute_force(model, p0, delta, n=4096):
    vals = []
    for th in 2 * np.pi * np.arange(n) / n:
        p = p0 + delta * np.array([np.cos(th), np.sin(th)])
        if model.space.contains(p):
            vals.append(premetric(model, p, p0).value)
    return max(vals), min(vals)


def test_ac05_multiscale_oracle():
    model = catalog.make_sum_exp([1 / 3, 1.0, 3.0])
    p0 = np.array([4.0, 0.125])
    with Timer() as t:
        curve = delta_sloppiness(model, p0, [0.5, 1.0, 2.0])
    gaps = []
    for j, delta in enumerate(curve.deltas):
        hi, lo = brute_force(model, p0, delta)
        gaps.append(max(abs(curve.sup_d[j] - hi) / hi, abs(curve.inf_d[j] - lo) / lo))
    assert report("AC5 multiscale vs brute force", [max(gaps) <= 5e-3], t.elapsed, 30.0,
                  "max rel gap per delta " + ", ".join(f"{g:.1e}" for g in gaps))


def _catalog_models():
    lpv = catalog.make_lpv(affine_family([[-1.0, 0.5], [0.0, -2.0]], [[[-1.0, 0.0], [0.0, 0.0]]]),
                           [[1.0, 0.0]], 1, sample_box=([0.0, -1.0, -1.0], [1.0, 1.0, 1.0]))
    out = []
    for name, entry in catalog.CATALOG.items():
        if name == "lpv":
            out.append(lpv)
        elif name == "linear":
            out.append(catalog.make_linear([[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]]))
        else:
            out.append(entry.constructor())
    return out


def test_ac06_gibbs_and_fibers():
    rng = np.random.default_rng(6)
    with Timer() as t:
        worst = np.inf
        for model in _catalog_models():
            P, Q = model.sample(rng, 1000), model.sample(rng, 1000)
            dist = d_infinity if model.name == "lpv" else premetric
            worst = min(worst, min(dist(model, p, q).value for p, q in zip(P, Q)))
        se = catalog.make_sum_exp()
        swap = max(d_gaussian(se, [a, b], [b, a]).value for a, b in rng.uniform(0, 5, size=(1000, 2)))
        coins = catalog.make_coins()
        fiber = max(premetric(coins, [p1, p2, p2], [q, p2, p2]).value
                    for p1, p2, q in rng.uniform(0, 1, size=(1000, 3)))
    assert report("AC6 Gibbs and vanishing on classes", [worst >= -1e-12, swap <= 1e-12, fiber <= 1e-12],
                  t.elapsed, 10.0, f"min d={worst:.1e}, max swap d={swap:.1e}, max coin-fiber d={fiber:.1e}")


def test_ac07_rank_classification():
    rng = np.random.default_rng(7)
    se, coins, nl = catalog.make_sum_exp(), catalog.make_coins(), catalog.make_nonlinear_ode_summary()
    with Timer() as t:
        off = [fim(se, p).numerical_rank for p in rng.uniform(0, 5, size=(20, 2)) if abs(p[0] - p[1]) > 1e-3]
        diag = [fim(se, [a, a]).numerical_rank for a in rng.uniform(0, 5, 10)]
        generic = [fim(coins, p).numerical_rank for p in rng.uniform(0.05, 0.95, size=(20, 3))]
        equal = []
        for p1, p2 in rng.uniform(0.05, 0.95, size=(10, 2)):
            equal.append(fim(coins, [p1, p2, p2]).numerical_rank)
        u_pts = []
        while len(u_pts) < 20:
            p = rng.uniform(0.5, 2.0, 5)
            if nonlinear_ode_in_u(p):
                u_pts.append(p)
        nl_reps = [fim(nl, p) for p in u_pts]
    checks = [
        len(off) == 20 and all(r == 2 for r in off),
        all(r == 1 for r in diag),
        all(r == 3 for r in generic),
        all(r <= 2 for r in equal),
        all(r.numerical_rank == 4 and r.class_dimension == 1 for r in nl_reps),
    ]
    assert report("AC7 rank classification", checks, t.elapsed, 10.0,
                  f"sum_exp off/diag ranks {set(off)}/{set(diag)}, coins generic/equal {set(generic)}/{set(equal)}, "
                  f"nonlinear ranks {set(r.numerical_rank for r in nl_reps)}")


def test_ac08_fiber_tracing():
    model = catalog.make_nonlinear_ode_summary()
    p0 = np.array([1.1, 0.9, 1.2, 0.8, 1.3])
    with Timer() as t:
        tr = trace_fiber(model, p0, steps=200)
    phi0 = evaluate(model, p0)
    drift = max(float(np.max(np.abs(evaluate(model, p) - phi0))) for p in tr.points)
    ratio = tr.points[:, 3] / tr.points[:, 1]
    rel = float(np.max(np.abs(ratio / (p0[3] / p0[1]) - 1)))
    checks = [tr.points.shape[0] == 201, drift <= 1e-6, rel <= 1e-6]
    assert report("AC8 fiber tracing", checks, t.elapsed, 10.0,
                  f"{tr.points.shape[0] - 1} steps, drift={drift:.1e}, p4/p2 rel dev={rel:.1e}")


def _hurwitz(rng, m):
    A = rng.normal(size=(m, m))
    return A - (np.max(np.linalg.eigvals(A).real) + rng.uniform(0.2, 1.0)) * np.eye(m)


def test_ac09_d_infinity_oracle():
    rng = np.random.default_rng(9)
    with Timer() as t:
        gaps = []
        for _ in range(10):
            m, n = int(rng.integers(1, 5)), int(rng.integers(1, 4))
            A1, A2 = _hurwitz(rng, m), _hurwitz(rng, m)
            C = rng.normal(size=(n, m))
            model = catalog.make_lpv(affine_family(A1, [A2 - A1]), C, 1)
            xa, xb = rng.normal(size=m), rng.normal(size=m)
            d = d_infinity(model, np.r_[0.0, xa], np.r_[1.0, xb]).value
            slow = min(-np.max(np.linalg.eigvals(A).real) for A in (A1, A2))
            t_end = 60.0 / slow
            sa = solve_dense(IvpSpec(lambda s, x, A=A1: A @ x, xa, (0.0, t_end), rel_tol=1e-11, abs_tol=1e-13))
            sb = solve_dense(IvpSpec(lambda s, x, A=A2: A @ x, xb, (0.0, t_end), rel_tol=1e-11, abs_tol=1e-13))
            q = quadrature_l2(lambda s: C @ (sa(s) - sb(s)), t_end, tol=1e-10 * max(1.0, d))
            gaps.append(abs(d - q) / q)
    assert report("AC9 d_infinity vs quadrature", [max(gaps) <= 1e-4], t.elapsed, 30.0,
                  f"max rel gap={max(gaps):.1e}")


def test_ac10_cramer_rao():
    model = catalog.make_line()
    with Timer() as t:
        check = mle_covariance_mc(model, [0.5, -1.0], trials=2000, seed=10)
    z = float(np.max(np.abs(check.z_scores())))
    assert report("AC10 Cramer-Rao (line)", [z <= 5.0, check.n_failed == 0], t.elapsed, 60.0,
                  f"max |Cov - F^-1| / MC s.e. = {z:.2f}")


def test_ac11_practical_identifiability():
    with Timer() as t:
        line = assess_practical_identifiability(catalog.make_line(), [0.4, 1.9], starts=4, seed=0)
        conf = assess_practical_identifiability(catalog.make_conformal(), [0.1, 0.05], starts=8, seed=0)
        circ = assess_practical_identifiability(catalog.make_circle(), [2.0], starts=8, seed=0)
    radii = np.array([np.hypot(*r.estimate) for r in circ.mle_results if r.converged])
    checks = [line.bounded, not conf.bounded, circ.bounded, radii.size >= 2, np.ptp(radii) <= 1e-6]
    assert report("AC11 practical identifiability verdicts", checks, t.elapsed, 60.0,
                  f"line bounded={line.bounded}, conformal bounded={conf.bounded} "
                  f"({len(conf.escape_directions)} escapes), circle bounded={circ.bounded}, "
                  f"radius spread={np.ptp(radii):.1e} over {radii.size} starts")


def test_ac12_coverage():
    model = catalog.make_line()
    p0 = np.array([0.5, -1.0])
    phi0 = evaluate(model, p0)
    n = 2000
    with Timer() as t:
        inside = 0
        for i in range(n):
            z = simulate_data(model, phi0, trial_rng(12, i))
            fit = mle(model, z, p0)
            eps = confidence_threshold(fit.neg_log_likelihood, 0.05, model.dim)
            inside += in_confidence_region(model, p0, z, eps)
    cov = inside / n
    se = np.sqrt(0.95 * 0.05 / n)
    assert report("AC12 coverage calibration", [abs(cov - 0.95) <= 3 * se], t.elapsed, 60.0,
                  f"coverage={cov:.4f}, |cov-0.95|/se={abs(cov - 0.95) / se:.2f}")


def _read_grid(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    i = np.array([int(r[0]) for r in rows])
    j = np.array([int(r[1]) for r in rows])
    x = np.unique([float(r[2]) for r in rows])
    y = np.unique([float(r[3]) for r in rows])
    vals = np.full((i.max() + 1, j.max() + 1), np.nan)
    vals[i, j] = [float(r[4]) if r[4] else np.nan for r in rows]
    return x, y, vals, rows


def _bilinear(x, y, V, px, py):
    a = np.clip(np.searchsorted(x, px) - 1, 0, len(x) - 2)
    b = np.clip(np.searchsorted(y, py) - 1, 0, len(y) - 2)
    tx = (px - x[a]) / (x[a + 1] - x[a])
    ty = (py - y[b]) / (y[b + 1] - y[b])
    return ((1 - tx) * (1 - ty) * V[a, b] + tx * (1 - ty) * V[a + 1, b]
            + (1 - tx) * ty * V[a, b + 1] + tx * ty * V[a + 1, b + 1])


@pytest.mark.parametrize("figure", ["fig5_left", "fig5_center", "fig5_right", "fig6_left", "fig6_center",
                                    "fig6_right"])
def test_ac13_figure_reproduction(figure, tmp_path):
    cfg = json.loads((CONFIGS / f"{figure}.json").read_text())
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    with Timer() as t:
        codes = [main([cmd, "--config", str(path), "--out", str(tmp_path / "out")])
                 for cmd in ("levelset", "multiscale")]
        plain = dict(cfg, grid=dict(cfg["grid"], sqrt_mode=False))
        path2 = tmp_path / "plain.json"
        path2.write_text(json.dumps(plain))
        codes.append(main(["levelset", "--config", str(path2), "--out", str(tmp_path / "plain")]))
    out = tmp_path / "out"
    svg_ok = (out / "levelset.svg").exists() and "<path" in (out / "levelset.svg").read_text()
    x, y, sq, rows = _read_grid(out / "levelset.csv")
    _, _, raw, rows_raw = _read_grid(tmp_path / "plain" / "levelset.csv")
    # sqrt_mode touches the value column only, elementwise
    same_coords = all(r[:4] == s[:4] for r, s in zip(rows, rows_raw))
    fin = np.isfinite(raw)
    sqrt_ok = (same_coords and np.array_equal(fin, np.isfinite(sq))
               and np.allclose(sq[fin], np.sqrt(raw[fin]), rtol=1e-15, atol=0))
    curve = json.loads((out / "multiscale.json").read_text())
    p0 = np.array(cfg["p0"], dtype=float)
    h = max(x[1] - x[0], y[1] - y[0])
    gaps = []
    extrema_ok = True
    for delta, sup, inf in zip(curve["deltas"], curve["sup_d"], curve["inf_d"]):
        if delta < 2 * h:
            continue  # below grid resolution
        th = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
        px, py = p0[0] + delta * np.cos(th), p0[1] + delta * np.sin(th)
        feasible = (px >= 0) & (py >= 0)
        visible = feasible & (px <= x[-1]) & (py <= y[-1]) & (px >= x[0]) & (py >= y[0])
        vals = _bilinear(x, y, raw, px[visible], py[visible])
        # one-cell variation of d along the sphere bounds the interpolation error
        ring = _bilinear(x, y, raw, px[visible] + h, py[visible])
        ring2 = _bilinear(x, y, raw, px[visible], py[visible] + h)
        tol = float(np.nanmax(np.abs(np.r_[ring - vals, ring2 - vals])))
        gmax, gmin = float(np.nanmax(vals)), float(np.nanmin(vals))
        if np.all(visible[feasible]):
            ok = abs(gmax - sup) <= tol and abs(gmin - inf) <= tol
        else:
            ok = gmax <= sup + tol and gmin >= inf - tol
        extrema_ok &= ok
        gaps.append(max(abs(gmax - sup), abs(gmin - inf)) / tol)
    checks = [all(c == 0 for c in codes), svg_ok, sqrt_ok, extrema_ok, len(gaps) >= 3]
    assert report(f"AC13 figure reproduction [{figure}]", checks, t.elapsed, 60.0,
                  f"svg={svg_ok}, sqrt elementwise={sqrt_ok}, grid-vs-multiscale gap/cell variation "
                  + ", ".join(f"{g:.2f}" for g in gaps))
