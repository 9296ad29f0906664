import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sloppykit import catalog
from sloppykit.errors import DimensionMismatch, InvalidTrialCount, ZeroProbabilityCell
from sloppykit.fim import (
    d_fim,
    fim,
    infinitesimal_sloppiness,
    local_identifiability,
    mle_covariance_mc,
    report_from_fim,
    trial_rng,
)
from sloppykit.model import PredictionMap, jacobian
from sloppykit.premetric import d_gaussian, premetric


def sum_exp_fim_closed_form(a, b, t=(1 / 3, 1.0, 3.0)):
    t = np.asarray(t)
    ea, eb = t * np.exp(-a * t), t * np.exp(-b * t)
    return np.array([[ea @ ea, ea @ eb], [ea @ eb, eb @ eb]])


def test_line_fim():
    rep = fim(catalog.make_line([0.0, 1.0]), [0.3, -0.7])
    assert np.max(np.abs(rep.fim - [[2, 1], [1, 1]])) <= 1e-12
    assert abs(rep.condition_number - (7 + 3 * np.sqrt(5)) / 2) <= 1e-10
    assert rep.numerical_rank == 2 and rep.class_dimension == 0


def test_sum_exp_entry(sum_exp):
    a0, b0 = 0.8, 2.1
    F = fim(sum_exp, [a0, b0]).fim
    expected = np.exp(-2 * a0 / 3) / 9 + np.exp(-2 * a0) + 9 * np.exp(-6 * a0)
    assert abs(F[0, 0] - expected) <= 1e-14 * expected
    assert np.allclose(F, sum_exp_fim_closed_form(a0, b0), rtol=1e-12)


def test_constant_map_zero_fim():
    rep = fim(catalog.make_constant([1.0, 2.0], dim=3), [0.1, 0.2, 0.3])
    assert np.array_equal(rep.fim, np.zeros((3, 3)))
    assert rep.numerical_rank == 0 and rep.class_dimension == 3
    assert rep.condition_number == np.inf


def test_fim_symmetric_and_psd_across_catalog():
    models = [catalog.make_line(), catalog.make_sum_exp(), catalog.make_two_compartment(),
              catalog.make_nonlinear_ode_summary(), catalog.make_gaussian_mixture_moments(),
              catalog.make_conformal(), catalog.make_circle()]
    rng = np.random.default_rng(5)
    for model in models:
        for p in model.sample(rng, 20):
            F = fim(model, p).fim
            assert np.array_equal(F, F.T)
            lam = np.linalg.eigvalsh(F)
            assert lam[0] >= -1e-10 * max(lam[-1], 0.0)
    coins = catalog.make_coins()
    for p in rng.uniform(0.05, 0.95, size=(20, 3)):
        F = fim(coins, p).fim
        assert np.array_equal(F, F.T)
        lam = np.linalg.eigvalsh(F)
        assert lam[0] >= -1e-10 * lam[-1]


def test_categorical_fim_is_kl_hessian():
    coins = catalog.make_coins(replicates=3)
    p0 = np.array([0.3, 0.6, 0.2])
    F = fim(coins, p0).fim
    h = 1e-4
    H = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            ei, ej = np.eye(3)[i] * h, np.eye(3)[j] * h
            H[i, j] = (premetric(coins, p0 + ei + ej, p0).value - premetric(coins, p0 + ei - ej, p0).value
                       - premetric(coins, p0 - ei + ej, p0).value
                       + premetric(coins, p0 - ei - ej, p0).value) / (4 * h * h)
    assert np.allclose(F, H, rtol=1e-4, atol=1e-6)


def test_categorical_zero_cell():
    with pytest.raises(ZeroProbabilityCell):
        fim(catalog.make_coins(), [1.0, 1.0, 0.5])


def test_fd_vs_analytic_fim():
    rng = np.random.default_rng(11)
    for model in [catalog.make_sum_exp(), catalog.make_two_compartment(), catalog.make_gaussian_mixture_moments()]:
        for p in model.sample(rng, 5):
            Fa = fim(model, p, scheme="analytic").fim
            Ff = fim(model, p, scheme="central_fd").fim
            assert np.max(np.abs(Fa - Ff)) <= 1e-4 * np.max(np.abs(Fa))


def test_d_fim_examples(line, rng):
    rep = fim(line, [0.0, 0.0])
    assert d_fim(rep, [1.0, 2.0], [1.0, 2.0]) == 0.0
    for _ in range(50):
        p, q = rng.normal(size=2) * 3, rng.normal(size=2) * 3
        d = d_gaussian(line, p, q).value
        assert abs(d_fim(rep, p, q) - d) <= 1e-12 * max(1, d)
    with pytest.raises(DimensionMismatch):
        d_fim(rep, [1.0], [1.0, 2.0])


def test_d_fim_taylor(sum_exp, rng):
    p0 = np.array([4.0, 0.125])
    rep = fim(sum_exp, p0)
    for _ in range(50):
        u = rng.normal(size=2)
        p = p0 + u / np.linalg.norm(u) * rng.uniform(1e-5, 1e-3)
        d = d_gaussian(sum_exp, p, p0).value
        assert abs(d_fim(rep, p, p0) - d) <= 0.05 * d


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31 - 1), st.sampled_from([1, 5]))
def test_linear_maps_d_fim_equals_d(n, r, seed, K):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(n, r))
    R = rng.normal(size=(n, n))
    S = R @ R.T + n * np.eye(n)
    model = catalog.make_linear(M, offset=rng.normal(size=n), covariance=S, replicates=K)
    rep = fim(model, rng.normal(size=r))
    for _ in range(5):
        p, q = rng.normal(size=r), rng.normal(size=r)
        d = d_gaussian(model, p, q).value
        assert abs(d_fim(rep, p, q) - d) / max(1.0, d) <= 1e-10


def test_infinitesimal_sloppiness_examples(sum_exp):
    assert report_from_fim([0.0, 0.0], np.eye(2)).condition_number == 1.0
    rep = report_from_fim([0.0, 0.0], np.array([[2.0, 1.0], [1.0, 1.0]]))
    assert abs(infinitesimal_sloppiness(rep) - (7 + 3 * np.sqrt(5)) / 2) <= 1e-12
    lam = np.linalg.eigvalsh(sum_exp_fim_closed_form(4.0, 0.125))
    kappa = infinitesimal_sloppiness(fim(sum_exp, [4.0, 0.125]))
    assert abs(kappa - lam[-1] / lam[0]) <= 1e-8 * kappa


def test_local_identifiability_examples(sum_exp):
    li = local_identifiability(sum_exp, [4.0, 0.125])
    assert li.locally_identifiable and li.class_dimension == 0
    li = local_identifiability(sum_exp, [2.0, 2.0])
    assert not li.locally_identifiable and li.numerical_rank == 1 and li.class_dimension == 1
    nl = catalog.make_nonlinear_ode_summary()
    rng = np.random.default_rng(1)
    for _ in range(5):
        li = local_identifiability(nl, np.ones(5) + rng.uniform(-0.3, 0.3, 5))
        assert li.numerical_rank == 4 and li.class_dimension == 1


def test_directions_are_unit_and_sign_normalized(sum_exp):
    rep = fim(sum_exp, [1.0, 3.0])
    for v in (rep.stiffest_direction, rep.sloppiest_direction):
        assert abs(np.linalg.norm(v) - 1) <= 1e-12
        assert v[np.argmax(np.abs(v))] > 0
    assert abs(rep.stiffest_direction @ rep.sloppiest_direction) <= 1e-12


def test_depends_only_on_phi_and_jacobian():
    # phi depends on p1 - p2 only, so p and p + (c, c) share phi and J
    f = lambda p: np.array([np.sin(p[0] - p[1]), (p[0] - p[1]) ** 2])
    jac = lambda p: np.array([[np.cos(p[0] - p[1]), -np.cos(p[0] - p[1])],
                              [2 * (p[0] - p[1]), -2 * (p[0] - p[1])]])
    base = catalog.make_line()
    import dataclasses

    model = dataclasses.replace(base, prediction=PredictionMap(2, 2, f, jac))
    a, b = np.array([0.5, 0.25]), np.array([1.5, 1.25])
    assert np.array_equal(jacobian(model, a), jacobian(model, b))
    ra, rb = fim(model, a, scheme="analytic"), fim(model, b, scheme="analytic")
    assert np.array_equal(ra.fim, rb.fim)
    assert np.array_equal(ra.eigen.eigenvalues, rb.eigen.eigenvalues)
    assert np.array_equal(ra.eigen.eigenvectors, rb.eigen.eigenvectors)
    assert ra.numerical_rank == rb.numerical_rank and ra.condition_number == rb.condition_number


def test_cramer_rao_line():
    check = mle_covariance_mc(catalog.make_line(), [0.5, -1.0], trials=2000, seed=0)
    assert check.n_failed == 0
    assert np.all(np.abs(check.z_scores()) <= 5)
    assert np.allclose(check.fim_inverse, [[1, -1], [-1, 2]])


def test_cramer_rao_sum_exp():
    model = catalog.make_sum_exp(replicates=50)
    check = mle_covariance_mc(model, [1.0, 0.25], trials=500, seed=1)
    assert check.failure_rate < 0.05
    assert check.min_eig_gap >= -3 * check.min_eig_se


def test_trial_count_errors(line):
    with pytest.raises(InvalidTrialCount):
        mle_covariance_mc(line, [0.0, 0.0], trials=0, seed=0)
    with pytest.raises(InvalidTrialCount):
        mle_covariance_mc(line, [0.0, 0.0], trials=-3, seed=0)


def test_trial_streams_independent_of_order():
    a = [trial_rng(7, i).standard_normal(3) for i in range(5)]
    b = [trial_rng(7, i).standard_normal(3) for i in reversed(range(5))][::-1]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not np.array_equal(a[0], a[1])
