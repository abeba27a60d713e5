#!/usr/bin/env python3
"""
Pruebas de inferencia: ML-II multistart y muestreador NUTS.
"""

import numpy as np
import pytest

from fbo.errors import BenchmarkError, DomainError, InferenceError
from fbo.gp_core import Dataset, Hyperparameters, log_marginal_likelihood, matern52_gram
from fbo.inference import (
    DualAveraging,
    MLIIConfig,
    SamplerConfig,
    bounded_quasi_newton,
    find_reasonable_step_size,
    fit_mlii,
    leapfrog_step,
    nuts_transition,
    run_nuts,
    sample_posterior,
)
from fbo.priors import default_priors
from fbo.random_streams import random_stream


def standard_normal(u):
    u = np.asarray(u, dtype=np.float64)
    return -0.5 * float(u @ u), -u


def _gp_sample_dataset(seed=5, n=30, output_scale=1.0, length_scales=(0.25, 0.5)):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, 2))
    K = matern52_gram(X, X, Hyperparameters(output_scale, length_scales))
    y = np.linalg.cholesky(K + 1e-6 * np.eye(n)) @ rng.standard_normal(n)
    return Dataset.from_observations(X, y, [(0.0, 1.0), (0.0, 1.0)])


# ---------------------------------------------------------------------------
# ML-II
# ---------------------------------------------------------------------------

def test_quasi_newton_solves_rosenbrock():
    def rosenbrock(x):
        a, b = x
        value = (1 - a) ** 2 + 100 * (b - a * a) ** 2
        grad = np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])
        return value, grad

    x, value = bounded_quasi_newton(rosenbrock, [(-2.0, 2.0), (-2.0, 2.0)], [-1.2, 1.0], max_iter=2000)
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-4)
    assert value < 1e-6


def test_quasi_newton_respects_box():
    def linear(x):
        return float(x.sum()), np.ones_like(x)

    x, value = bounded_quasi_newton(linear, [(0.5, 1.0), (-1.0, 2.0)], [0.7, 0.0])
    np.testing.assert_allclose(x, [0.5, -1.0])
    assert value == pytest.approx(-0.5)


def test_quasi_newton_finds_interior_minimum_of_quadratic():
    def quadratic(x):
        return float((x[0] - 0.3) ** 2), np.array([2.0 * (x[0] - 0.3)])

    x, value = bounded_quasi_newton(quadratic, [(0.0, 1.0)], [0.9])
    assert x[0] == pytest.approx(0.3, abs=1e-6)
    assert value == pytest.approx(0.0, abs=1e-10)


def test_quasi_newton_rejects_start_outside_box():
    with pytest.raises(DomainError):
        bounded_quasi_newton(standard_normal, [(0.0, 1.0)], [2.0])


def test_mlii_beats_generating_hyperparameters():
    data = _gp_sample_dataset()
    hp = fit_mlii(data, MLIIConfig(restarts=10), rng=random_stream(0, 1, 'mlii'))
    truth = Hyperparameters(1.0 / data.out_std ** 2, (0.25, 0.5))
    fitted_value, _ = log_marginal_likelihood(data, hp)
    truth_value, _ = log_marginal_likelihood(data, truth)
    assert fitted_value >= truth_value - 1e-6
    assert hp.dim == 2


def test_mlii_recovers_generating_length_scales():
    data = _gp_sample_dataset()
    hp = fit_mlii(data, MLIIConfig(restarts=10), rng=random_stream(0, 1, 'mlii'))
    errors = np.abs(np.log(hp.length_scales) - np.log([0.25, 0.5]))
    assert np.all(errors < 0.5), errors


def test_mlii_is_at_least_as_good_as_every_start():
    data = _gp_sample_dataset(n=15)
    cfg = MLIIConfig(restarts=6)
    hp = fit_mlii(data, cfg, rng=random_stream(2, 1, 'mlii'))
    fitted_value, _ = log_marginal_likelihood(data, hp)

    box = np.array(cfg.search_box(3))
    starts = random_stream(2, 1, 'mlii').uniform(box[:, 0], box[:, 1], size=(cfg.restarts, 3))
    evaluated = 0
    for start in starts:
        try:
            start_value, _ = log_marginal_likelihood(data, Hyperparameters.from_log_vector(start))
        except BenchmarkError:
            continue
        evaluated += 1
        assert fitted_value >= start_value - 1e-9
    assert evaluated > 0


def test_mlii_is_deterministic_and_inside_box():
    data = _gp_sample_dataset(n=10)
    cfg = MLIIConfig(restarts=4)
    a = fit_mlii(data, cfg, rng=random_stream(3, 2, 'mlii'))
    b = fit_mlii(data, cfg, rng=random_stream(3, 2, 'mlii'))
    assert a == b
    values = np.concatenate([[a.output_scale], a.length_scales])
    assert np.all(values >= 1e-3 * (1 - 1e-9)) and np.all(values <= 1e3 * (1 + 1e-9))


def test_mlii_single_observation_returns_valid_hyperparameters():
    data = Dataset.from_observations(np.array([[0.3, 0.3]]), [1.0], [(0.0, 1.0), (0.0, 1.0)])
    hp = fit_mlii(data, MLIIConfig(restarts=3))
    assert hp.output_scale > 0


def test_mlii_config_validation():
    with pytest.raises(DomainError):
        MLIIConfig(restarts=0)
    with pytest.raises(DomainError):
        MLIIConfig(lower=10.0, upper=1.0)


# ---------------------------------------------------------------------------
# HMC / NUTS
# ---------------------------------------------------------------------------

def test_leapfrog_energy_error_is_second_order():
    def grad(q):
        return -q

    def energy_error(eps):
        q, p = leapfrog_step(np.array([1.0]), np.array([1.0]), eps, grad)
        return abs(0.5 * (q @ q + p @ p) - 1.0)

    ratio = energy_error(0.01) / energy_error(0.005)
    assert 7.0 < ratio < 9.0


def test_leapfrog_is_reversible():
    def grad(q):
        return -np.array([2.0, 0.5]) * q + np.sin(q)

    start_q, start_p = np.array([0.7, -1.3]), np.array([0.4, 0.9])
    q, p = leapfrog_step(start_q, start_p, 0.1, grad)
    back_q, back_p = leapfrog_step(q, -p, 0.1, grad)
    np.testing.assert_allclose(back_q, start_q, atol=1e-12)
    np.testing.assert_allclose(-back_p, start_p, atol=1e-12)


def test_leapfrog_without_gradient_moves_in_a_straight_line():
    q, p = leapfrog_step(np.array([1.0, 2.0]), np.array([0.5, -0.25]), 0.2, np.zeros_like)
    np.testing.assert_allclose(q, [1.1, 1.95], rtol=0, atol=1e-15)
    np.testing.assert_array_equal(p, [0.5, -0.25])


def test_nuts_recovers_standard_normal_moments():
    cfg = SamplerConfig(warmup=500, draws=2000, thin=1)
    result = run_nuts(standard_normal, np.zeros(3), cfg, rng=random_stream(1, 0, 'sampler'))
    assert result.kept.shape == (2000, 3)
    np.testing.assert_allclose(result.kept.mean(axis=0), 0.0, atol=0.1)
    np.testing.assert_allclose(result.kept.var(axis=0), 1.0, atol=0.15)
    assert result.diagnostics.divergences == 0


def test_nuts_recovers_correlation_of_bivariate_normal():
    precision = np.linalg.inv(np.array([[1.0, 0.9], [0.9, 1.0]]))

    def correlated(u):
        u = np.asarray(u, dtype=np.float64)
        g = precision @ u
        return -0.5 * float(u @ g), -g

    cfg = SamplerConfig(warmup=1000, draws=4000, thin=1)
    result = run_nuts(correlated, np.zeros(2), cfg, rng=random_stream(3, 0, 'sampler'))
    corr = np.corrcoef(result.kept.T)[0, 1]
    assert abs(corr - 0.9) < 0.1


def test_nuts_acceptance_statistic_tracks_target():
    cfg = SamplerConfig(warmup=500, draws=500, thin=1, target_accept=0.8)
    result = run_nuts(standard_normal, np.zeros(10), cfg, rng=random_stream(2, 0, 'sampler'))
    assert abs(result.diagnostics.mean_accept_stat - 0.8) < 0.1
    assert result.diagnostics.divergences == 0


def test_nuts_is_deterministic_for_a_fixed_stream():
    cfg = SamplerConfig(warmup=50, draws=40, thin=4)
    a = run_nuts(standard_normal, np.zeros(3), cfg, rng=random_stream(9, 1, 'sampler'))
    b = run_nuts(standard_normal, np.zeros(3), cfg, rng=random_stream(9, 1, 'sampler'))
    np.testing.assert_array_equal(a.kept, b.kept)
    assert a.diagnostics == b.diagnostics


def test_thinning_keeps_draws_over_thin():
    cfg = SamplerConfig(warmup=20, draws=48, thin=16)
    result = run_nuts(standard_normal, np.zeros(2), cfg)
    assert result.kept.shape == (3, 2)


def test_depth_zero_tree_is_single_leapfrog():
    rng = random_stream(0, 0, 'sampler')
    tr = nuts_transition(np.zeros(2), 0.5, standard_normal, rng, max_tree_depth=0)
    assert tr.n_leapfrog == 1
    assert tr.tree_depth == 1


def test_huge_step_is_flagged_divergent_and_keeps_position():
    rng = random_stream(0, 0, 'sampler')
    start = np.array([0.5, -0.5])
    tr = nuts_transition(start, 1e3, standard_normal, rng)
    assert tr.divergent
    np.testing.assert_array_equal(tr.position, start)


def test_too_many_divergences_raise_with_diagnostics():
    def steep(u):
        u = np.asarray(u, dtype=np.float64)
        if np.any(np.abs(u) > 1.0):
            return -np.inf, np.full_like(u, np.nan)
        return 0.0, np.zeros_like(u)

    cfg = SamplerConfig(warmup=0, draws=32, thin=1, max_divergence_fraction=0.0)
    with pytest.raises(InferenceError) as excinfo:
        run_nuts(steep, np.zeros(2), cfg, rng=random_stream(0, 0, 'sampler'))
    assert excinfo.value.diagnostics.divergences > 0


def test_find_reasonable_step_size_is_positive():
    rng = random_stream(0, 0, 'sampler')
    eps = find_reasonable_step_size(np.zeros(3), standard_normal, rng)
    assert 0.0 < eps < 100.0


def test_dual_averaging_moves_step_size_with_acceptance():
    high = DualAveraging(0.1, target_accept=0.8)
    low = DualAveraging(0.1, target_accept=0.8)
    for _ in range(50):
        high.update(1.0)
        low.update(0.0)
    assert high.final_step_size > low.final_step_size


def test_sampler_config_validation():
    with pytest.raises(DomainError):
        SamplerConfig(draws=100, thin=16)
    with pytest.raises(DomainError):
        SamplerConfig(target_accept=1.0)
    assert SamplerConfig().kept == 16


def test_sample_posterior_returns_positive_draws():
    data = _gp_sample_dataset(n=6)
    cfg = SamplerConfig(warmup=40, draws=32, thin=8)
    draws = sample_posterior(data, default_priors(), cfg, rng=random_stream(4, 1, 'sampler'))
    assert draws.size == 4
    assert draws.draws.shape == (4, 3)
    assert np.all(draws.draws > 0)
    assert len(draws.hyperparameters()) == 4
    again = sample_posterior(data, default_priors(), cfg, rng=random_stream(4, 1, 'sampler'))
    np.testing.assert_array_equal(draws.draws, again.draws)
