#!/usr/bin/env python3
"""
Pruebas de los priors log-normales.
"""

import numpy as np
import pytest

from fbo.errors import DomainError
from fbo.priors import (
    PriorSet,
    default_priors,
    log_prior_density,
    log_prior_gradient,
    lognormal_from_moments,
)


def test_output_scale_prior_parameters():
    prior = lognormal_from_moments(10.0, 10.0)
    assert prior.mu_N == pytest.approx(1.9560115027, abs=1e-9)
    assert prior.sigma_N == pytest.approx(0.8325546112, abs=1e-9)


def test_length_scale_prior_parameters():
    prior = lognormal_from_moments(0.5, 0.5)
    assert prior.mu_N == pytest.approx(-1.0397207708, abs=1e-9)
    assert prior.sigma_N == pytest.approx(0.8325546112, abs=1e-9)


@pytest.mark.parametrize("mean,std", [(10.0, 10.0), (0.5, 0.5), (2.0, 0.1), (1e-3, 5.0)])
def test_moments_are_recovered(mean, std):
    prior = lognormal_from_moments(mean, std)
    recovered_mean = np.exp(prior.mu_N + prior.sigma_N ** 2 / 2)
    recovered_var = (np.exp(prior.sigma_N ** 2) - 1) * np.exp(2 * prior.mu_N + prior.sigma_N ** 2)
    assert recovered_mean == pytest.approx(mean, rel=1e-10)
    assert np.sqrt(recovered_var) == pytest.approx(std, rel=1e-8)


def test_zero_std_gives_degenerate_prior():
    prior = lognormal_from_moments(1.0, 0.0)
    assert prior.sigma_N == 0.0
    with pytest.raises(DomainError):
        prior.log_density(0.0)


def test_invalid_moments_raise():
    with pytest.raises(DomainError):
        lognormal_from_moments(-1.0, 1.0)
    with pytest.raises(DomainError):
        lognormal_from_moments(1.0, -1.0)


def test_density_peaks_at_mu_n():
    prior = lognormal_from_moments(0.5, 0.5)
    at_mode = prior.log_density(prior.mu_N)
    assert at_mode == pytest.approx(-np.log(prior.sigma_N) - 0.5 * np.log(2 * np.pi))
    assert prior.log_density(prior.mu_N + 0.3) < at_mode


def test_joint_density_is_sum_of_components():
    priors = default_priors()
    u = np.array([1.0, -0.5, -2.0])
    expected = (priors.output_scale_prior.log_density(1.0)
                + priors.length_scale_prior.log_density(-0.5)
                + priors.length_scale_prior.log_density(-2.0))
    assert log_prior_density(u, priors) == pytest.approx(expected)


def test_prior_gradient_matches_finite_differences():
    priors = PriorSet.from_moments(3.0, 1.0, 0.2, 0.4)
    u = np.array([0.4, -1.2, 0.1])
    grad = log_prior_gradient(u, priors)
    h = 1e-6
    fd = [(log_prior_density(u + h * e, priors) - log_prior_density(u - h * e, priors)) / (2 * h)
          for e in np.eye(3)]
    np.testing.assert_allclose(grad, fd, rtol=1e-7)


def test_dimension_mismatch_raises():
    priors = default_priors()
    with pytest.raises(DomainError):
        log_prior_density(np.array([0.0, 0.0]), priors, dim=2)
    with pytest.raises(DomainError):
        log_prior_density(np.array([0.0]), priors)


def test_prior_means_start_point():
    priors = default_priors()
    start = priors.prior_means(2)
    np.testing.assert_allclose(start, [1.9560115027, -1.0397207708, -1.0397207708], atol=1e-9)
