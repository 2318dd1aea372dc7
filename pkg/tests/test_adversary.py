"""Laplace sampler and poisoning tests."""

import numpy as np
import pytest
from scipy import stats

from fedguard.adversary import (
    AdversaryPlan,
    LaplaceParams,
    build_plan,
    laplace_pdf,
    poison_update,
    sample_laplace,
)
from fedguard.errors import ParameterError
from fedguard.model import ParameterVector


def test_sampler_moments_million_draws():
    rng = np.random.default_rng(123)
    draws = np.array([sample_laplace(0.0, 1.0, rng) for _ in range(10**6)])
    assert abs(draws.mean()) <= 0.005
    assert abs(draws.var() - 2.0) <= 0.02 * 2.0  # Var(Laplace(0, b)) = 2 b^2


def test_sampler_kolmogorov_smirnov():
    rng = np.random.default_rng(7)
    draws = np.array([sample_laplace(0.0, 1.0, rng) for _ in range(10**5)])
    result = stats.kstest(draws, stats.laplace(loc=0.0, scale=1.0).cdf)
    assert result.pvalue > 0.01


def test_sampler_reproducible():
    a = [sample_laplace(1.0, 0.5, np.random.default_rng(9)) for _ in range(5)]
    b = [sample_laplace(1.0, 0.5, np.random.default_rng(9)) for _ in range(5)]
    assert a == b


def test_sampler_rejects_bad_scale():
    rng = np.random.default_rng(0)
    for scale in (0.0, -1.0):
        with pytest.raises(ParameterError):
            sample_laplace(0.0, scale, rng)


def test_density_peak_at_paper_scale():
    # Density maximum of Laplace(mu, b) is 1/(2b); at b = 0.005 that is 100.
    assert laplace_pdf(0.0, 0.0, 0.005) == pytest.approx(100.0)
    assert laplace_pdf(1.0, 1.0, 0.005) == pytest.approx(100.0)
    assert laplace_pdf(0.01, 0.0, 0.005) == pytest.approx(100.0 * np.exp(-2.0))


def test_effective_scale_interpretations():
    assert LaplaceParams(b=0.005, interpretation="epsilon", sensitivity=1.0).effective_scale == 200.0
    assert LaplaceParams(b=0.005, interpretation="scale").effective_scale == 0.005


def test_laplace_params_validation():
    with pytest.raises(ParameterError):
        LaplaceParams(b=0.0)
    with pytest.raises(ParameterError):
        LaplaceParams(interpretation="nope")
    with pytest.raises(ParameterError):
        LaplaceParams(interpretation="epsilon", sensitivity=0.0)


def test_poison_vanishing_noise_limit():
    update = ParameterVector(np.linspace(-1, 1, 11))
    noise = LaplaceParams(b=1e-12, interpretation="scale")
    out = poison_update(update, noise, np.random.default_rng(4))
    assert np.max(np.abs(out.values - update.values)) < 1e-9


def test_poison_mean_displacement_matches_analytic():
    # E|Laplace(0, b)| = b, so per-coordinate mean |delta| at scale 200 is 200.
    update = ParameterVector(np.zeros(20000))
    noise = LaplaceParams()  # epsilon, b=0.005 -> scale 200
    out = poison_update(update, noise, np.random.default_rng(11))
    mean_abs = np.abs(out.values).mean()
    assert abs(mean_abs - 200.0) <= 0.05 * 200.0


def test_poison_coordinatewise_independence():
    update = ParameterVector(np.zeros(2))
    noise = LaplaceParams(b=1.0, interpretation="scale")
    rng = np.random.default_rng(21)
    draws = np.stack([poison_update(update, noise, rng).values for _ in range(10**5)])
    cov = np.cov(draws[:, 0], draws[:, 1])[0, 1]
    assert abs(cov) < 0.05  # per-coordinate variance is 2


def test_poison_never_mutates_input():
    update = ParameterVector(np.ones(5))
    before = update.values.copy()
    poison_update(update, LaplaceParams(), np.random.default_rng(0))
    assert np.array_equal(update.values, before)


def test_poison_applies_location_offset():
    update = ParameterVector(np.zeros(5000))
    noise = LaplaceParams(b=1e-9, interpretation="scale", mu=3.0)
    out = poison_update(update, noise, np.random.default_rng(1))
    assert np.allclose(out.values, 3.0, atol=1e-6)


def test_build_plan_fractions():
    assert build_plan(10, 0.0, "controlled_clients", LaplaceParams(), 1).adversary_ids == frozenset()
    assert len(build_plan(10, 0.4, "controlled_clients", LaplaceParams(), 1).adversary_ids) == 4
    assert len(build_plan(10, 0.2, "self_participating", LaplaceParams(), 1).adversary_ids) == 2


def test_build_plan_deterministic():
    a = build_plan(10, 0.4, "controlled_clients", LaplaceParams(), 5)
    b = build_plan(10, 0.4, "controlled_clients", LaplaceParams(), 5)
    assert a.adversary_ids == b.adversary_ids


def test_build_plan_rejects_bad_fraction():
    for frac in (-0.1, 1.0, 1.5):
        with pytest.raises(ParameterError):
            build_plan(10, frac, "controlled_clients", LaplaceParams(), 1)


def test_build_plan_rejects_bad_scenario():
    with pytest.raises(ParameterError):
        build_plan(10, 0.2, "weird", LaplaceParams(), 1)


def test_plan_ids_within_range():
    plan = build_plan(10, 0.4, "controlled_clients", LaplaceParams(), 3)
    assert isinstance(plan, AdversaryPlan)
    assert all(0 <= c < 10 for c in plan.adversary_ids)
