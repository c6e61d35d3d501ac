"""
Cumulant machinery, decorrelation and correlated sampling
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from acdc_plf.exceptions import (
    DecompositionError,
    DegenerateVariableError,
    InfeasibleCorrelationError,
    InfeasibleMomentsError,
    InvalidArgumentError,
)
from acdc_plf.models.stochastic import BetaPvModel, CumulantSet, ParametricModel, StochasticSpec
from acdc_plf.services.stochastic_service import (
    beta_cumulants,
    beta_origin_moments,
    beta_params_from_stats,
    build_nataf_sampler,
    compose,
    correlated_samples,
    correlation_matrix_from_samples,
    correlation_model,
    decorrelate,
    decorrelation_transform,
    gaussian_cumulants,
    gaussian_marginal,
    marginal_cumulants,
    moments_to_cumulants,
    nataf_adjust,
    parametric_marginal,
    pv_marginal,
    pv_max_power,
    sample_cumulants,
    scale_pv,
    standard_normals,
)

ALPHA, BETA = 0.6799, 1.7787


def test_beta_cumulants_match_closed_form_moments():
    mean, var, skew, kurt = stats.beta.stats(ALPHA, BETA, moments="mvsk")
    c = beta_cumulants(ALPHA, BETA, order=4)
    assert c.mean == pytest.approx(float(mean), rel=1e-10)
    assert c.variance == pytest.approx(float(var), rel=1e-10)
    assert c.gamma(3) / c.variance ** 1.5 == pytest.approx(float(skew), rel=1e-9)
    assert c.gamma(4) / c.variance ** 2 == pytest.approx(float(kurt), rel=1e-9)


def test_beta_origin_moments():
    moments = beta_origin_moments(ALPHA, BETA, 5)
    assert moments == pytest.approx([stats.beta(ALPHA, BETA).moment(k) for k in range(1, 6)])
    assert beta_origin_moments(2.0, 3.0, 2) == pytest.approx([0.4, 0.2])
    with pytest.raises(InvalidArgumentError):
        beta_origin_moments(0.0, 1.0, 3)


def test_beta_cumulants_scale_with_capacity():
    unit = beta_cumulants(ALPHA, BETA, 1.0, 6)
    scaled = beta_cumulants(ALPHA, BETA, 0.25, 6)
    assert np.allclose(scaled.values, unit.values * 0.25 ** np.arange(1, 7), rtol=1e-12)


@pytest.mark.slow
def test_beta_cumulants_match_large_sample_estimates():
    n = 1_000_000
    draws = stats.beta.ppf((np.arange(n) + 0.5) / n, ALPHA, BETA)
    estimated = sample_cumulants(draws, 6).values
    analytic = beta_cumulants(ALPHA, BETA, order=6).values
    assert np.allclose(estimated[:4], analytic[:4], rtol=0.01)
    assert np.allclose(estimated[4:], analytic[4:], rtol=0.05)


def test_gaussian_moments_give_two_cumulants():
    mu, s = 0.7, 0.3
    origin = [mu, mu ** 2 + s ** 2, mu ** 3 + 3 * mu * s ** 2, mu ** 4 + 6 * mu ** 2 * s ** 2 + 3 * s ** 4]
    assert np.allclose(moments_to_cumulants(origin).values, [mu, s ** 2, 0.0, 0.0], atol=1e-10)
    assert np.allclose(gaussian_cumulants(mu, s, 4).values, [mu, s ** 2, 0.0, 0.0])


def test_exponential_moments_give_factorial_cumulants():
    origin = [math.factorial(k) for k in range(1, 9)]
    expected = [math.factorial(k - 1) for k in range(1, 9)]
    assert np.allclose(moments_to_cumulants(origin).values, expected, rtol=1e-10)


def test_cumulant_set_rejects_negative_variance():
    with pytest.raises(InvalidArgumentError):
        CumulantSet(np.array([0.0, -1.0]))
    with pytest.raises(InvalidArgumentError):
        moments_to_cumulants([1.0])


@given(st.floats(-3.0, 3.0).filter(lambda a: abs(a) > 1e-2), st.floats(-1.0, 1.0))
@settings(max_examples=30, deadline=None)
def test_sample_cumulants_are_homogeneous(a, b):
    x = np.random.default_rng(11).gamma(2.0, 1.0, 2000)
    direct = sample_cumulants(a * x + b, 6).values
    mapped = sample_cumulants(x, 6).affine(a, b).values
    assert np.allclose(direct, mapped, rtol=1e-7, atol=1e-10)


@pytest.mark.slow
def test_cumulants_add_over_independent_sums():
    rng = np.random.default_rng(5)
    n = 1_000_000
    x = stats.beta.rvs(ALPHA, BETA, size=n, random_state=rng)
    y = rng.normal(0.2, 0.1, n)
    estimated = sample_cumulants(x + y, 4).values
    analytic = (beta_cumulants(ALPHA, BETA, order=4) + gaussian_cumulants(0.2, 0.1, 4)).values
    assert np.allclose(estimated[:2], analytic[:2], rtol=0.01)
    assert estimated[2] == pytest.approx(analytic[2], rel=0.05)


def test_beta_shapes_from_normalized_stats():
    alpha, beta = beta_params_from_stats(0.3, 0.2)
    assert stats.beta.mean(alpha, beta) == pytest.approx(0.3)
    assert stats.beta.std(alpha, beta) == pytest.approx(0.2)
    with pytest.raises(InfeasibleMomentsError):
        beta_params_from_stats(0.5, 0.6)
    with pytest.raises(InfeasibleMomentsError):
        beta_params_from_stats(1.2, 0.1)


def test_pv_capacity_from_modules():
    assert pv_max_power(1.0, [2.0, 3.0], [0.2, 0.1]) == pytest.approx(0.7)
    with pytest.raises(InvalidArgumentError):
        pv_max_power(1.0, [2.0], [0.2, 0.1])
    model = BetaPvModel(id="PV", bus=1, alpha=ALPHA, beta=BETA, r_max=1.0, areas=[500.0], efficiencies=[0.2])
    marginal = pv_marginal(model, s_base_mva=1.0)
    assert marginal.mean == pytest.approx(0.1 * ALPHA / (ALPHA + BETA))


def test_scale_pv():
    spec = StochasticSpec(pv=[BetaPvModel(id="PV", bus=1, alpha=ALPHA, beta=BETA, r_m_mw=0.25)])
    assert scale_pv(spec, 2.0).pv[0].r_m_mw == pytest.approx(0.5)
    assert scale_pv(spec, 1.0) is spec
    with pytest.raises(InvalidArgumentError):
        scale_pv(spec, -1.0)


def _random_correlation(rng, n):
    a = rng.normal(size=(n, n + 5))
    cov = a @ a.T
    d = np.sqrt(np.diag(cov))
    return cov / np.outer(d, d)


def test_decorrelation_whitens_random_matrices():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        n = int(rng.integers(1, 11))
        c = _random_correlation(rng, n)
        g, b = decorrelation_transform(c)
        assert np.allclose(b @ c @ b.T, np.eye(n), atol=1e-10)
        assert np.allclose(g @ g.T, c, atol=1e-12)
        assert np.allclose(np.triu(g, 1), 0.0)


def test_correlation_model_round_trips_variables():
    model = correlation_model(["a", "b"], [[1.0, 0.6], [0.6, 1.0]])
    y = np.array([[0.3], [-1.2]])
    assert np.allclose(model.B @ (model.G @ y), y)


def test_compose_undoes_decorrelate():
    g, b = decorrelation_transform([[1.0, 0.6, 0.2], [0.6, 1.0, -0.3], [0.2, -0.3, 1.0]])
    z = np.random.default_rng(5).normal(size=(3, 50))
    assert np.allclose(compose(g, decorrelate(b, z)), z)
    y = decorrelate(b, compose(g, z))
    assert np.allclose(y, z)


@pytest.mark.parametrize("c", [
    [[1.0, 1.0], [1.0, 1.0]],
    [[1.0, 1.0, 0.3], [1.0, 1.0, 0.3], [0.3, 0.3, 1.0]],
])
def test_singular_semidefinite_matrix_still_factors(c):
    g, b = decorrelation_transform(c)
    assert np.allclose(g @ g.T, c)
    assert np.allclose(np.triu(g, 1), 0.0)
    z = compose(g, np.random.default_rng(2).normal(size=(len(c), 40)))
    assert np.allclose(compose(g, decorrelate(b, z)), z)


def test_indefinite_matrix_names_leading_minor():
    c = [[1.0, 0.9, 0.9], [0.9, 1.0, -0.9], [0.9, -0.9, 1.0]]
    with pytest.raises(DecompositionError) as info:
        decorrelation_transform(c)
    assert info.value.details["leading_minor"] == 3


@pytest.mark.parametrize("c", [
    [[1.0, 0.2], [0.3, 1.0]],
    [[2.0, 0.0], [0.0, 1.0]],
])
def test_unusable_matrices_are_rejected(c):
    with pytest.raises(DecompositionError):
        decorrelation_transform(c)


def test_sample_correlation_rejects_constant_columns():
    x = np.column_stack([np.arange(10.0), np.ones(10)])
    with pytest.raises(DegenerateVariableError):
        correlation_matrix_from_samples(x)


def _pv(name):
    return pv_marginal(BetaPvModel(id=name, bus=1, alpha=ALPHA, beta=BETA, r_m_mw=0.25), 1.0)


def test_nataf_reproduces_target_correlation_and_marginals():
    marginals = [_pv("PV1"), _pv("PV2"), gaussian_marginal("LD", 0.1, 0.01)]
    target = np.array([[1.0, 0.6, 0.3], [0.6, 1.0, 0.2], [0.3, 0.2, 1.0]])
    sampler = build_nataf_sampler(target, marginals, seed=3)
    samples = correlated_samples(sampler, 100_000)
    assert np.max(np.abs(correlation_matrix_from_samples(samples) - target)) < 0.03
    for k, m in enumerate(marginals):
        assert stats.kstest(samples[:, k], m.cdf).statistic < 0.01
    # Beta pairs need a stronger underlying normal correlation
    assert sampler.C_Q[0, 1] > 0.6


def test_nataf_sampling_is_seed_deterministic():
    sampler = build_nataf_sampler([[1.0, 0.5], [0.5, 1.0]], [_pv("A"), _pv("B")], seed=9)
    assert np.array_equal(correlated_samples(sampler, 500), correlated_samples(sampler, 500))
    assert not np.array_equal(correlated_samples(sampler, 500), correlated_samples(sampler, 500, seed=10))


def test_gaussian_pairs_keep_their_correlation():
    marginals = [gaussian_marginal("a", 0.0, 1.0), gaussian_marginal("b", 2.0, 0.5)]
    target = [[1.0, 0.4], [0.4, 1.0]]
    shortcut, _ = nataf_adjust(target, marginals)
    integrated, _ = nataf_adjust(target, marginals, gaussian_shortcut=False)
    assert shortcut[0, 1] == 0.4
    assert integrated[0, 1] == pytest.approx(0.4, abs=1e-6)


def test_unreachable_correlation_is_reported():
    lognormal = [parametric_marginal(ParametricModel(id=k, bus=1, distribution="lognorm", params={"s": 1.0}))
                 for k in ("a", "b")]
    with pytest.raises(InfeasibleCorrelationError):
        nataf_adjust([[1.0, -0.9], [-0.9, 1.0]], lognormal)


def test_singular_target_is_repaired(caplog):
    marginals = [gaussian_marginal("a", 0.0, 1.0), gaussian_marginal("b", 0.0, 1.0)]
    c_q, repaired = nataf_adjust([[1.0, 1.0], [1.0, 1.0]], marginals)
    assert repaired
    assert np.linalg.eigvalsh(c_q).min() > 0
    assert "repairing" in caplog.text


def test_standard_normals_do_not_depend_on_draw_count():
    long = standard_normals(7, (1, 0), 1000, 2)
    short = standard_normals(7, (1, 0), 300, 2)
    assert np.array_equal(long[:300], short)
    assert not np.array_equal(standard_normals(7, (1, 1), 300, 2), short)


def test_distribution_without_closed_form_uses_seeded_draws():
    uniform = parametric_marginal(ParametricModel(id="u", bus=1, distribution="uniform",
                                                  params={"loc": 0.0, "scale": 1.0}))
    c = marginal_cumulants(uniform, 4, seed=1, stream=(0, 0, 0), sample_size=200_000)
    assert c.mean == pytest.approx(0.5, abs=0.01)
    assert c.variance == pytest.approx(1 / 12, rel=0.02)
    assert c.gamma(4) == pytest.approx(-1 / 120, rel=0.1)
    again = marginal_cumulants(uniform, 4, seed=1, stream=(0, 0, 0), sample_size=200_000)
    assert np.array_equal(c.values, again.values)
