"""
Gram-Charlier curves, band probabilities and degenerate variables
"""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.integrate import trapezoid

from acdc_plf.exceptions import ExtrapolationRefusedError
from acdc_plf.models.results import DistributionCurve
from acdc_plf.models.stochastic import CumulantSet
from acdc_plf.services.gram_charlier_service import (
    band_probabilities,
    cdf_at,
    cdf_series,
    hermite,
    normalized_cumulants,
    pdf_series,
    reconstruct,
    series_coefficients,
)
from acdc_plf.services.stochastic_service import gaussian_cumulants


def _cumulants(mu, sigma, g):
    values = [mu, sigma ** 2] + [gv * sigma ** v for v, gv in enumerate(g, start=3)]
    return CumulantSet(np.array(values))


def test_hermite_polynomials():
    x = np.linspace(-2, 2, 7)
    assert np.allclose(hermite(3, x), x ** 3 - 3 * x)
    assert np.allclose(hermite(4, x), x ** 4 - 6 * x ** 2 + 3)


def test_series_coefficients_include_cross_terms():
    c = series_coefficients([0.2, 0.1])
    assert c[3] == pytest.approx(0.2 / 6)
    assert c[6] == pytest.approx(10 * 0.04 / 720)
    assert c[7] == pytest.approx(35 * 0.02 / 5040)
    assert c[8] == pytest.approx(35 * 0.01 / 40320)


def test_gaussian_input_gives_normal_curves():
    curve = reconstruct("U:1", gaussian_cumulants(1.0, 0.02, 8), points=257)
    assert curve.series and not curve.degenerate
    assert np.max(np.abs(curve.pdf - stats.norm.pdf(curve.x, 1.0, 0.02))) < 1e-12 * curve.pdf.max()
    assert np.max(np.abs(curve.cdf - stats.norm.cdf(curve.x, 1.0, 0.02))) < 1e-12
    assert curve.warnings == []


@given(st.lists(st.floats(-0.3, 0.3), min_size=6, max_size=6), st.floats(-1.0, 1.0))
@settings(max_examples=40, deadline=None)
def test_cdf_derivative_is_pdf(g, x):
    mu, sigma, h = 0.5, 0.1, 1e-6
    slope = (cdf_series(g, mu, sigma, [x * sigma + mu + h], clamp=False)
             - cdf_series(g, mu, sigma, [x * sigma + mu - h], clamp=False)) / (2 * h)
    assert slope[0] == pytest.approx(pdf_series(g, mu, sigma, [x * sigma + mu], clamp=False)[0], abs=1e-6)


def test_moments_are_recovered():
    c = _cumulants(0.98, 0.015, [0.3, 0.2])
    curve = reconstruct("U:5", c, points=2049)
    mean = trapezoid(curve.x * curve.pdf, curve.x)
    var = trapezoid((curve.x - mean) ** 2 * curve.pdf, curve.x)
    assert mean == pytest.approx(0.98, rel=0.005)
    assert np.sqrt(var) == pytest.approx(0.015, rel=0.005)
    assert np.allclose(curve.g, [0.3, 0.2])


def test_normalized_cumulants():
    c = _cumulants(1.0, 0.5, [0.4, -0.1, 0.05])
    assert np.allclose(normalized_cumulants(c), [0.4, -0.1, 0.05])


def test_cdf_is_monotone_after_clamping():
    curve = reconstruct("P:1-2", _cumulants(0.0, 1.0, [2.5, 3.0]), points=513)
    assert np.all(np.diff(curve.cdf) >= 0)
    assert curve.cdf.min() >= 0 and curve.cdf.max() <= 1
    assert np.all(curve.pdf >= 0)


def test_large_coefficients_are_flagged(caplog):
    curve = reconstruct("P:1-2", _cumulants(0.0, 1.0, [2.5, 3.0]), points=513)
    assert "series coefficient above limit" in curve.warnings
    assert curve.clamped_pdf > 0
    assert "series may be inaccurate" in caplog.text


@pytest.mark.parametrize("mu", [0.0, 1.0, -250.0])
def test_zero_variance_gives_point_mass(mu):
    curve = reconstruct("Udc:1", CumulantSet(np.array([mu, 0.0, 0.0, 0.0])), points=65)
    assert curve.degenerate and curve.std == 0.0
    assert curve.x.size == 65
    assert np.all(curve.pdf == 0)
    assert cdf_at(curve, mu - 1.0) == 0.0
    assert cdf_at(curve, mu) == 1.0


def test_band_probabilities_of_a_normal_voltage():
    curve = reconstruct("U:12", gaussian_cumulants(1.0, 0.03, 4))
    bands = band_probabilities(curve)
    assert bands["ovp"] == pytest.approx(stats.norm.sf(0.05 / 0.03), abs=1e-4)
    assert bands["lvp_hi"] == pytest.approx(stats.norm.sf(0.1 / 0.03), abs=1e-4)
    assert bands["lvp_lo"] == pytest.approx(stats.norm.cdf(-0.1 / 0.03), abs=1e-4)


def test_series_curves_are_evaluated_beyond_their_grid():
    curve = reconstruct("U:3", gaussian_cumulants(1.0, 0.001, 4))
    assert cdf_at(curve, 1.1) == pytest.approx(1.0)
    assert cdf_at(curve, 0.9) == pytest.approx(0.0)


def test_tabulated_curves_refuse_extrapolation():
    x = np.linspace(0.95, 1.05, 11)
    curve = DistributionCurve(variable="U:3", x=x, pdf=np.ones(11), cdf=np.linspace(0, 1, 11), mean=1.0, std=0.03)
    assert cdf_at(curve, 1.0) == pytest.approx(0.5)
    with pytest.raises(ExtrapolationRefusedError):
        cdf_at(curve, 1.1)


def test_band_probabilities_settle_as_the_grid_is_refined():
    c = _cumulants(1.02, 0.03, [0.3, 0.1])
    fine = band_probabilities(reconstruct("U:7", c, 2049))
    for points, tol in ((129, 1e-3), (513, 1e-4)):
        coarse = band_probabilities(reconstruct("U:7", c, points))
        for key in fine:
            assert coarse[key] == pytest.approx(fine[key], abs=tol)
    exact = 1.0 - cdf_series(normalized_cumulants(c), 1.02, 0.03, [1.05])[0]
    assert fine["ovp"] == pytest.approx(exact, abs=1e-5)
