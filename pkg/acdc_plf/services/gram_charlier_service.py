"""
Gram-Charlier Type-A reconstruction of PDF and CDF curves from cumulants
"""
import logging
from typing import Dict, Optional, Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermeval
from scipy import stats

from acdc_plf.config import settings
from acdc_plf.exceptions import DegenerateVariableError, ExtrapolationRefusedError, InvalidArgumentError
from acdc_plf.models.results import DistributionCurve
from acdc_plf.models.stochastic import CumulantSet

logger = logging.getLogger(__name__)

_FACTORIALS = np.array([1, 1, 2, 6, 24, 120, 720, 5040, 40320], dtype=float)


def hermite(n: int, x):
    """Probabilists' Hermite polynomial He_n"""
    if n < 0:
        raise InvalidArgumentError(f"Hermite order must be non-negative, got {n}")
    coeffs = np.zeros(n + 1)
    coeffs[n] = 1.0
    return hermeval(x, coeffs)


def normalized_cumulants(c: CumulantSet) -> np.ndarray:
    """g_3..g_K"""
    if c.variance <= 0:
        raise DegenerateVariableError("normalized cumulants need a positive variance")
    v = np.arange(3, c.order + 1)
    return c.values[2:] / c.variance ** (v / 2.0)


def series_coefficients(g: Sequence[float]) -> np.ndarray:
    """Coefficients c_0..c_8 of He_k in the density bracket"""
    gg = np.zeros(6)
    g = np.asarray(g, dtype=float)[:6]
    gg[:g.size] = g
    g3, g4, g5, g6, g7, g8 = gg
    c = np.zeros(9)
    c[0] = 1.0
    c[3] = g3
    c[4] = g4
    c[5] = g5
    c[6] = g6 + 10.0 * g3 ** 2
    c[7] = g7 + 35.0 * g3 * g4
    c[8] = g8 + 56.0 * g3 * g5 + 35.0 * g4 ** 2
    c[3:] /= _FACTORIALS[3:]
    return c


def _standardize(mu: float, sigma: float, x) -> np.ndarray:
    if not sigma > 0:
        raise DegenerateVariableError(f"series needs a positive standard deviation, got {sigma}")
    return (np.asarray(x, dtype=float) - mu) / sigma


def pdf_series(g, mu: float, sigma: float, x_grid, clamp: bool = True) -> np.ndarray:
    xs = _standardize(mu, sigma, x_grid)
    f = stats.norm.pdf(xs) * hermeval(xs, series_coefficients(g)) / sigma
    return np.maximum(f, 0.0) if clamp else f


def cdf_series(g, mu: float, sigma: float, x_grid, clamp: bool = True) -> np.ndarray:
    """Term-wise integral of pdf_series: Phi - phi * sum c_k He_{k-1}"""
    xs = _standardize(mu, sigma, x_grid)
    lowered = series_coefficients(g)[1:]
    big_f = stats.norm.cdf(xs) - stats.norm.pdf(xs) * hermeval(xs, lowered)
    if clamp:
        big_f = np.maximum.accumulate(np.clip(big_f, 0.0, 1.0))
    return big_f


def _point_mass_curve(variable: str, mu: float, points: int) -> DistributionCurve:
    width = 1e-6 * max(1.0, abs(mu))
    x = mu + np.linspace(-width, width, points)
    return DistributionCurve(
        variable=variable,
        x=x,
        pdf=np.zeros(points),
        cdf=(x >= mu).astype(float),
        mean=mu,
        std=0.0,
        degenerate=True,
    )


def reconstruct(variable: str, cumulants: CumulantSet, points: int = settings.grid_points,
                span: float = settings.grid_sigma_span) -> DistributionCurve:
    """PDF/CDF curve over mu +- span*sigma; a point mass when sigma vanishes"""
    mu, sigma = cumulants.mean, cumulants.std
    if sigma <= settings.degenerate_std_tol * max(1.0, abs(mu)):
        return _point_mass_curve(variable, mu, points)

    g = normalized_cumulants(cumulants)
    x = mu + sigma * np.linspace(-span, span, points)
    raw_pdf = pdf_series(g, mu, sigma, x, clamp=False)
    raw_cdf = cdf_series(g, mu, sigma, x, clamp=False)
    pdf = np.maximum(raw_pdf, 0.0)
    cdf = np.maximum.accumulate(np.clip(raw_cdf, 0.0, 1.0))

    notes = []
    if np.any(np.abs(g) > settings.series_warning_limit):
        notes.append("series coefficient above limit")
        logger.warning("%s: normalized cumulant above %.1f, series may be inaccurate",
                       variable, settings.series_warning_limit)
    clamped_pdf = int(np.count_nonzero(raw_pdf < 0))
    clamped_cdf = int(np.count_nonzero(cdf != raw_cdf))
    if clamped_pdf:
        notes.append(f"{clamped_pdf} negative density points clamped")
        logger.warning("%s: clamped %d negative density points", variable, clamped_pdf)
    if not 0.999 <= raw_cdf[-1] <= 1.001:
        notes.append("CDF does not reach 1 at grid end")
        logger.warning("%s: CDF ends at %.6f before clamping", variable, raw_cdf[-1])

    return DistributionCurve(
        variable=variable,
        x=x,
        pdf=pdf,
        cdf=cdf,
        mean=mu,
        std=sigma,
        g=g,
        series=True,
        clamped_pdf=clamped_pdf,
        clamped_cdf=clamped_cdf,
        warnings=notes,
    )


def cdf_at(curve: DistributionCurve, threshold: float) -> float:
    """F(threshold); linear inside the grid, series or step outside it"""
    if curve.degenerate:
        return 1.0 if threshold >= curve.mean else 0.0
    if curve.x[0] <= threshold <= curve.x[-1]:
        return float(np.interp(threshold, curve.x, curve.cdf))
    if curve.series:
        return float(np.clip(cdf_series(curve.g, curve.mean, curve.std, [threshold], clamp=False)[0], 0.0, 1.0))
    raise ExtrapolationRefusedError(
        f"threshold {threshold} outside the grid [{curve.x[0]:.6g}, {curve.x[-1]:.6g}] of {curve.variable}",
        details={"variable": curve.variable, "threshold": threshold},
    )


def band_probabilities(curve: DistributionCurve, thresholds: Optional[Dict[str, float]] = None) -> Dict[str, float]:
    """Over-voltage and low-voltage probabilities read off a CDF"""
    t = {"ov": settings.ov_threshold, "hi": settings.hi_threshold, "lv": settings.lv_threshold}
    t.update(thresholds or {})
    return {
        "ovp": 1.0 - cdf_at(curve, t["ov"]),
        "lvp_hi": 1.0 - cdf_at(curve, t["hi"]),
        "lvp_lo": cdf_at(curve, t["lv"]),
    }
