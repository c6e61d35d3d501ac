"""
Accuracy metrics of the cumulant method against the Monte Carlo oracle
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from acdc_plf.config import settings
from acdc_plf.exceptions import GridMismatchError, UndefinedBaselineError
from acdc_plf.models.results import (
    ClassMetrics,
    DistributionCurve,
    McsResult,
    MetricsReport,
    PlfResult,
    VariableMetrics,
)
from acdc_plf.services.mcs_service import ecdf

logger = logging.getLogger(__name__)

CLASS_ORDER = ("U", "P", "Q", "u_dc", "P_dc")


def relative_error(cm_value: float, mcs_value: float) -> float:
    """Percent deviation from the oracle value"""
    if mcs_value == 0:
        raise UndefinedBaselineError("relative error undefined for a zero baseline")
    return abs(cm_value - mcs_value) / abs(mcs_value) * 100.0


def _paired(a: Sequence[float], b: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise GridMismatchError(f"curves must share one non-empty grid, got {a.shape} and {b.shape}")
    return a, b


def arms(cdf_cm: Sequence[float], cdf_mcs: Sequence[float]) -> float:
    """Average root-mean-square CDF deviation in percent (divisor N)"""
    a, b = _paired(cdf_cm, cdf_mcs)
    return float(np.sqrt(np.sum((a - b) ** 2)) / a.size * 100.0)


def tic(pdf_cm: Sequence[float], pdf_mcs: Sequence[float]) -> float:
    """Theil inequality coefficient of two PDFs, in [0, 1]"""
    a, b = _paired(pdf_cm, pdf_mcs)
    n = a.size
    denominator = np.sqrt(np.sum(a ** 2) / n) + np.sqrt(np.sum(b ** 2) / n)
    if denominator == 0:
        return 0.0
    return float(np.sqrt(np.sum((a - b) ** 2) / n) / denominator)


def union_grid(cm: DistributionCurve, mcs: DistributionCurve, mcs_samples: np.ndarray):
    """Both curves on the union of their grids; the oracle CDF is exact there"""
    x = np.union1d(cm.x, mcs.x)
    cdf_cm = np.interp(x, cm.x, cm.cdf, left=0.0, right=1.0)
    pdf_cm = np.interp(x, cm.x, cm.pdf, left=0.0, right=0.0)
    cdf_mcs = ecdf(np.sort(mcs_samples), x)
    pdf_mcs = np.interp(x, mcs.x, mcs.pdf, left=0.0, right=0.0)
    return x, cdf_cm, pdf_cm, cdf_mcs, pdf_mcs


def _stats(values: List[Optional[float]]) -> Tuple[Optional[float], Optional[float]]:
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    return float(np.mean(vals)), float(np.max(vals))


def compare(plf: PlfResult, mcs: McsResult, std_floor: float = settings.metric_std_floor) -> MetricsReport:
    """
    Per-variable and per-class errors; distribution metrics are skipped for
    variables the oracle sees as deterministic.
    """
    common = [name for name in plf.variables if name in mcs.variables]
    if not common:
        raise GridMismatchError("the two results share no monitored variable")

    rows: List[VariableMetrics] = []
    for name in common:
        i, j = plf.index(name), mcs.index(name)
        cm_curve, mcs_curve = plf.curves[i], mcs.curves[j]
        notes = []
        try:
            eps_mu = relative_error(plf.cumulants[i].mean, mcs.means[j])
        except UndefinedBaselineError:
            eps_mu = None
            notes.append("undefined baseline")
        eps_sigma = a = t = None
        if mcs.stds[j] < std_floor:
            notes.append("deterministic")
        else:
            eps_sigma = relative_error(plf.cumulants[i].std, mcs.stds[j])
            _, cdf_cm, pdf_cm, cdf_mcs, pdf_mcs = union_grid(cm_curve, mcs_curve, mcs.samples[:, j])
            a = arms(cdf_cm, cdf_mcs)
            t = tic(pdf_cm, pdf_mcs)
        rows.append(VariableMetrics(name, plf.classes[i], eps_mu, eps_sigma, a, t, "; ".join(notes)))

    classes = []
    for var_class in CLASS_ORDER:
        members = [r for r in rows if r.var_class == var_class]
        if not members:
            continue
        mu_mean, mu_max = _stats([r.eps_mu for r in members])
        sigma_mean, sigma_max = _stats([r.eps_sigma for r in members])
        arms_mean, arms_max = _stats([r.arms for r in members])
        _, tic_max = _stats([r.tic for r in members])
        classes.append(ClassMetrics(var_class, len(members), mu_mean, mu_max, sigma_mean, sigma_max,
                                    arms_mean, arms_max, tic_max))

    bands: Dict[str, Dict[str, float]] = {}
    for name, cm_bands in plf.bands.items():
        if name in mcs.bands:
            bands[name] = {**{f"{k}_cm": v for k, v in cm_bands.items()},
                           **{f"{k}_mcs": v for k, v in mcs.bands[name].items()}}

    cm_time = plf.total_time
    logger.info("Compared %d variables; CM/MCS time ratio %.4f", len(rows),
                cm_time / mcs.wall_time if mcs.wall_time else float("nan"))
    return MetricsReport(variables=rows, classes=classes, bands=bands, cm_time=cm_time, mcs_time=mcs.wall_time)
