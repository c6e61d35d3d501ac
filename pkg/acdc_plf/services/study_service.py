"""
Parameter studies: correlation strength and PV penetration
"""
import fnmatch
import logging
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from acdc_plf.config import settings
from acdc_plf.exceptions import InvalidStochasticSpecError, Violation
from acdc_plf.models.grid import NetworkCase
from acdc_plf.models.options import McsOptions, PlfOptions
from acdc_plf.models.stochastic import StochasticSpec
from acdc_plf.services.mcs_service import McsService
from acdc_plf.services.metrics_service import compare
from acdc_plf.services.plf_service import PlfService
from acdc_plf.services.stochastic_service import scale_pv

logger = logging.getLogger(__name__)


def with_correlation(spec: StochasticSpec, rho: float, group: Optional[str] = None) -> StochasticSpec:
    """Spec whose chosen group has every off-diagonal correlation set to rho"""
    if not spec.correlation_groups:
        raise InvalidStochasticSpecError([Violation("no correlation group", "stochastic", None,
                                                    "the correlation study needs a correlation group")])
    ids = [g.id for g in spec.correlation_groups]
    target = group or ids[0]
    if target not in ids:
        raise InvalidStochasticSpecError([Violation("unknown group", "correlation_group", target,
                                                    f"no correlation group '{target}'")])
    groups = []
    for g in spec.correlation_groups:
        if g.id == target:
            n = len(g.members)
            matrix = np.full((n, n), float(rho))
            np.fill_diagonal(matrix, 1.0)
            g = g.model_copy(update={"matrix": matrix.tolist()})
        groups.append(g)
    return spec.model_copy(update={"correlation_groups": groups})


class StudyService:
    def __init__(self, plf_service: Optional[PlfService] = None, mcs_service: Optional[McsService] = None):
        self.plf_service = plf_service or PlfService()
        self.mcs_service = mcs_service or McsService()

    def correlation_study(self, case: NetworkCase, spec: StochasticSpec,
                          rhos: Sequence[float] = settings.correlation_study_rhos, group: Optional[str] = None,
                          variables: Optional[Sequence[str]] = None,
                          options: Optional[PlfOptions] = None) -> pd.DataFrame:
        """mu, sigma and band probabilities of the chosen variables per correlation level"""
        rows = []
        for rho in rhos:
            result = self.plf_service.run_plf_cm(case, with_correlation(spec, rho, group), options)
            for name, cls, c in zip(result.variables, result.classes, result.cumulants):
                if variables is not None and not any(fnmatch.fnmatchcase(name, p) for p in variables):
                    continue
                if variables is None and cls != "U":
                    continue
                bands = result.bands.get(name, {})
                rows.append({"rho": float(rho), "variable": name, "mean": c.mean, "std": c.std,
                             "ovp": bands.get("ovp"), "lvp_hi": bands.get("lvp_hi"), "lvp_lo": bands.get("lvp_lo")})
            logger.info("Correlation study: rho = %.2f done", rho)
        return pd.DataFrame(rows, columns=["rho", "variable", "mean", "std", "ovp", "lvp_hi", "lvp_lo"])

    def penetration_study(self, case: NetworkCase, spec: StochasticSpec,
                          scales: Sequence[float] = settings.penetration_study_scales,
                          plf_options: Optional[PlfOptions] = None,
                          mcs_options: Optional[McsOptions] = None) -> pd.DataFrame:
        """Per-class accuracy of the cumulant method against the oracle as PV capacity is scaled"""
        rows = []
        for scale in scales:
            scaled = scale_pv(spec, scale)
            plf = self.plf_service.run_plf_cm(case, scaled, plf_options)
            grids = {curve.variable: curve.x for curve in plf.curves}
            mcs = self.mcs_service.run_mcs(case, scaled, mcs_options, grids=grids)
            report = compare(plf, mcs)
            for c in report.classes:
                rows.append({"scale": float(scale), "class": c.var_class, "eps_mu_max": c.eps_mu_max,
                             "eps_sigma_max": c.eps_sigma_max, "arms_mean": c.arms_mean, "arms_max": c.arms_max,
                             "tic": c.tic})
            logger.info("Penetration study: scale %.2f done", scale)
        return pd.DataFrame(rows, columns=["scale", "class", "eps_mu_max", "eps_sigma_max", "arms_mean",
                                           "arms_max", "tic"])
