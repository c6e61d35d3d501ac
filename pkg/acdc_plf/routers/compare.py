"""
PLF-CM against the Monte Carlo oracle on shared curve grids
"""
import logging
from typing import Dict

from acdc_plf.models.grid import NetworkCase
from acdc_plf.models.options import RunConfig
from acdc_plf.models.stochastic import StochasticSpec
from acdc_plf.services.mcs_service import McsService
from acdc_plf.services.metrics_service import compare
from acdc_plf.services.plf_service import PlfService, pipeline_stage
from acdc_plf.services.report_service import ReportService, cm_tables, mcs_tables, metrics_tables

logger = logging.getLogger(__name__)

plf_service = PlfService()
mcs_service = McsService()


def run(config: RunConfig, case: NetworkCase, spec: StochasticSpec, report: ReportService,
        timings: Dict[str, float]) -> None:
    plf = plf_service.run_plf_cm(case, spec, config.plf_options())
    timings.update({f"cm_{k}": v for k, v in plf.timings.items()})

    grids = {curve.variable: curve.x for curve in plf.curves}
    mcs = mcs_service.run_mcs(case, spec, config.mcs_options(), grids=grids)
    timings["mcs_total"] = mcs.wall_time

    with pipeline_stage("metrics", timings):
        metrics = compare(plf, mcs)

    for c in metrics.classes:
        logger.info("%-5s eps_mu max %s, eps_sigma max %s, ARMS mean %s, TIC %s", c.var_class,
                    _fmt(c.eps_mu_max), _fmt(c.eps_sigma_max), _fmt(c.arms_mean), _fmt(c.tic))

    with pipeline_stage("report", timings):
        report.write_tables({**cm_tables(plf), **mcs_tables(mcs), **metrics_tables(metrics)}, config.method)


def _fmt(value) -> str:
    return "n/a" if value is None else f"{value:.3e}"
