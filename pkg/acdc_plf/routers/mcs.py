"""
Monte Carlo reference distributions
"""
from typing import Dict

from acdc_plf.models.grid import NetworkCase
from acdc_plf.models.options import RunConfig
from acdc_plf.models.stochastic import StochasticSpec
from acdc_plf.services.mcs_service import McsService
from acdc_plf.services.plf_service import pipeline_stage
from acdc_plf.services.report_service import ReportService, mcs_tables

mcs_service = McsService()


def run(config: RunConfig, case: NetworkCase, spec: StochasticSpec, report: ReportService,
        timings: Dict[str, float]) -> None:
    result = mcs_service.run_mcs(case, spec, config.mcs_options())
    timings["mcs_total"] = result.wall_time
    with pipeline_stage("report", timings):
        report.write_tables(mcs_tables(result), config.method)
