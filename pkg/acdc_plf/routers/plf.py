"""
Cumulant-method probabilistic load flow
"""
from typing import Dict

from acdc_plf.models.grid import NetworkCase
from acdc_plf.models.options import RunConfig
from acdc_plf.models.stochastic import StochasticSpec
from acdc_plf.services.plf_service import PlfService, pipeline_stage
from acdc_plf.services.report_service import ReportService, cm_tables

plf_service = PlfService()


def run(config: RunConfig, case: NetworkCase, spec: StochasticSpec, report: ReportService,
        timings: Dict[str, float]) -> None:
    result = plf_service.run_plf_cm(case, spec, config.plf_options())
    timings.update(result.timings)
    with pipeline_stage("report", timings):
        report.write_tables(cm_tables(result), config.method)
