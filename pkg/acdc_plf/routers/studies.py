"""
Correlation-strength and PV-penetration studies
"""
from typing import Dict

from acdc_plf.models.grid import NetworkCase
from acdc_plf.models.options import RunConfig
from acdc_plf.models.stochastic import StochasticSpec
from acdc_plf.services.plf_service import pipeline_stage
from acdc_plf.services.report_service import ReportService
from acdc_plf.services.study_service import StudyService

study_service = StudyService()


def run_correlation(config: RunConfig, case: NetworkCase, spec: StochasticSpec, report: ReportService,
                    timings: Dict[str, float]) -> None:
    with pipeline_stage("propagation", timings):
        table = study_service.correlation_study(case, spec, config.rhos, variables=config.monitor,
                                                options=config.plf_options())
    with pipeline_stage("report", timings):
        report.write_tables({"correlation_study": table}, config.method)


def run_penetration(config: RunConfig, case: NetworkCase, spec: StochasticSpec, report: ReportService,
                    timings: Dict[str, float]) -> None:
    with pipeline_stage("mcs_solve", timings):
        table = study_service.penetration_study(case, spec, config.scales, config.plf_options(),
                                                config.mcs_options())
    with pipeline_stage("report", timings):
        report.write_tables({"penetration_study": table}, config.method)
