"""
Deterministic AC/DC power flow at the expected injections
"""
import logging
from typing import Dict

from acdc_plf.models.grid import NetworkCase
from acdc_plf.models.options import RunConfig
from acdc_plf.models.stochastic import StochasticSpec
from acdc_plf.services.injection_service import build_injection_map
from acdc_plf.services.network_service import compile_network
from acdc_plf.services.plf_service import pipeline_stage
from acdc_plf.services.report_service import ReportService, flow_tables
from acdc_plf.services.solver_service import solve_power_flow

logger = logging.getLogger(__name__)


def run(config: RunConfig, case: NetworkCase, spec: StochasticSpec, report: ReportService,
        timings: Dict[str, float]) -> None:
    """
    Solve the case once and write the bus, branch, converter and iteration tables

    Random injections enter at their means, so the operating point matches the
    base point of the probabilistic methods.
    """
    with pipeline_stage("injections", timings):
        net = compile_network(case)
        expected = build_injection_map(case, spec, net).expected

    with pipeline_stage("base_solve", timings):
        solution = solve_power_flow(net.with_schedule(expected), config.plf_options().solver)

    logger.info("Flow on %s converged in %d iterations, max mismatch %.3e", case.name,
                solution.iterations, solution.max_mismatch)
    logger.info("Losses: AC %.6f, DC %.6f, converters %.6f p.u.", solution.ac_loss, solution.dc_loss,
                solution.converter_loss)

    with pipeline_stage("report", timings):
        report.write_tables(flow_tables(solution), config.method)
