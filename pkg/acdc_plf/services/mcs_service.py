"""
Seed-deterministic Monte Carlo oracle
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Optional

import numpy as np

from acdc_plf.config import settings
from acdc_plf.exceptions import (
    ConverterOperatingPointError,
    JacobianFactorizationError,
    OracleUnreliableError,
    PowerFlowDivergedError,
)
from acdc_plf.models.grid import NetworkCase
from acdc_plf.models.options import McsOptions
from acdc_plf.models.results import DistributionCurve, McsResult
from acdc_plf.models.stochastic import StochasticSpec
from acdc_plf.services.injection_service import MCS_STREAM, build_injection_map, sample_members, schedules
from acdc_plf.services.network_service import build_monitor_set, compile_network
from acdc_plf.services.plf_service import pipeline_stage
from acdc_plf.services.solver_service import solve_power_flow

logger = logging.getLogger(__name__)

_SOLVE_FAILURES = (PowerFlowDivergedError, JacobianFactorizationError, ConverterOperatingPointError)


def ecdf(sorted_samples: np.ndarray, x) -> np.ndarray:
    """Right-continuous empirical CDF"""
    return np.searchsorted(sorted_samples, x, side="right") / sorted_samples.size


def histogram_pdf(samples: np.ndarray, x: np.ndarray, bins: int = settings.mcs_histogram_bins) -> np.ndarray:
    """Histogram density over the grid range, interpolated from bin centers onto the grid"""
    counts, edges = np.histogram(samples, bins=bins, range=(x[0], x[-1]))
    density = counts / (samples.size * np.diff(edges))
    centers = 0.5 * (edges[:-1] + edges[1:])
    return np.interp(x, np.concatenate([[x[0]], centers, [x[-1]]]), np.concatenate([[0.0], density, [0.0]]))


def empirical_curve(variable: str, samples: np.ndarray, x: Optional[np.ndarray] = None,
                    points: int = settings.grid_points, span: float = settings.grid_sigma_span,
                    bins: int = settings.mcs_histogram_bins) -> DistributionCurve:
    data = np.sort(samples)
    mean = float(data.mean())
    std = float(data.std(ddof=1)) if data.size > 1 else 0.0
    degenerate = std <= settings.degenerate_std_tol * max(1.0, abs(mean))
    if x is None:
        half = 1e-6 * max(1.0, abs(mean)) if degenerate else span * std
        x = mean + np.linspace(-half, half, points)
    pdf = np.zeros(x.size) if degenerate else histogram_pdf(data, x, bins)
    return DistributionCurve(variable=variable, x=x, pdf=pdf, cdf=ecdf(data, x), mean=mean, std=std,
                             degenerate=degenerate)


def empirical_bands(samples: np.ndarray) -> Dict[str, float]:
    return {
        "ovp": float(np.mean(samples > settings.ov_threshold)),
        "lvp_hi": float(np.mean(samples > settings.hi_threshold)),
        "lvp_lo": float(np.mean(samples < settings.lv_threshold)),
    }


class McsService:
    """One deterministic solve per joint injection sample"""

    def __init__(self, options: Optional[McsOptions] = None):
        self.options = options or McsOptions()

    def run_mcs(self, case: NetworkCase, spec: StochasticSpec, options: Optional[McsOptions] = None,
                grids: Optional[Dict[str, np.ndarray]] = None) -> McsResult:
        opts = options or self.options
        timings: Dict[str, float] = {}
        start = time.perf_counter()

        with pipeline_stage("injections", timings):
            net = compile_network(case)
            imap = build_injection_map(case, spec, net)
            monitors = build_monitor_set(net, opts.monitor)

        with pipeline_stage("base_solve", timings):
            base = solve_power_flow(net.with_schedule(imap.expected), opts.solver)

        with pipeline_stage("sampling", timings):
            draws = sample_members(imap, opts.samples, opts.seed, MCS_STREAM)
            w = schedules(imap, draws)

        chunk_size = settings.sample_chunk_size
        chunks = [(s, min(s + chunk_size, opts.samples)) for s in range(0, opts.samples, chunk_size)]

        def solve_chunk(bounds):
            lo, hi = bounds
            rows = np.full((hi - lo, len(monitors)), np.nan)
            for i in range(lo, hi):
                try:
                    solution = solve_power_flow(net.with_schedule(w[i]), opts.solver, initial=base.state)
                except _SOLVE_FAILURES as e:
                    logger.debug("Sample %d failed: %s", i, e)
                    continue
                rows[i - lo] = monitors.evaluate(net, solution.state)
            return rows

        with pipeline_stage("mcs_solve", timings):
            results = []
            with ThreadPoolExecutor(max_workers=opts.workers) as pool:
                for k, rows in enumerate(pool.map(solve_chunk, chunks)):
                    results.append(rows)
                    if (k + 1) % max(1, len(chunks) // 10) == 0 or k + 1 == len(chunks):
                        logger.info("MCS %s: %d/%d samples solved", case.name, chunks[k][1], opts.samples)
            values = np.vstack(results) if results else np.zeros((0, len(monitors)))

        failed = ~np.all(np.isfinite(values), axis=1)
        n_failed = int(failed.sum())
        if n_failed > opts.failed_limit * opts.samples or n_failed == opts.samples:
            raise OracleUnreliableError(
                f"{n_failed} of {opts.samples} sample solves failed (limit {opts.failed_limit:.0%})",
                stage="mcs_solve",
                details={"failed": n_failed, "samples": opts.samples},
            )
        if n_failed:
            logger.warning("%d of %d sample solves failed and were excluded", n_failed, opts.samples)
        ok = values[~failed]

        with pipeline_stage("metrics", timings):
            curves = [
                empirical_curve(name, ok[:, j], None if grids is None else grids.get(name),
                                opts.grid_points, opts.grid_span, opts.bins)
                for j, name in enumerate(monitors.names)
            ]
            bands = {name: empirical_bands(ok[:, j])
                     for j, (name, cls) in enumerate(zip(monitors.names, monitors.classes)) if cls == "U"}

        wall = time.perf_counter() - start
        logger.info("MCS on %s: %d samples in %.2f s", case.name, opts.samples, wall)
        return McsResult(
            case_name=case.name,
            scenario=case.scenario,
            variables=list(monitors.names),
            classes=list(monitors.classes),
            samples=ok,
            means=np.array([c.mean for c in curves]),
            stds=np.array([c.std for c in curves]),
            curves=curves,
            bands=bands,
            n_samples=opts.samples,
            n_failed=n_failed,
            seed=opts.seed,
            wall_time=wall,
            options=opts.model_dump(mode="json"),
        )
