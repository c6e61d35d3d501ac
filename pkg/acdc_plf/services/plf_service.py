"""
Cumulant-method probabilistic load flow
"""
import logging
import time
from contextlib import contextmanager
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from acdc_plf.exceptions import AcDcPlfError, InvalidStochasticSpecError, Violation
from acdc_plf.models.grid import NetworkCase
from acdc_plf.models.options import PlfOptions
from acdc_plf.models.results import InjectionMap, PlfResult
from acdc_plf.models.stochastic import CumulantSet, StochasticSpec
from acdc_plf.services.gram_charlier_service import band_probabilities, reconstruct
from acdc_plf.services.injection_service import (
    CUMULANT_STREAM,
    active_members,
    build_injection_map,
    injection_cumulants,
    is_identity_group,
)
from acdc_plf.services.network_service import compile_network
from acdc_plf.services.solver_service import sensitivity_matrices, solve_power_flow
from acdc_plf.services.stochastic_service import (
    build_nataf_sampler,
    correlated_samples,
    decorrelate,
    decorrelation_transform,
    sample_cumulants,
)

logger = logging.getLogger(__name__)


@contextmanager
def pipeline_stage(name: str, timings: Dict[str, float]):
    """Time a stage and tag errors escaping it with the stage name"""
    start = time.perf_counter()
    try:
        yield
    except AcDcPlfError as e:
        raise e.with_stage(name)
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - start


def rewrite_correlated_injections(s_0: np.ndarray, groups: Sequence[Tuple[Sequence[int], np.ndarray]]) -> np.ndarray:
    """
    Express correlated columns through uncorrelated variables: the columns of
    each group become S[:, group] @ G; every other column is left untouched.
    """
    s_1 = np.array(s_0, dtype=float, copy=True)
    n_cols = s_1.shape[1]
    for columns, g in groups:
        columns = np.asarray(columns, dtype=int)
        if columns.size and (columns.min() < 0 or columns.max() >= n_cols):
            raise InvalidStochasticSpecError(
                [Violation("group column out of range", "correlation_group", None,
                           f"columns {columns.tolist()} outside 0..{n_cols - 1}")])
        s_1[:, columns] = s_0[:, columns] @ np.asarray(g, dtype=float)
    return s_1


def propagate_cumulants(sensitivity: Sequence[float], cumulants: Sequence[CumulantSet], order: int,
                        offset: float = 0.0) -> CumulantSet:
    """gamma_k(out) = sum_r s_r^k gamma_k(in_r); the offset enters order 1 only"""
    s = np.asarray(sensitivity, dtype=float)
    gamma = np.array([c.values[:order] for c in cumulants], dtype=float).reshape(len(s), order)
    out = _propagate(s[None, :], gamma)[0]
    out[0] += offset
    return CumulantSet(out)


def _propagate(s: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Row-wise propagation for a (variables, inputs) sensitivity matrix"""
    order = gamma.shape[1]
    out = np.zeros((s.shape[0], order))
    for k in range(order):
        out[:, k] = (s ** (k + 1)) @ gamma[:, k]
    return out


def _group_inputs(imap: InjectionMap, t_0: np.ndarray, order: int, seed: int,
                  sample_size: int) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Sensitivity columns and cumulants of the decorrelated variables of every correlated group"""
    columns, gammas = [], []
    for gi, group in enumerate(imap.groups):
        if is_identity_group(imap, group):
            continue
        members, matrix = active_members(imap, group)
        marginals = [imap.members[k].marginal for k in members]
        sigma = np.array([m.std for m in marginals])
        mu = np.array([m.mean for m in marginals])
        signs = np.array([imap.members[k].sign for k in members])
        g, b = decorrelation_transform(matrix)

        gamma = np.zeros((len(members), order))
        gamma[:, 1] = 1.0
        if not all(m.is_gaussian for m in marginals):
            sampler = build_nataf_sampler(matrix, marginals, seed, stream=gi)
            z = (correlated_samples(sampler, sample_size, stream=(CUMULANT_STREAM, 1)) - mu) / sigma
            y = decorrelate(b, z.T).T
            for r in range(len(members)):
                gamma[r, 2:] = sample_cumulants(y[:, r], order).values[2:]

        s_group = t_0[:, [imap.members[k].column for k in members]] * (signs * sigma)[None, :]
        s_1 = rewrite_correlated_injections(s_group, [(range(len(members)), g)])
        columns.extend(s_1.T)
        gammas.extend(gamma)
        logger.debug("Group '%s': %d correlated members decorrelated", group.id, len(members))
    return columns, gammas


class PlfService:
    """Base solve, injection cumulants, sensitivities, propagation and reconstruction"""

    def __init__(self, options: Optional[PlfOptions] = None):
        self.options = options or PlfOptions()

    def run_plf_cm(self, case: NetworkCase, spec: StochasticSpec, options: Optional[PlfOptions] = None) -> PlfResult:
        opts = options or self.options
        timings: Dict[str, float] = {}
        order = opts.order

        with pipeline_stage("injections", timings):
            net = compile_network(case)
            imap = build_injection_map(case, spec, net)

        with pipeline_stage("base_solve", timings):
            solution = solve_power_flow(net.with_schedule(imap.expected), opts.solver)
            logger.info("Base point of %s converged in %d iterations", case.name, solution.iterations)

        with pipeline_stage("sensitivity", timings):
            model = sensitivity_matrices(solution, monitored=opts.monitor, dense_limit=opts.solver.dense_limit)

        with pipeline_stage("injections", timings):
            correlated = {k for group in imap.groups if not is_identity_group(imap, group)
                          for k in active_members(imap, group)[0]}
            independent = [k for k in range(len(imap.members)) if k not in correlated]
            per_column = injection_cumulants(imap, independent, order, opts.seed, opts.sample_size)

        with pipeline_stage("propagation", timings):
            columns = [model.T_0[:, col] for col in per_column]
            gammas = [c.centered().values[:order] for c in per_column.values()]
            extra_columns, extra_gammas = _group_inputs(imap, model.T_0, order, opts.seed, opts.sample_size)
            columns += extra_columns
            gammas += extra_gammas
            n_vars = len(model.variables)
            if columns:
                out = _propagate(np.column_stack(columns), np.vstack(gammas))
            else:
                out = np.zeros((n_vars, order))
            out[:, 0] += model.base_values + model.H_delta
            cumulants = [CumulantSet(row) for row in out]

        with pipeline_stage("reconstruction", timings):
            curves = [reconstruct(name, c, opts.grid_points, opts.grid_span)
                      for name, c in zip(model.variables, cumulants)]
            bands = {curve.variable: band_probabilities(curve)
                     for curve, cls in zip(curves, model.variable_classes) if cls == "U"}

        logger.info("PLF-CM on %s: %d variables in %.3f s", case.name, n_vars, sum(timings.values()))
        return PlfResult(
            case_name=case.name,
            scenario=case.scenario,
            variables=list(model.variables),
            classes=list(model.variable_classes),
            base_values=model.base_values + model.H_delta,
            cumulants=cumulants,
            curves=curves,
            bands=bands,
            timings=timings,
            seed=opts.seed,
            options=opts.model_dump(mode="json"),
        )
