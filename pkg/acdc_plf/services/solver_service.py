"""
Unified Newton-Raphson power flow for AC grids with VSC-connected DC grids
"""
import logging
import warnings
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.sparse.linalg import splu

from acdc_plf.exceptions import JacobianFactorizationError, PowerFlowDivergedError
from acdc_plf.models.grid import NetworkCase
from acdc_plf.models.solver import (
    BranchFlow,
    ConverterResult,
    IterationRecord,
    JacobianMatrix,
    PowerFlowSolution,
    SensitivityModel,
    SolverOptions,
    StateVector,
)
from acdc_plf.services.grid_service import converter_state
from acdc_plf.services.network_service import (
    CompiledNetwork,
    Evaluation,
    MonitorSet,
    ac_line_flows,
    build_monitor_set,
    check_state,
    compile_network,
    correction_matrix,
    correction_vector,
    dc_line_flows,
    evaluate,
    full_mismatch,
    initial_state,
)

logger = logging.getLogger(__name__)

NetworkLike = Union[NetworkCase, CompiledNetwork]


def _compiled(network: NetworkLike) -> CompiledNetwork:
    return network if isinstance(network, CompiledNetwork) else compile_network(network)


class LinearSystem:
    """LU factorization of the correction matrix, dense or sparse by size"""

    def __init__(self, matrix, dense_limit: int):
        self.size = matrix.shape[0]
        self.dense = self.size <= dense_limit
        if self.size == 0:
            return
        if self.dense:
            a = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
            if not np.all(np.isfinite(a)):
                raise JacobianFactorizationError("Jacobian contains non-finite entries")
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", LinAlgWarning)
                self._lu = lu_factor(a)
            pivots = np.abs(np.diag(self._lu[0]))
            if pivots.min() <= np.finfo(float).eps * max(np.abs(a).max(), 1.0) * self.size:
                cond = float(np.linalg.cond(a))
                raise JacobianFactorizationError(f"Jacobian is singular (condition estimate {cond:.3e})", condition=cond)
        else:
            try:
                self._splu = splu(sp.csc_matrix(matrix))
            except RuntimeError as e:
                raise JacobianFactorizationError(f"sparse factorization failed: {e}")

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if self.size == 0:
            return np.zeros_like(rhs)
        if self.dense:
            return lu_solve(self._lu, rhs)
        return self._splu.solve(rhs)


def _block_layout(net: CompiledNetwork):
    a, b, c = len(net.theta_idx), len(net.u_idx), len(net.ud_idx)
    th, u, d = slice(0, a), slice(a, a + b), slice(a + b, a + b + c)
    blocks = {
        "H": (th, th), "N+N_V": (th, u), "M_P": (th, d),
        "J": (u, th), "L": (u, u), "M_Q": (u, d),
        "R_delta": (d, th), "R_V": (d, u), "X": (d, d),
    }
    labels = ([f"theta:{net.ac_ids[i]}" for i in net.theta_idx] + [f"U:{net.ac_ids[i]}" for i in net.u_idx]
              + [f"Udc:{net.dc_ids[i]}" for i in net.ud_idx])
    return blocks, labels


def _jacobian_from(net: CompiledNetwork, ev: Evaluation) -> JacobianMatrix:
    conv = correction_matrix(net, ev.grad_z)
    full = (ev.dnet + conv).tocsr()
    sel = net.sel
    blocks, labels = _block_layout(net)
    return JacobianMatrix(
        matrix=full[sel][:, sel],
        converter_part=conv[sel][:, sel],
        blocks=blocks,
        labels=labels,
    )


def mismatch_vector(state: StateVector, network: NetworkLike) -> np.ndarray:
    """Scheduled minus converter-corrected minus calculated injections on the unknown rows"""
    net = _compiled(network)
    check_state(net, state)
    return full_mismatch(net, evaluate(net, state, derivatives=False))[net.sel]


def assemble_jacobian(state: StateVector, network: NetworkLike) -> JacobianMatrix:
    """Minus the derivative of mismatch_vector w.r.t. (angle, ln U, ln Ud) of the unknowns"""
    net = _compiled(network)
    check_state(net, state)
    return _jacobian_from(net, evaluate(net, state))


def _apply_step(net: CompiledNetwork, state: StateVector, dx: np.ndarray) -> None:
    a, b = len(net.theta_idx), len(net.u_idx)
    state.theta[net.theta_idx] += dx[:a]
    state.u[net.u_idx] *= 1.0 + dx[a:a + b]
    state.u_dc[net.ud_idx] *= 1.0 + dx[a + b:]


def _converter_results(net: CompiledNetwork, state: StateVector, ev: Evaluation) -> List[ConverterResult]:
    results = []
    for k, conv_id in enumerate(net.conv_ids):
        i, d, mode = net.conv_pcc[k], net.conv_dc[k], net.conv_modes[k]
        p, q, pdc = float(ev.p_s[k]), float(ev.q_s[k]), float(ev.p_dc[k])
        inner = converter_state(state.u[i], state.theta[i], p, q, net.conv_z[k], state.u_dc[d])
        i_sq = (p ** 2 + q ** 2) / state.u[i] ** 2
        droop_residual = None
        if mode.is_droop:
            droop_residual = float(state.u_dc[d] - net.conv_u_ref[k] + net.conv_k[k] * (pdc - net.conv_pdc_ref[k]))
        results.append(ConverterResult(
            id=conv_id,
            control=mode.value,
            pcc_bus=net.ac_ids[i],
            dc_bus=net.dc_ids[d],
            p_s=p,
            q_s=q,
            p_dc=pdc,
            loss_p=p - pdc,
            loss_q=float(i_sq * net.conv_z[k].imag),
            u_c=inner.u_c,
            delta_c=inner.delta_c,
            modulation_index=inner.modulation_index,
            droop_residual=droop_residual,
        ))
    return results


def _flows(net: CompiledNetwork, state: StateVector) -> Tuple[List[BranchFlow], List[BranchFlow]]:
    s_from, s_to = ac_line_flows(net, state)
    ac = [
        BranchFlow("ac", line_id, net.ac_ids[f], net.ac_ids[t], float(sf.real), float(st.real),
                   float(sf.imag), float(st.imag))
        for line_id, f, t, sf, st in zip(net.ac_line_ids, net.ac_from, net.ac_to, s_from, s_to)
    ]
    p_from, p_to = dc_line_flows(net, state)
    dc = [
        BranchFlow("dc", line_id, net.dc_ids[f], net.dc_ids[t], float(pf), float(pt))
        for line_id, f, t, pf, pt in zip(net.dc_line_ids, net.dc_from, net.dc_to, p_from, p_to)
    ]
    return ac, dc


def solve_power_flow(case: NetworkLike, opts: Optional[SolverOptions] = None,
                     initial: Optional[StateVector] = None) -> PowerFlowSolution:
    """
    Newton-Raphson iterations on the coupled AC/DC mismatch equations.

    Accepts a NetworkCase or an already compiled network (reused by the Monte
    Carlo oracle); `initial` overrides the flat start.
    """
    opts = opts or SolverOptions()
    net = _compiled(case)
    state = initial.copy() if initial is not None else initial_state(net, opts.flat_start)
    check_state(net, state)

    log: List[IterationRecord] = []
    previous = None
    for iteration in range(opts.max_iterations + 1):
        ev = evaluate(net, state)
        f = full_mismatch(net, ev)[net.sel]
        err = float(np.max(np.abs(f))) if f.size else 0.0
        ratio = err / previous ** 2 if previous is not None and 0 < previous < 1e-3 else None
        log.append(IterationRecord(iteration, err, ratio))
        logger.debug("%s iteration %d: max mismatch %.3e", net.name, iteration, err)

        if not np.isfinite(err):
            raise PowerFlowDivergedError(f"mismatch became non-finite at iteration {iteration}",
                                         [r.max_mismatch for r in log])
        if err < opts.tolerance:
            break
        if iteration == opts.max_iterations:
            raise PowerFlowDivergedError(
                f"no convergence in {opts.max_iterations} iterations (max mismatch {err:.3e})",
                [r.max_mismatch for r in log],
            )
        jac = _jacobian_from(net, ev)
        dx = LinearSystem(jac.matrix, opts.dense_limit).solve(f)
        _apply_step(net, state, dx)
        if np.any(state.u <= 0) or np.any(state.u_dc <= 0):
            raise PowerFlowDivergedError(f"voltage collapsed to a non-positive value at iteration {iteration}",
                                         [r.max_mismatch for r in log])
        previous = err

    ac_flows, dc_flows = _flows(net, state)
    return PowerFlowSolution(
        case_name=net.name,
        state=state,
        p_calc=ev.s_calc.real.copy(),
        q_calc=ev.s_calc.imag.copy(),
        pd_calc=ev.pd_calc.copy(),
        converters=_converter_results(net, state, ev),
        ac_flows=ac_flows,
        dc_flows=dc_flows,
        jacobian=_jacobian_from(net, ev),
        iteration_log=log,
        converged=True,
        network=net,
    )


def branch_flows(solution: PowerFlowSolution, case: Optional[NetworkLike] = None) -> List[BranchFlow]:
    """AC line P/Q at both ends and DC line P at both ends"""
    net = solution.network if case is None else _compiled(case)
    ac, dc = _flows(net, solution.state)
    return ac + dc


def bus_injections(solution: PowerFlowSolution) -> np.ndarray:
    """Actual net injection of every bus in W layout (slack output included)"""
    net = solution.network
    n = net.n_ac
    corr = np.zeros(net.nz)
    for c in solution.converters:
        corr[net.ac_index[c.pcc_bus]] += c.p_s
        corr[n + net.ac_index[c.pcc_bus]] += c.q_s
        corr[2 * n + net.dc_index[c.dc_bus]] -= c.p_dc
    calc = np.concatenate([solution.p_calc, solution.q_calc, solution.pd_calc])
    return calc + corr


def sensitivity_matrices(solution: PowerFlowSolution, case: Optional[NetworkLike] = None,
                         monitored: Union[None, Sequence[str], MonitorSet] = None,
                         dense_limit: Optional[int] = None) -> SensitivityModel:
    """
    Linearize state and monitored variables around a converged solution.

    The converter powers at the base point, taken as injections (P_delta), give
    the offsets X_delta and H_delta. Base state and base values exclude them, so
    base_values + H_delta is the monitored value at the converged point.
    """
    net = solution.network if case is None else _compiled(case)
    state = solution.state
    monitors = monitored if isinstance(monitored, MonitorSet) else build_monitor_set(net, monitored)
    ev = evaluate(net, state)
    jac = _jacobian_from(net, ev)
    limit = SolverOptions().dense_limit if dense_limit is None else dense_limit
    system = LinearSystem(jac.matrix, limit)

    nz, sel = net.nz, net.sel
    dcorr_w = correction_matrix(net, ev.grad_w)
    k_matrix = (sp.identity(nz, format="csr") - dcorr_w).tocsr()[sel, :].toarray()
    s_z = np.zeros((nz, nz))
    if sel.size:
        s_z[sel] = system.solve(k_matrix)

    # converter power seen by the network as injections; nonzero on converter rows only
    p_delta = -correction_vector(net, ev)
    x_z = np.zeros(nz)
    if sel.size:
        x_z[sel] = system.solve(p_delta[sel])

    scale = net.scale(state)
    hz = monitors.jacobian(net, state)
    h_delta = hz @ x_z
    return SensitivityModel(
        state_labels=net.state_labels(),
        injection_labels=net.injection_labels(),
        variables=list(monitors.names),
        variable_classes=list(monitors.classes),
        base_state=np.concatenate([state.theta, state.u, state.u_dc]) - scale * x_z,
        base_values=monitors.evaluate(net, state) - h_delta,
        S_0=scale[:, None] * s_z,
        T_0=hz @ s_z,
        G_0=hz / scale[None, :],
        X_delta=scale * x_z,
        H_delta=h_delta,
        P_delta=p_delta,
    )
