"""
Unified Newton-Raphson solve: convergence, Jacobian, balance and linearization
"""
import time

import numpy as np
import pytest

from acdc_plf.exceptions import PowerFlowDivergedError
from acdc_plf.models.grid import ControlMode
from acdc_plf.models.solver import SolverOptions, StateVector
from acdc_plf.services.injection_service import build_injection_map
from acdc_plf.services.network_service import compile_network, correction_vector, evaluate, initial_state
from acdc_plf.services.solver_service import (
    assemble_jacobian,
    branch_flows,
    bus_injections,
    mismatch_vector,
    sensitivity_matrices,
    solve_power_flow,
)
from conftest import FIVE_TERMINAL_SCENARIOS, THREE_TERMINAL_SCENARIOS

TIGHT = SolverOptions(tolerance=1e-11)


def _expected_network(case_service, name, scenario):
    case, spec = case_service.load_case(name, scenario)
    net = compile_network(case)
    return net.with_schedule(build_injection_map(case, spec, net).expected)


def _bundled():
    return ([("three_terminal", s) for s in THREE_TERMINAL_SCENARIOS]
            + [("five_terminal", s) for s in FIVE_TERMINAL_SCENARIOS])


def _shifted(net, state: StateVector, j: int, h: float) -> StateVector:
    """State moved by h along unknown coordinate j of z = (theta, ln U, ln Ud)"""
    out = state.copy()
    k = net.sel[j]
    n = net.n_ac
    if k < n:
        out.theta[k] += h
    elif k < 2 * n:
        out.u[k - n] *= np.exp(h)
    else:
        out.u_dc[k - 2 * n] *= np.exp(h)
    return out


def _finite_difference_jacobian(net, state, h=1e-6):
    cols = []
    for j in range(net.n_unknowns):
        f_plus = mismatch_vector(_shifted(net, state, j, h), net)
        f_minus = mismatch_vector(_shifted(net, state, j, -h), net)
        cols.append(-(f_plus - f_minus) / (2 * h))
    return np.column_stack(cols)


@pytest.mark.parametrize("name, scenario", _bundled())
def test_bundled_scenarios_converge(case_service, name, scenario):
    net = _expected_network(case_service, name, scenario)
    start = time.perf_counter()
    solution = solve_power_flow(net)
    elapsed = time.perf_counter() - start
    assert solution.converged
    assert solution.max_mismatch < 1e-8
    assert solution.iterations <= 20
    assert elapsed < 0.1


def test_all_control_modes_are_exercised(case_service):
    modes = set()
    for name, scenario in _bundled():
        case, _ = case_service.load_case(name, scenario)
        modes |= {c.control for c in case.converters}
    assert modes == set(ControlMode)


def test_quadratic_convergence_is_logged(case_service):
    solution = solve_power_flow(_expected_network(case_service, "three_terminal", "s1"), TIGHT)
    errors = [r.max_mismatch for r in solution.iteration_log]
    assert errors[-1] < 1e-11 < errors[0]
    ratios = [r.ratio for r in solution.iteration_log if r.ratio is not None and r.max_mismatch > 1e-12]
    assert ratios
    assert max(ratios) < 10


@pytest.mark.parametrize("name, scenario", _bundled())
def test_jacobian_matches_finite_differences(case_service, name, scenario):
    net = _expected_network(case_service, name, scenario)
    solved = solve_power_flow(net).state
    for state in (initial_state(net), solved):
        analytic = assemble_jacobian(state, net).dense()
        numeric = _finite_difference_jacobian(net, state)
        scale = np.maximum(np.abs(analytic), 1.0)
        assert np.max(np.abs(analytic - numeric) / scale) < 1e-5


@pytest.mark.parametrize("name, scenario", _bundled())
def test_power_balance_at_solution(case_service, name, scenario):
    net = _expected_network(case_service, name, scenario)
    solution = solve_power_flow(net, TIGHT)
    injections = bus_injections(solution)
    n = net.n_ac
    generation = injections[:n].sum() + injections[2 * n:].sum()
    losses = solution.ac_loss + solution.dc_loss + solution.converter_loss
    assert generation == pytest.approx(losses, abs=1e-8)

    # scheduled rows are met exactly
    rows = net.sel[np.isin(net.sel, np.arange(n))]
    assert np.allclose(injections[rows], net.schedule[rows], atol=1e-9)


@pytest.mark.parametrize("scenario", ["s5", "s6"])
def test_droop_stations_sit_on_their_line(case_service, scenario):
    solution = solve_power_flow(_expected_network(case_service, "three_terminal", scenario), TIGHT)
    droop = [c for c in solution.converters if c.droop_residual is not None]
    assert droop
    assert all(abs(c.droop_residual) < 1e-9 for c in droop)


def test_voltage_controlled_pcc_holds_its_setpoint(case_service):
    case, spec = case_service.load_case("three_terminal", "s3")
    net = compile_network(case)
    solution = solve_power_flow(net.with_schedule(build_injection_map(case, spec, net).expected))
    assert solution.state.u[net.ac_index[7]] == pytest.approx(0.99)


def test_island_converter_supplies_island_load(case_service):
    solution = solve_power_flow(_expected_network(case_service, "three_terminal", "s4"), TIGHT)
    vsc3 = next(c for c in solution.converters if c.id == "VSC3")
    island_loss = next(f.loss for f in solution.ac_flows if f.id == "L13")
    assert -vsc3.p_s == pytest.approx(0.04 + island_loss, abs=1e-9)


@pytest.mark.parametrize("name, scenario, columns", [
    ("three_terminal", "s1", [("ac", 12, "p"), ("ac", 9, "q"), ("ac", 5, "p")]),
    ("three_terminal", "s5", [("ac", 11, "p"), ("ac", 3, "q")]),
    ("five_terminal", "master_slave", [("ac", 7, "p"), ("dc", 6, "p")]),
])
def test_linearization_predicts_resolve(case_service, name, scenario, columns):
    net = _expected_network(case_service, name, scenario)
    base = solve_power_flow(net, TIGHT)
    model = sensitivity_matrices(base)
    x0 = np.concatenate([base.state.theta, base.state.u, base.state.u_dc])
    for side, bus, quantity in columns:
        col = net.injection_column(side, bus, quantity)
        schedule = net.schedule.copy()
        schedule[col] += 1e-4
        moved = solve_power_flow(net.with_schedule(schedule), TIGHT, initial=base.state)
        x1 = np.concatenate([moved.state.theta, moved.state.u, moved.state.u_dc])
        assert np.max(np.abs((x1 - x0) - model.S_0[:, col] * 1e-4)) < 1e-6


def test_monitored_sensitivities_follow_state_sensitivities(case_service):
    net = _expected_network(case_service, "three_terminal", "s1")
    base = solve_power_flow(net, TIGHT)
    model = sensitivity_matrices(base, monitored=["U:*"])
    col = net.injection_column("ac", 12, "p")
    u_rows = np.arange(net.n_ac, 2 * net.n_ac)
    assert np.allclose(model.T_0[:, col], model.S_0[u_rows, col], atol=1e-12)
    assert np.allclose(model.base_values + model.H_delta, base.state.u)


def test_warm_start_converges_faster(case_service):
    net = _expected_network(case_service, "three_terminal", "s1")
    base = solve_power_flow(net)
    again = solve_power_flow(net, initial=base.state)
    assert again.iterations <= 1


def test_divergence_carries_iteration_log(small_case):
    with pytest.raises(PowerFlowDivergedError) as info:
        solve_power_flow(small_case, SolverOptions(max_iterations=1))
    assert len(info.value.iteration_log) == 2
    assert info.value.iteration_log[1] < info.value.iteration_log[0]
    assert info.value.exit_code == 4


def test_small_case_round_trip(small_case):
    solution = solve_power_flow(small_case)
    c2 = next(c for c in solution.converters if c.id == "C2")
    assert c2.p_s == pytest.approx(0.1)
    assert c2.q_s == pytest.approx(0.02)
    assert c2.loss_p > 0
    assert solution.state.u_dc[0] == pytest.approx(1.0)


def test_branch_flows_cover_every_line(small_case):
    solution = solve_power_flow(small_case)
    flows = branch_flows(solution)
    assert [(f.kind, f.id) for f in flows] == [("ac", "L12"), ("ac", "L13"), ("ac", "L23"), ("dc", "D12")]
    assert all(f.loss >= -1e-12 for f in flows)
    dc = flows[-1]
    assert (dc.from_bus, dc.to_bus) == (1, 2)
    assert dc.q_from == dc.q_to == 0.0
    again = branch_flows(solution, small_case)
    assert [f.p_from for f in again] == pytest.approx([f.p_from for f in flows])


def test_converter_offsets_come_from_base_point_powers(case_service):
    net = _expected_network(case_service, "three_terminal", "s1")
    base = solve_power_flow(net, TIGHT)
    model = sensitivity_matrices(base, monitored=["U:*", "Udc:*"])
    assert np.allclose(model.P_delta, -correction_vector(net, evaluate(net, base.state)))
    n = net.n_ac
    rows = set(net.conv_pcc.tolist()) | set((n + net.conv_pcc).tolist()) | set((2 * n + net.conv_dc).tolist())
    assert all(model.P_delta[r] == 0 for r in range(net.nz) if r not in rows)
    assert np.max(np.abs(model.P_delta)) > 1e-3
    assert np.max(np.abs(model.H_delta)) > 1e-6
    assert np.allclose(model.H_delta, model.G_0 @ model.X_delta)
    x0 = np.concatenate([base.state.theta, base.state.u, base.state.u_dc])
    assert np.allclose(model.base_state + model.X_delta, x0)


def test_coupling_blocks_come_from_converters_only(case_service):
    net = _expected_network(case_service, "three_terminal", "s1")
    jac = assemble_jacobian(solve_power_flow(net).state, net)
    adjacent = ({f"theta:{net.ac_ids[i]}" for i in net.conv_pcc} | {f"U:{net.ac_ids[i]}" for i in net.conv_pcc}
                | {f"Udc:{net.dc_ids[i]}" for i in net.conv_dc})
    nonzero = 0
    for label in ("M_P", "M_Q", "R_delta", "R_V"):
        block = jac.block(label)
        assert np.allclose(block, jac.converter_block(label))
        rows, _ = jac.blocks[label]
        row_labels = jac.labels[rows]
        for r in np.flatnonzero(np.any(block != 0, axis=1)):
            assert row_labels[r] in adjacent
        nonzero += np.count_nonzero(block)
    assert nonzero > 0


def test_bus_order_does_not_change_the_solution(small_case):
    shuffled = small_case.model_copy(update={
        "ac_buses": [small_case.ac_buses[k] for k in (2, 0, 1)],
        "ac_lines": list(reversed(small_case.ac_lines)),
        "dc_buses": list(reversed(small_case.dc_buses)),
        "converters": list(reversed(small_case.converters)),
    })
    results = []
    for case in (small_case, shuffled):
        solution = solve_power_flow(case, TIGHT)
        net = solution.network
        results.append((
            {bus: (solution.state.u[i], solution.state.theta[i]) for i, bus in enumerate(net.ac_ids)},
            {bus: solution.state.u_dc[i] for i, bus in enumerate(net.dc_ids)},
        ))
    (ac_a, dc_a), (ac_b, dc_b) = results
    assert set(ac_a) == set(ac_b)
    for bus in ac_a:
        assert ac_a[bus] == pytest.approx(ac_b[bus], abs=1e-10)
    for bus in dc_a:
        assert dc_a[bus] == pytest.approx(dc_b[bus], abs=1e-10)
