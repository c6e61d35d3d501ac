"""
Compiled numerical view of a NetworkCase: admittance matrices, converter
equations with their derivatives, and monitored-variable evaluation.

Coordinates used throughout:
    z = (theta of all AC buses, ln U of all AC buses, ln Ud of all DC buses)
    W = (P of all AC buses, Q of all AC buses, P of all DC buses)
Both have length 2*n_ac + n_dc; the unknown subset `sel` indexes rows and
columns alike.
"""
import fnmatch
import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from acdc_plf.exceptions import ConverterOperatingPointError, InvalidArgumentError
from acdc_plf.models.grid import AcBusKind, ControlMode, DcBusKind, NetworkCase
from acdc_plf.models.solver import StateVector
from acdc_plf.services.grid_service import classify_nodes

logger = logging.getLogger(__name__)

SLACK, PV, PQ = 0, 1, 2
_KIND_CODE = {AcBusKind.SLACK: SLACK, AcBusKind.PV: PV, AcBusKind.PQ: PQ}

VARIABLE_CLASSES = ("U", "P", "Q", "u_dc", "P_dc")


@dataclass(frozen=True)
class CompiledNetwork:
    name: str
    ac_ids: List[int]
    dc_ids: List[int]
    ac_index: Dict[int, int]
    dc_index: Dict[int, int]
    ybus: sp.csr_matrix
    gbus: sp.csr_matrix
    ac_kind: np.ndarray
    const_v: np.ndarray
    theta_idx: np.ndarray
    u_idx: np.ndarray
    ud_idx: np.ndarray
    sel: np.ndarray
    p_sched: np.ndarray
    q_sched: np.ndarray
    pd_sched: np.ndarray
    theta_set: np.ndarray
    u_set: np.ndarray
    ud_set: np.ndarray
    ac_line_ids: List[str]
    ac_from: np.ndarray
    ac_to: np.ndarray
    ac_y: np.ndarray
    ac_b: np.ndarray
    dc_line_ids: List[str]
    dc_from: np.ndarray
    dc_to: np.ndarray
    dc_g: np.ndarray
    conv_ids: List[str]
    conv_modes: List[ControlMode]
    conv_pcc: np.ndarray
    conv_dc: np.ndarray
    conv_z: np.ndarray
    conv_p_ref: np.ndarray
    conv_q_ref: np.ndarray
    conv_u_ref: np.ndarray
    conv_pdc_ref: np.ndarray
    conv_k: np.ndarray
    fixed_q: np.ndarray
    n_free: np.ndarray

    @property
    def n_ac(self) -> int:
        return len(self.ac_ids)

    @property
    def n_dc(self) -> int:
        return len(self.dc_ids)

    @property
    def nz(self) -> int:
        return 2 * self.n_ac + self.n_dc

    @property
    def n_unknowns(self) -> int:
        return len(self.sel)

    @property
    def schedule(self) -> np.ndarray:
        return np.concatenate([self.p_sched, self.q_sched, self.pd_sched])

    def with_schedule(self, schedule: np.ndarray) -> "CompiledNetwork":
        n, m = self.n_ac, self.n_dc
        schedule = np.asarray(schedule, dtype=float)
        return replace(self, p_sched=schedule[:n], q_sched=schedule[n:2 * n], pd_sched=schedule[2 * n:2 * n + m])

    def state_labels(self) -> List[str]:
        return ([f"theta:{i}" for i in self.ac_ids] + [f"U:{i}" for i in self.ac_ids]
                + [f"Udc:{i}" for i in self.dc_ids])

    def injection_labels(self) -> List[str]:
        return ([f"P@{i}" for i in self.ac_ids] + [f"Q@{i}" for i in self.ac_ids]
                + [f"Pd@{i}" for i in self.dc_ids])

    def injection_column(self, side: str, bus: int, quantity: str) -> int:
        """Column in W of an injection at an AC ('ac') or DC ('dc') bus"""
        if side == "dc":
            if quantity != "p":
                raise InvalidArgumentError("DC buses only carry active power")
            return 2 * self.n_ac + self.dc_index[bus]
        offset = 0 if quantity == "p" else self.n_ac
        return offset + self.ac_index[bus]

    def scale(self, state: StateVector) -> np.ndarray:
        """Factors turning z-coordinate changes into physical (rad, p.u.) changes"""
        return np.concatenate([np.ones(self.n_ac), state.u, state.u_dc])


def _accumulate(n: int, rows, cols, vals, dtype=float) -> sp.csr_matrix:
    return sp.coo_matrix((np.asarray(vals, dtype=dtype), (np.asarray(rows, dtype=int), np.asarray(cols, dtype=int))),
                         shape=(n, n)).tocsr()


def _nan(value: Optional[float]) -> float:
    return math.nan if value is None else float(value)


def compile_network(case: NetworkCase) -> CompiledNetwork:
    ac_ids = [b.id for b in case.ac_buses]
    dc_ids = [b.id for b in case.dc_buses]
    ac_index = {bus_id: k for k, bus_id in enumerate(ac_ids)}
    dc_index = {bus_id: k for k, bus_id in enumerate(dc_ids)}
    n, m = len(ac_ids), len(dc_ids)

    kind = np.array([_KIND_CODE[b.kind] for b in case.ac_buses], dtype=int)
    theta_set = np.array([b.voltage_ang for b in case.ac_buses], dtype=float)
    u_set = np.array([b.voltage_mag for b in case.ac_buses], dtype=float)
    ud_set = np.array([b.voltage for b in case.dc_buses], dtype=float)
    const_v = np.zeros(m, dtype=bool)

    ac_from = np.array([ac_index[l.from_bus] for l in case.ac_lines], dtype=int)
    ac_to = np.array([ac_index[l.to_bus] for l in case.ac_lines], dtype=int)
    ac_y = np.array([l.series_admittance for l in case.ac_lines], dtype=complex)
    ac_b = np.array([l.b_shunt for l in case.ac_lines], dtype=float)
    y_ff = ac_y + 0.5j * ac_b
    ybus = _accumulate(
        n,
        np.concatenate([ac_from, ac_to, ac_from, ac_to]),
        np.concatenate([ac_from, ac_to, ac_to, ac_from]),
        np.concatenate([y_ff, y_ff, -ac_y, -ac_y]),
        dtype=complex,
    )

    dc_from = np.array([dc_index[l.from_bus] for l in case.dc_lines], dtype=int)
    dc_to = np.array([dc_index[l.to_bus] for l in case.dc_lines], dtype=int)
    dc_g = np.array([1.0 / l.resistance for l in case.dc_lines], dtype=float)
    gbus = _accumulate(
        m,
        np.concatenate([dc_from, dc_to, dc_from, dc_to]),
        np.concatenate([dc_from, dc_to, dc_to, dc_from]),
        np.concatenate([dc_g, dc_g, -dc_g, -dc_g]),
    )

    convs = case.converters
    conv_pcc = np.array([ac_index[c.pcc_bus] for c in convs], dtype=int)
    conv_dc = np.array([dc_index[c.dc_bus] for c in convs], dtype=int)
    fixed_q = np.zeros(n)
    n_free = np.zeros(n, dtype=int)
    for c, i, d in zip(convs, conv_pcc, conv_dc):
        mode = c.control
        if mode.fixes_us:
            kind[i] = PV
            u_set[i] = c.setpoints.u_s_ref
        if mode.fixes_q:
            fixed_q[i] += c.setpoints.q_s_ref
        else:
            n_free[i] += 1
        if classify_nodes(mode).dc_kind == DcBusKind.CONST_V:
            const_v[d] = True
            ud_set[d] = c.setpoints.u_dc_ref

    theta_idx = np.flatnonzero(kind != SLACK)
    u_idx = np.flatnonzero(kind == PQ)
    ud_idx = np.flatnonzero(~const_v)
    sel = np.concatenate([theta_idx, n + u_idx, 2 * n + ud_idx]).astype(int)

    return CompiledNetwork(
        name=case.name,
        ac_ids=ac_ids,
        dc_ids=dc_ids,
        ac_index=ac_index,
        dc_index=dc_index,
        ybus=ybus,
        gbus=gbus,
        ac_kind=kind,
        const_v=const_v,
        theta_idx=theta_idx,
        u_idx=u_idx,
        ud_idx=ud_idx,
        sel=sel,
        p_sched=np.array([b.p_inject for b in case.ac_buses], dtype=float),
        q_sched=np.array([b.q_inject for b in case.ac_buses], dtype=float),
        pd_sched=np.array([b.p_inject for b in case.dc_buses], dtype=float),
        theta_set=theta_set,
        u_set=u_set,
        ud_set=ud_set,
        ac_line_ids=[l.id for l in case.ac_lines],
        ac_from=ac_from,
        ac_to=ac_to,
        ac_y=ac_y,
        ac_b=ac_b,
        dc_line_ids=[l.id for l in case.dc_lines],
        dc_from=dc_from,
        dc_to=dc_to,
        dc_g=dc_g,
        conv_ids=[c.id for c in convs],
        conv_modes=[c.control for c in convs],
        conv_pcc=conv_pcc,
        conv_dc=conv_dc,
        conv_z=np.array([c.total_impedance for c in convs], dtype=complex),
        conv_p_ref=np.array([_nan(c.setpoints.p_s_ref) for c in convs]),
        conv_q_ref=np.array([_nan(c.setpoints.q_s_ref) for c in convs]),
        conv_u_ref=np.array([_nan(c.setpoints.u_dc_ref) for c in convs]),
        conv_pdc_ref=np.array([_nan(c.setpoints.p_dc_ref) for c in convs]),
        conv_k=np.array([_nan(c.setpoints.k_droop) for c in convs]),
        fixed_q=fixed_q,
        n_free=n_free,
    )


def initial_state(net: CompiledNetwork, flat_start: bool = True) -> StateVector:
    if flat_start:
        theta = np.where(net.ac_kind == SLACK, net.theta_set, 0.0)
        u = np.where(net.ac_kind == PQ, 1.0, net.u_set)
        u_dc = np.where(net.const_v, net.ud_set, 1.0)
    else:
        theta, u, u_dc = net.theta_set.copy(), net.u_set.copy(), net.ud_set.copy()
    return StateVector(theta.astype(float), u.astype(float), u_dc.astype(float))


def check_state(net: CompiledNetwork, state: StateVector) -> None:
    if len(state.theta) != net.n_ac or len(state.u) != net.n_ac or len(state.u_dc) != net.n_dc:
        raise InvalidArgumentError(
            f"state has ({len(state.theta)}, {len(state.u)}, {len(state.u_dc)}) entries, "
            f"network needs ({net.n_ac}, {net.n_ac}, {net.n_dc})"
        )


@dataclass
class Evaluation:
    """Network and converter quantities at one state"""
    s_calc: np.ndarray
    pd_calc: np.ndarray
    p_s: np.ndarray
    q_s: np.ndarray
    p_dc: np.ndarray
    dnet: Optional[sp.csr_matrix] = None
    grad_z: Optional[np.ndarray] = None
    grad_w: Optional[np.ndarray] = None


def network_injections(net: CompiledNetwork, state: StateVector):
    v = state.u * np.exp(1j * state.theta)
    s_calc = v * np.conj(net.ybus @ v)
    pd_calc = state.u_dc * (net.gbus @ state.u_dc)
    return v, s_calc, pd_calc


def network_derivatives(net: CompiledNetwork, state: StateVector, v: np.ndarray) -> sp.csr_matrix:
    """d(P, Q, Pd)/dz of the network injections"""
    ibus = net.ybus @ v
    diag_v = sp.diags(v, format="csr")
    diag_i = sp.diags(ibus, format="csr")
    ds_dth = 1j * diag_v @ (diag_i - net.ybus @ diag_v).conj()
    ds_dlnu = diag_v @ (net.ybus @ diag_v).conj() + diag_i.conj() @ diag_v
    n, nz = net.n_ac, net.nz
    parts = [
        (ds_dth.real, 0, 0), (ds_dlnu.real, 0, n),
        (ds_dth.imag, n, 0), (ds_dlnu.imag, n, n),
    ]
    if net.n_dc:
        diag_ud = sp.diags(state.u_dc, format="csr")
        dpd = sp.diags((net.gbus @ state.u_dc) * state.u_dc, format="csr") + diag_ud @ net.gbus @ diag_ud
        parts.append((dpd, 2 * n, 2 * n))
    rows, cols, vals = [], [], []
    for block, r0, c0 in parts:
        coo = sp.coo_matrix(block)
        rows.append(coo.row + r0)
        cols.append(coo.col + c0)
        vals.append(coo.data)
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(nz, nz)).tocsr()


def _row(matrix: sp.csr_matrix, r: int) -> np.ndarray:
    return matrix.getrow(r).toarray().ravel()


def evaluate(net: CompiledNetwork, state: StateVector, derivatives: bool = True) -> Evaluation:
    """Network injections and converter operating points (with gradients if asked)"""
    v, s_calc, pd_calc = network_injections(net, state)
    n, nz, nconv = net.n_ac, net.nz, len(net.conv_ids)
    dnet = network_derivatives(net, state, v) if derivatives else None
    p_s = np.zeros(nconv)
    q_s = np.zeros(nconv)
    p_dc = np.zeros(nconv)
    grad_z = np.zeros((3, nconv, nz)) if derivatives else None
    grad_w = np.zeros((3, nconv, nz)) if derivatives else None

    for k, mode in enumerate(net.conv_modes):
        i, d = net.conv_pcc[k], net.conv_dc[k]
        gq_z = gq_w = gp_z = gp_w = gd_z = gd_w = None
        if derivatives:
            gq_z, gq_w, gp_z, gp_w, gd_z, gd_w = (np.zeros(nz) for _ in range(6))

        # reactive power drawn at the PCC
        if mode.fixes_q:
            q = net.conv_q_ref[k]
        else:
            q = (net.q_sched[i] - s_calc[i].imag - net.fixed_q[i]) / net.n_free[i]
            if derivatives:
                gq_z = -_row(dnet, n + i) / net.n_free[i]
                gq_w[n + i] = 1.0 / net.n_free[i]

        r_total = net.conv_z[k].real
        a = r_total / state.u[i] ** 2
        if derivatives:
            ga_z = np.zeros(nz)
            ga_z[n + i] = -2.0 * a

        if mode.fixes_p or mode == ControlMode.ISLAND:
            if mode.fixes_p:
                p = net.conv_p_ref[k]
            else:
                p = net.p_sched[i] - s_calc[i].real
                if derivatives:
                    gp_z = -_row(dnet, i)
                    gp_w[i] = 1.0
            pdc = p - a * (p ** 2 + q ** 2)
            if derivatives:
                gd_z = gp_z - (p ** 2 + q ** 2) * ga_z - a * (2 * p * gp_z + 2 * q * gq_z)
                gd_w = gp_w - a * (2 * p * gp_w + 2 * q * gq_w)
        else:
            if mode.is_droop:
                pdc = -(state.u_dc[d] - net.conv_u_ref[k]) / net.conv_k[k] + net.conv_pdc_ref[k]
                if derivatives:
                    gd_z[2 * n + d] = -state.u_dc[d] / net.conv_k[k]
            else:
                pdc = pd_calc[d] - net.pd_sched[d]
                if derivatives:
                    gd_z = _row(dnet, 2 * n + d)
                    gd_w[2 * n + d] = -1.0
            c = pdc + a * q ** 2
            disc = 1.0 - 4.0 * a * c
            if disc < 0:
                raise ConverterOperatingPointError(
                    f"converter {net.conv_ids[k]} cannot deliver P_dc = {pdc:.6g} p.u. through R = {r_total:.6g}",
                    details={"converter": net.conv_ids[k], "p_dc": pdc},
                )
            p = 2.0 * c / (1.0 + math.sqrt(disc))
            if derivatives:
                denom = 1.0 - 2.0 * a * p
                gp_z = (gd_z + (p ** 2 + q ** 2) * ga_z + 2 * a * q * gq_z) / denom
                gp_w = (gd_w + 2 * a * q * gq_w) / denom

        p_s[k], q_s[k], p_dc[k] = p, q, pdc
        if derivatives:
            grad_z[0, k], grad_z[1, k], grad_z[2, k] = gp_z, gq_z, gd_z
            grad_w[0, k], grad_w[1, k], grad_w[2, k] = gp_w, gq_w, gd_w

    return Evaluation(s_calc, pd_calc, p_s, q_s, p_dc, dnet, grad_z, grad_w)


def correction_vector(net: CompiledNetwork, ev: Evaluation) -> np.ndarray:
    """Converter terms in W-row layout, signed as they are subtracted from the schedule"""
    n = net.n_ac
    corr = np.zeros(net.nz)
    np.add.at(corr, net.conv_pcc, ev.p_s)
    np.add.at(corr, n + net.conv_pcc, ev.q_s)
    np.add.at(corr, 2 * n + net.conv_dc, -ev.p_dc)
    return corr


def full_mismatch(net: CompiledNetwork, ev: Evaluation) -> np.ndarray:
    calc = np.concatenate([ev.s_calc.real, ev.s_calc.imag, ev.pd_calc])
    return net.schedule - correction_vector(net, ev) - calc


def correction_matrix(net: CompiledNetwork, grads: np.ndarray) -> sp.csr_matrix:
    """Row-stacked converter gradients placed on their PCC / DC rows"""
    n, nz = net.n_ac, net.nz
    if not len(net.conv_ids):
        return sp.csr_matrix((nz, nz))
    dense = np.zeros((nz, nz))
    for k in range(len(net.conv_ids)):
        dense[net.conv_pcc[k]] += grads[0, k]
        dense[n + net.conv_pcc[k]] += grads[1, k]
        dense[2 * n + net.conv_dc[k]] -= grads[2, k]
    return sp.csr_matrix(dense)


# ---------------------------------------------------------------------------
# Branch flows and monitored variables

def ac_line_flows(net: CompiledNetwork, state: StateVector):
    """Complex power entering each AC line at its from and to ends"""
    v = state.u * np.exp(1j * state.theta)
    vf, vt = v[net.ac_from], v[net.ac_to]
    y_sh = 0.5j * net.ac_b
    s_from = vf * np.conj((net.ac_y + y_sh) * vf - net.ac_y * vt)
    s_to = vt * np.conj((net.ac_y + y_sh) * vt - net.ac_y * vf)
    return s_from, s_to


def dc_line_flows(net: CompiledNetwork, state: StateVector):
    uf, ut = state.u_dc[net.dc_from], state.u_dc[net.dc_to]
    return uf * net.dc_g * (uf - ut), ut * net.dc_g * (ut - uf)


@dataclass(frozen=True)
class MonitorSet:
    """Monitored variables and where they come from"""
    names: List[str]
    classes: List[str]
    kinds: np.ndarray
    refs: np.ndarray

    def __len__(self) -> int:
        return len(self.names)

    def evaluate(self, net: CompiledNetwork, state: StateVector) -> np.ndarray:
        out = np.zeros(len(self.names))
        s_from, _ = ac_line_flows(net, state)
        p_dc, _ = dc_line_flows(net, state)
        for code, values in ((0, state.u), (1, s_from.real), (2, s_from.imag), (3, state.u_dc), (4, p_dc)):
            mask = self.kinds == code
            out[mask] = values[self.refs[mask]]
        return out

    def jacobian(self, net: CompiledNetwork, state: StateVector) -> np.ndarray:
        """d(monitored)/dz"""
        n = net.n_ac
        hz = np.zeros((len(self.names), net.nz))
        v = state.u * np.exp(1j * state.theta)
        for row, (code, ref) in enumerate(zip(self.kinds, self.refs)):
            if code == 0:
                hz[row, n + ref] = state.u[ref]
            elif code == 3:
                hz[row, 2 * n + ref] = state.u_dc[ref]
            elif code in (1, 2):
                f, t = net.ac_from[ref], net.ac_to[ref]
                y = net.ac_y[ref]
                c = -v[f] * np.conj(v[t]) * np.conj(y)
                d_thf, d_tht = 1j * c, -1j * c
                d_uf = 2.0 * state.u[f] ** 2 * np.conj(y + 0.5j * net.ac_b[ref]) + c
                d_ut = c
                part = np.real if code == 1 else np.imag
                hz[row, f] += part(d_thf)
                hz[row, t] += part(d_tht)
                hz[row, n + f] += part(d_uf)
                hz[row, n + t] += part(d_ut)
            else:
                f, t = net.dc_from[ref], net.dc_to[ref]
                g = net.dc_g[ref]
                uf, ut = state.u_dc[f], state.u_dc[t]
                hz[row, 2 * n + f] += g * uf * (2.0 * uf - ut)
                hz[row, 2 * n + t] += -g * uf * ut
        return hz


def _line_names(prefix: str, ids: Sequence[str], ends) -> List[str]:
    names = [f"{prefix}:{f}-{t}" for f, t in ends]
    counts: Dict[str, int] = {}
    for name in names:
        counts[name] = counts.get(name, 0) + 1
    return [f"{name}#{line_id}" if counts[name] > 1 else name for name, line_id in zip(names, ids)]


def build_monitor_set(net: CompiledNetwork, patterns: Optional[Sequence[str]] = None) -> MonitorSet:
    """All bus voltages and branch flows, optionally filtered by glob patterns"""
    ac_ends = [(net.ac_ids[f], net.ac_ids[t]) for f, t in zip(net.ac_from, net.ac_to)]
    dc_ends = [(net.dc_ids[f], net.dc_ids[t]) for f, t in zip(net.dc_from, net.dc_to)]
    entries = []
    entries += [(f"U:{bus}", "U", 0, k) for k, bus in enumerate(net.ac_ids)]
    entries += [(name, "P", 1, k) for k, name in enumerate(_line_names("P", net.ac_line_ids, ac_ends))]
    entries += [(name, "Q", 2, k) for k, name in enumerate(_line_names("Q", net.ac_line_ids, ac_ends))]
    entries += [(f"Udc:{bus}", "u_dc", 3, k) for k, bus in enumerate(net.dc_ids)]
    entries += [(name, "P_dc", 4, k) for k, name in enumerate(_line_names("Pdc", net.dc_line_ids, dc_ends))]
    if patterns:
        entries = [e for e in entries if any(fnmatch.fnmatchcase(e[0], p) for p in patterns)]
        if not entries:
            raise InvalidArgumentError(f"monitor patterns {list(patterns)} match no variable")
    return MonitorSet(
        names=[e[0] for e in entries],
        classes=[e[1] for e in entries],
        kinds=np.array([e[2] for e in entries], dtype=int),
        refs=np.array([e[3] for e in entries], dtype=int),
    )
