"""
Network formulas: per-unit bases, converter equivalent branch, control-mode
classification and case validation
"""
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from acdc_plf.exceptions import (
    CaseValidationError,
    InvalidArgumentError,
    SingularBranchError,
    Violation,
)
from acdc_plf.models.grid import (
    AcBusKind,
    ControlMode,
    DcBusKind,
    NetworkCase,
    NodeClassification,
    PerUnitBase,
    StationClass,
)

logger = logging.getLogger(__name__)

DC_VOLTAGE_RATIO = 2.0 * math.sqrt(2.0) / math.sqrt(3.0)

_CLASSIFICATION = {
    ControlMode.P_Q: (AcBusKind.PQ, DcBusKind.CONST_P, StationClass.POWER),
    ControlMode.P_US: (AcBusKind.PV, DcBusKind.CONST_P, StationClass.POWER),
    ControlMode.UDC_Q: (AcBusKind.PQ, DcBusKind.CONST_V, StationClass.VOLTAGE),
    ControlMode.UDC_US: (AcBusKind.PV, DcBusKind.CONST_V, StationClass.VOLTAGE),
    ControlMode.DROOP_Q: (AcBusKind.PQ, DcBusKind.DROOP, StationClass.VOLTAGE),
    ControlMode.DROOP_US: (AcBusKind.PV, DcBusKind.DROOP, StationClass.VOLTAGE),
    ControlMode.ISLAND: (AcBusKind.SLACK, DcBusKind.CONST_P, StationClass.ISLAND),
}

# quantity -> PerUnitBase attribute
_QUANTITIES = {
    "power": "s_ac_base",
    "dc_power": "s_dc_base",
    "ac_voltage": "u_ac_base",
    "dc_voltage": "u_dc_base",
    "ac_current": "i_ac_base",
    "dc_current": "i_dc_base",
    "ac_impedance": "z_ac_base",
    "dc_resistance": "z_dc_base",
}


def per_unit_bases(s_ac: float, u_ac: float) -> PerUnitBase:
    """Build the AC bases and the DC bases coupled to them"""
    if not (s_ac > 0 and u_ac > 0):
        raise InvalidArgumentError(f"per-unit bases need positive inputs, got S={s_ac}, U={u_ac}")
    u_dc = DC_VOLTAGE_RATIO * u_ac
    return PerUnitBase(
        s_ac_base=s_ac,
        u_ac_base=u_ac,
        s_dc_base=s_ac,
        u_dc_base=u_dc,
        i_ac_base=s_ac / (math.sqrt(3.0) * u_ac),
        i_dc_base=s_ac / u_dc,
        z_ac_base=u_ac ** 2 / s_ac,
        z_dc_base=u_dc ** 2 / s_ac,
    )


def _base_value(base: PerUnitBase, quantity: str) -> float:
    try:
        return getattr(base, _QUANTITIES[quantity])
    except KeyError:
        raise InvalidArgumentError(f"unknown quantity '{quantity}'")


def to_per_unit(value: float, quantity: str, base: PerUnitBase) -> float:
    return value / _base_value(base, quantity)


def to_physical(value: float, quantity: str, base: PerUnitBase) -> float:
    return value * _base_value(base, quantity)


def lump_converter_branch(z_tr: complex, z_c: complex, r_loss: float = 0.0) -> complex:
    """Admittance of transformer, phase reactor and loss resistance in series"""
    z = complex(z_tr) + complex(z_c) + r_loss
    if z == 0:
        raise SingularBranchError("converter branch has zero total impedance")
    return 1.0 / z


def converter_injections(u_s: float, delta_s: float, u_c: float, delta_c: float,
                         y_ck: complex) -> Tuple[float, float, float, float]:
    """
    Powers at both ends of the converter branch.

    P_s, Q_s leave the PCC into the branch; P_c, Q_c arrive at the converter
    valve, P_c being the injection into the DC bus.
    """
    g, b = y_ck.real, y_ck.imag
    d = delta_s - delta_c
    cos_d, sin_d = math.cos(d), math.sin(d)
    uu = u_s * u_c
    p_s = u_s ** 2 * g - uu * (g * cos_d + b * sin_d)
    q_s = -(u_s ** 2) * b - uu * (g * sin_d - b * cos_d)
    p_c = -(u_c ** 2) * g + uu * (g * cos_d - b * sin_d)
    q_c = u_c ** 2 * b - uu * (g * sin_d + b * cos_d)
    return p_s, q_s, p_c, q_c


def converter_loss(p_s: float, q_s: float, u_s: float, r_ck: float, x_ck: float) -> Tuple[float, float]:
    """Active and reactive power consumed inside the converter branch"""
    if u_s == 0:
        raise InvalidArgumentError("converter loss undefined at zero PCC voltage")
    i_sq = (p_s ** 2 + q_s ** 2) / u_s ** 2
    return i_sq * r_ck, i_sq * x_ck


def pcc_balance_residual(p_s: float, loss_p: float, p_dc: float) -> float:
    return p_s - loss_p - p_dc


def droop_power(u_dk: float, u_ref: float, p_ref: float, k_droop: float) -> float:
    """DC injection of a droop station at DC voltage u_dk"""
    if not k_droop > 0:
        raise InvalidArgumentError(f"droop coefficient must be positive, got {k_droop}")
    return -(u_dk - u_ref) / k_droop + p_ref


def loss_equivalent_resistance(p_ac_pu: float, p_dc_pu: float) -> float:
    """Equivalent loss resistance from an AC/DC power pair at rated operation"""
    if p_ac_pu == 0:
        raise InvalidArgumentError("loss estimate needs a nonzero AC power")
    loss = p_ac_pu - p_dc_pu
    if loss < 0:
        logger.warning("Negative converter loss estimate (P_ac=%g, P_dc=%g)", p_ac_pu, p_dc_pu)
    return loss / ((2.0 / 3.0) * p_ac_pu) ** 2


def classify_nodes(mode) -> NodeClassification:
    try:
        ac_kind, dc_kind, station = _CLASSIFICATION[ControlMode.parse(mode)]
    except (ValueError, KeyError):
        raise InvalidArgumentError(f"unknown control mode '{mode}'")
    return NodeClassification(ac_kind=ac_kind, dc_kind=dc_kind, station_class=station)


@dataclass(frozen=True)
class ConverterState:
    """Internal converter quantities recovered from the PCC side"""
    u_c: float
    delta_c: float
    p_c: float
    q_c: float
    current: float
    modulation_index: Optional[float]


def converter_state(u_s: float, delta_s: float, p_s: float, q_s: float, z_total: complex,
                    u_dc: Optional[float] = None) -> ConverterState:
    v_s = u_s * np.exp(1j * delta_s)
    current = np.conj(complex(p_s, q_s) / v_s)
    v_c = v_s - z_total * current
    s_c = v_c * np.conj(current)
    u_c = abs(v_c)
    modulation = u_c / u_dc if u_dc else None
    return ConverterState(
        u_c=float(u_c),
        delta_c=float(np.angle(v_c)),
        p_c=float(s_c.real),
        q_c=float(s_c.imag),
        current=float(abs(current)),
        modulation_index=modulation,
    )


def dc_line_conductances(case: NetworkCase) -> List[Tuple[str, int, int, float]]:
    """(line id, from, to, G) for every DC line, parallel lines kept separate"""
    bad = [
        Violation("non-positive resistance", "dc_line", line.id, f"DC line {line.id} has R = {line.resistance}")
        for line in case.dc_lines if not line.resistance > 0
    ]
    if bad:
        raise CaseValidationError(bad)
    return [(line.id, line.from_bus, line.to_bus, 1.0 / line.resistance) for line in case.dc_lines]


def _components(ids: List[int], edges: List[Tuple[int, int]]) -> Dict[int, int]:
    index = {bus_id: k for k, bus_id in enumerate(ids)}
    rows = [index[f] for f, t in edges if f in index and t in index]
    cols = [index[t] for f, t in edges if f in index and t in index]
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(ids), len(ids)))
    _, labels = connected_components(graph, directed=False)
    return {bus_id: int(labels[index[bus_id]]) for bus_id in ids}


def _duplicates(values) -> List:
    seen, dup = set(), []
    for v in values:
        if v in seen:
            dup.append(v)
        seen.add(v)
    return dup


def _check_setpoints(conv) -> List[Violation]:
    sp, mode = conv.setpoints, conv.control
    required = []
    if mode.fixes_p:
        required.append("p_s_ref")
    if mode.fixes_q:
        required.append("q_s_ref")
    if mode.fixes_us:
        required.append("u_s_ref")
    if mode.fixes_udc or mode.is_droop:
        required.append("u_dc_ref")
    if mode.is_droop:
        required += ["k_droop", "p_dc_ref"]
    out = [
        Violation("missing setpoint", "converter", conv.id, f"{mode.value} converter {conv.id} needs {name}")
        for name in required if getattr(sp, name) is None
    ]
    if mode.is_droop and sp.k_droop is not None and not sp.k_droop > 0:
        out.append(Violation("non-positive droop coefficient", "converter", conv.id,
                             f"converter {conv.id} has k_droop = {sp.k_droop}"))
    for name in ("u_dc_ref", "u_s_ref"):
        value = getattr(sp, name)
        if name in required and value is not None and not value > 0:
            out.append(Violation("non-positive voltage setpoint", "converter", conv.id,
                                 f"converter {conv.id} has {name} = {value}"))
    return out


def check_case(case: NetworkCase) -> List[Violation]:
    """Every rule violation found in the case"""
    v: List[Violation] = []
    ac_ids = [b.id for b in case.ac_buses]
    dc_ids = [b.id for b in case.dc_buses]
    ac_by_id = {b.id: b for b in case.ac_buses}
    dc_by_id = {b.id: b for b in case.dc_buses}

    for dup in _duplicates(ac_ids):
        v.append(Violation("duplicate id", "ac_bus", dup, f"AC bus id {dup} used twice"))
    for dup in _duplicates(dc_ids):
        v.append(Violation("duplicate id", "dc_bus", dup, f"DC bus id {dup} used twice"))
    for dup in _duplicates([c.id for c in case.converters]):
        v.append(Violation("duplicate id", "converter", dup, f"converter id {dup} used twice"))
    if not case.ac_buses:
        v.append(Violation("empty network", "case", case.name, "case has no AC buses"))

    for line in case.ac_lines:
        for end in (line.from_bus, line.to_bus):
            if end not in ac_by_id:
                v.append(Violation("unknown bus", "ac_line", line.id, f"AC line {line.id} references bus {end}"))
        if line.from_bus == line.to_bus:
            v.append(Violation("self loop", "ac_line", line.id, f"AC line {line.id} connects bus {line.from_bus} to itself"))
        if line.r == 0 and line.x == 0:
            v.append(Violation("zero impedance", "ac_line", line.id, f"AC line {line.id} has zero series impedance"))
        elif not all(math.isfinite(t) for t in (line.r, line.x, line.b_shunt)):
            v.append(Violation("non-finite admittance", "ac_line", line.id, f"AC line {line.id} has non-finite data"))

    for line in case.dc_lines:
        for end in (line.from_bus, line.to_bus):
            if end not in dc_by_id:
                v.append(Violation("unknown bus", "dc_line", line.id, f"DC line {line.id} references bus {end}"))
        if line.from_bus == line.to_bus:
            v.append(Violation("self loop", "dc_line", line.id, f"DC line {line.id} connects bus {line.from_bus} to itself"))
        if not line.resistance > 0:
            v.append(Violation("non-positive resistance", "dc_line", line.id,
                               f"DC line {line.id} has R = {line.resistance}"))

    for bus in case.dc_buses:
        if not bus.voltage > 0:
            v.append(Violation("non-positive voltage", "dc_bus", bus.id, f"DC bus {bus.id} voltage {bus.voltage}"))

    per_dc_bus = defaultdict(list)
    per_pcc = defaultdict(list)
    for conv in case.converters:
        if conv.pcc_bus not in ac_by_id:
            v.append(Violation("unknown bus", "converter", conv.id, f"converter {conv.id} PCC bus {conv.pcc_bus} missing"))
            continue
        if conv.dc_bus not in dc_by_id:
            v.append(Violation("unknown bus", "converter", conv.id, f"converter {conv.id} DC bus {conv.dc_bus} missing"))
            continue
        per_dc_bus[conv.dc_bus].append(conv)
        per_pcc[conv.pcc_bus].append(conv)
        v.extend(_check_setpoints(conv))
        if conv.total_impedance == 0:
            v.append(Violation("singular converter branch", "converter", conv.id,
                               f"converter {conv.id} has zero total impedance"))
        pcc_kind = ac_by_id[conv.pcc_bus].kind
        if conv.control == ControlMode.ISLAND:
            if pcc_kind != AcBusKind.SLACK:
                v.append(Violation("island converter off slack", "converter", conv.id,
                                   f"f-U converter {conv.id} must sit on the island slack bus"))
        elif pcc_kind == AcBusKind.SLACK:
            v.append(Violation("converter on slack bus", "converter", conv.id,
                               f"converter {conv.id} is connected to slack bus {conv.pcc_bus}"))
        elif conv.control.fixes_us and pcc_kind == AcBusKind.PV:
            v.append(Violation("PCC already voltage controlled", "converter", conv.id,
                               f"converter {conv.id} controls U_s at PV bus {conv.pcc_bus}"))

    for dc_bus, convs in per_dc_bus.items():
        if len(convs) > 1:
            v.append(Violation("multiple converters on DC bus", "dc_bus", dc_bus,
                               f"DC bus {dc_bus} has converters {[c.id for c in convs]}"))
    for pcc, convs in per_pcc.items():
        refs = {c.setpoints.u_s_ref for c in convs if c.control.fixes_us}
        if len(refs) > 1:
            v.append(Violation("conflicting PCC voltage", "ac_bus", pcc,
                               f"converters at bus {pcc} request U_s = {sorted(refs)}"))
        if any(c.control == ControlMode.ISLAND for c in convs) and len(convs) > 1:
            v.append(Violation("shared island PCC", "ac_bus", pcc,
                               f"island bus {pcc} carries more than one converter"))

    for bus in case.dc_buses:
        convs = per_dc_bus.get(bus.id, [])
        expected = classify_nodes(convs[0].control).dc_kind if convs else DcBusKind.PURE
        if bus.kind != expected:
            v.append(Violation("DC bus kind mismatch", "dc_bus", bus.id,
                               f"DC bus {bus.id} declared {bus.kind.value}, converter implies {expected.value}"))

    # Connectivity and references per island
    ac_edges = [(l.from_bus, l.to_bus) for l in case.ac_lines]
    dc_edges = [(l.from_bus, l.to_bus) for l in case.dc_lines]
    if ac_ids and not _duplicates(ac_ids):
        labels = _components(ac_ids, ac_edges)
        slacks = defaultdict(list)
        members = defaultdict(list)
        for bus in case.ac_buses:
            members[labels[bus.id]].append(bus.id)
            if bus.kind == AcBusKind.SLACK:
                slacks[labels[bus.id]].append(bus.id)
        for comp, buses in members.items():
            if not slacks[comp]:
                v.append(Violation("no AC slack", "ac_bus", buses[0], f"AC island {sorted(buses)} has no slack bus"))
            elif len(slacks[comp]) > 1:
                v.append(Violation("multiple AC slacks", "ac_bus", slacks[comp][1],
                                   f"AC island {sorted(buses)} has slack buses {slacks[comp]}"))
            if len(buses) == 1 and not slacks[comp]:
                v.append(Violation("isolated bus", "ac_bus", buses[0], f"AC bus {buses[0]} is not connected"))
    if dc_ids and not _duplicates(dc_ids):
        labels = _components(dc_ids, dc_edges)
        members = defaultdict(list)
        for bus in case.dc_buses:
            members[labels[bus.id]].append(bus)
        for comp, buses in members.items():
            kinds = {b.kind for b in buses}
            if not kinds & {DcBusKind.CONST_V, DcBusKind.DROOP}:
                v.append(Violation("no DC voltage reference", "dc_bus", buses[0].id,
                                   f"DC island {sorted(b.id for b in buses)} has no constant-voltage or droop station"))
            if len(buses) == 1 and buses[0].kind == DcBusKind.PURE:
                v.append(Violation("isolated bus", "dc_bus", buses[0].id, f"DC bus {buses[0].id} is not connected"))
    return v


def validate_case(case: NetworkCase) -> NetworkCase:
    violations = check_case(case)
    if violations:
        for item in violations:
            logger.debug("Case violation %s on %s %s: %s", item.rule, item.element, item.element_id, item.message)
        raise CaseValidationError(violations)
    return case
