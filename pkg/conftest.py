"""
Shared fixtures: bundled cases and a small hand-built AC/DC network
"""
import sys
from pathlib import Path

import pytest

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from acdc_plf.models.grid import (
    AcBus,
    AcBusKind,
    AcLine,
    ControlMode,
    Converter,
    ConverterSetpoints,
    DcBus,
    DcBusKind,
    DcLine,
    NetworkCase,
)
from acdc_plf.models.stochastic import BetaPvModel, GaussianLoadModel, StochasticSpec
from acdc_plf.services.case_service import CaseService
from acdc_plf.services.grid_service import per_unit_bases

THREE_TERMINAL_SCENARIOS = ("s1", "s2", "s3", "s4", "s5", "s6", "correlated")
FIVE_TERMINAL_SCENARIOS = ("master_slave", "p_us", "droop", "udc_us", "droop_us")


@pytest.fixture(scope="session")
def case_service():
    return CaseService()


@pytest.fixture(scope="session")
def three_terminal(case_service):
    return case_service.load_case("three_terminal")


@pytest.fixture(scope="session")
def three_terminal_correlated(case_service):
    return case_service.load_case("three_terminal", "correlated")


@pytest.fixture(scope="session")
def five_terminal(case_service):
    return case_service.load_case("five_terminal")


def build_small_case(control: ControlMode = ControlMode.P_Q, **setpoints) -> NetworkCase:
    """Three AC buses, two converters and one DC line"""
    second = ConverterSetpoints(**(setpoints or {"p_s_ref": 0.1, "q_s_ref": 0.02}))
    dc_kind = {ControlMode.P_Q: DcBusKind.CONST_P, ControlMode.P_US: DcBusKind.CONST_P,
               ControlMode.DROOP_Q: DcBusKind.DROOP, ControlMode.DROOP_US: DcBusKind.DROOP}[control]
    return NetworkCase(
        name="small",
        base=per_unit_bases(100.0, 230.0),
        ac_buses=[
            AcBus(id=1, kind=AcBusKind.SLACK, voltage_mag=1.02),
            AcBus(id=2, p_inject=-0.3, q_inject=-0.1),
            AcBus(id=3, p_inject=-0.2, q_inject=-0.05),
        ],
        ac_lines=[
            AcLine(id="L12", from_bus=1, to_bus=2, r=0.01, x=0.05, b_shunt=0.02),
            AcLine(id="L13", from_bus=1, to_bus=3, r=0.01, x=0.05, b_shunt=0.02),
            AcLine(id="L23", from_bus=2, to_bus=3, r=0.02, x=0.08),
        ],
        dc_buses=[DcBus(id=1, kind=DcBusKind.CONST_V), DcBus(id=2, kind=dc_kind)],
        dc_lines=[DcLine(id="D12", from_bus=1, to_bus=2, resistance=0.02)],
        converters=[
            Converter(id="C1", pcc_bus=2, dc_bus=1, transformer_impedance=(0.001, 0.1),
                      reactor_impedance=(0.001, 0.15), loss_resistance=0.005, control=ControlMode.UDC_Q,
                      setpoints=ConverterSetpoints(u_dc_ref=1.0, q_s_ref=0.0)),
            Converter(id="C2", pcc_bus=3, dc_bus=2, transformer_impedance=(0.001, 0.1),
                      reactor_impedance=(0.001, 0.15), loss_resistance=0.005, control=control,
                      setpoints=second),
        ],
    )


@pytest.fixture
def small_case():
    return build_small_case()


@pytest.fixture
def small_spec():
    return StochasticSpec(
        pv=[BetaPvModel(id="PV3", bus=3, alpha=2.0, beta=3.0, r_m_mw=10.0)],
        loads=[GaussianLoadModel(id="LD2", bus=2, p_mean=0.1, p_std=0.01, q_mean=0.02, q_std=0.002)],
    )
