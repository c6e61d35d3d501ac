"""
Pydantic models for the AC/DC network description
"""
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field


class AcBusKind(str, Enum):
    SLACK = "slack"
    PV = "PV"
    PQ = "PQ"


class DcBusKind(str, Enum):
    CONST_V = "const_V"
    CONST_P = "const_P"
    DROOP = "droop"
    PURE = "pure"


class StationClass(str, Enum):
    POWER = "power station"
    VOLTAGE = "voltage station"
    ISLAND = "island station"


class ControlMode(str, Enum):
    """Converter control modes, numbered as in the control-mode table"""
    P_Q = "P-Q"
    P_US = "P-Us"
    UDC_Q = "Udc-Q"
    UDC_US = "Udc-Us"
    DROOP_Q = "droop-Q"
    DROOP_US = "droop-Us"
    ISLAND = "f-U"

    @property
    def number(self) -> int:
        return list(ControlMode).index(self) + 1

    @classmethod
    def parse(cls, value) -> "ControlMode":
        """Accept a mode name or its table number"""
        if isinstance(value, ControlMode):
            return value
        if isinstance(value, int) and not isinstance(value, bool):
            modes = list(cls)
            if 1 <= value <= len(modes):
                return modes[value - 1]
            raise ValueError(f"unknown control mode number {value}")
        text = str(value).strip()
        for mode in cls:
            if mode.value.lower() == text.lower() or mode.name.lower() == text.lower():
                return mode
        if text.isdigit():
            return cls.parse(int(text))
        raise ValueError(f"unknown control mode '{value}'")

    @property
    def fixes_q(self) -> bool:
        return self in (ControlMode.P_Q, ControlMode.UDC_Q, ControlMode.DROOP_Q)

    @property
    def fixes_us(self) -> bool:
        return self in (ControlMode.P_US, ControlMode.UDC_US, ControlMode.DROOP_US)

    @property
    def fixes_p(self) -> bool:
        return self in (ControlMode.P_Q, ControlMode.P_US)

    @property
    def fixes_udc(self) -> bool:
        return self in (ControlMode.UDC_Q, ControlMode.UDC_US)

    @property
    def is_droop(self) -> bool:
        return self in (ControlMode.DROOP_Q, ControlMode.DROOP_US)


class NodeClassification(BaseModel):
    """Equivalent node types implied by a control mode"""
    model_config = ConfigDict(frozen=True)

    ac_kind: AcBusKind
    dc_kind: DcBusKind
    station_class: StationClass


class PerUnitBase(BaseModel):
    """Coupled AC and DC per-unit bases"""
    model_config = ConfigDict(frozen=True)

    s_ac_base: float = Field(..., description="AC base power (MVA)")
    u_ac_base: float = Field(..., description="AC base line voltage (kV)")
    s_dc_base: float = Field(..., description="DC base power (MW), equal to the AC base")
    u_dc_base: float = Field(..., description="DC base voltage (kV), 2*sqrt(2)/sqrt(3) times the AC base")
    i_ac_base: float = Field(..., description="AC base current (kA)")
    i_dc_base: float = Field(..., description="DC base current (kA)")
    z_ac_base: float = Field(..., description="AC base impedance (ohm)")
    z_dc_base: float = Field(..., description="DC base resistance (ohm)")


class AcBus(BaseModel):
    """AC bus with scheduled net injection (generation minus demand)"""
    model_config = ConfigDict(frozen=True)

    id: int
    kind: AcBusKind = AcBusKind.PQ
    voltage_mag: float = Field(1.0, gt=0, description="Magnitude setpoint or initial value (p.u.)")
    voltage_ang: float = Field(0.0, description="Angle setpoint or initial value (rad)")
    p_inject: float = Field(0.0, description="Net active injection (p.u.)")
    q_inject: float = Field(0.0, description="Net reactive injection (p.u.)")


class AcLine(BaseModel):
    """AC pi-model line"""
    model_config = ConfigDict(frozen=True)

    id: str
    from_bus: int
    to_bus: int
    r: float = Field(..., ge=0, description="Series resistance (p.u.)")
    x: float = Field(..., description="Series reactance (p.u.)")
    b_shunt: float = Field(0.0, description="Total line charging susceptance (p.u.)")

    @property
    def series_admittance(self) -> complex:
        return 1.0 / complex(self.r, self.x)

    @property
    def shunt_susceptance(self) -> float:
        return self.b_shunt


class DcBus(BaseModel):
    """DC bus; kind is derived from the attached converter"""
    model_config = ConfigDict(frozen=True)

    id: int
    kind: DcBusKind = DcBusKind.PURE
    voltage: float = Field(1.0, gt=0, description="Voltage setpoint or initial value (p.u.)")
    p_inject: float = Field(0.0, description="Net injection, generation minus demand (p.u.)")


class DcLine(BaseModel):
    """DC line"""
    model_config = ConfigDict(frozen=True)

    id: str
    from_bus: int
    to_bus: int
    resistance: float = Field(..., description="Resistance (p.u.)")


class ConverterSetpoints(BaseModel):
    """Setpoints; which ones are used depends on the control mode"""
    model_config = ConfigDict(frozen=True)

    u_dc_ref: Optional[float] = Field(None, description="DC voltage reference, also the droop reference voltage")
    u_s_ref: Optional[float] = Field(None, description="PCC voltage magnitude reference")
    p_s_ref: Optional[float] = Field(None, description="Active power drawn from the PCC")
    q_s_ref: Optional[float] = Field(None, description="Reactive power drawn from the PCC")
    k_droop: Optional[float] = Field(None, description="Droop coefficient (p.u. voltage per p.u. power)")
    p_dc_ref: Optional[float] = Field(None, description="Droop reference power injected into the DC bus")


class Converter(BaseModel):
    """VSC station between a PCC bus and a DC bus"""
    model_config = ConfigDict(frozen=True)

    id: str
    pcc_bus: int
    dc_bus: int
    transformer_impedance: Tuple[float, float] = Field((0.0, 0.0), description="Z_tr as (r, x) p.u.")
    filter_susceptance: float = Field(0.0, description="B_f (recorded, not modelled)")
    reactor_impedance: Tuple[float, float] = Field((0.0, 0.0), description="Z_c as (r, x) p.u.")
    loss_resistance: float = Field(0.0, description="Equivalent converter loss resistance r_pu")
    control: ControlMode
    setpoints: ConverterSetpoints = ConverterSetpoints()

    @property
    def z_tr(self) -> complex:
        return complex(*self.transformer_impedance)

    @property
    def z_c(self) -> complex:
        return complex(*self.reactor_impedance)

    @property
    def total_impedance(self) -> complex:
        return self.z_tr + self.z_c + self.loss_resistance


class NetworkCase(BaseModel):
    """Complete AC/DC grid description"""
    model_config = ConfigDict(frozen=True)

    name: str
    base: PerUnitBase
    ac_buses: List[AcBus]
    ac_lines: List[AcLine] = []
    dc_buses: List[DcBus] = []
    dc_lines: List[DcLine] = []
    converters: List[Converter] = []
    scenario: Optional[str] = None
    description: Optional[str] = None
