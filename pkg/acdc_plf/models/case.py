"""
JSON case document schema
"""
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from acdc_plf.models.grid import AcBusKind, ConverterSetpoints, DcBusKind
from acdc_plf.models.stochastic import StochasticSpec


class _Doc(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True, frozen=True)


class BaseDoc(_Doc):
    s_ac_mva: float = Field(..., gt=0, description="AC base power (MVA)")
    u_ac_kv: float = Field(..., gt=0, description="AC base line voltage (kV)")


class AcBusDoc(_Doc):
    id: int
    kind: AcBusKind = AcBusKind.PQ
    voltage_mag: float = 1.0
    voltage_ang_deg: float = 0.0
    p_inject: float = 0.0
    q_inject: float = 0.0


class AcLineDoc(_Doc):
    id: str
    from_bus: int = Field(..., alias="from")
    to_bus: int = Field(..., alias="to")
    r: float
    x: float
    b_shunt: float = 0.0


class DcBusDoc(_Doc):
    id: int
    kind: Optional[DcBusKind] = Field(None, description="Derived from the attached converter when omitted")
    voltage: float = 1.0
    p_inject: float = 0.0


class DcLineDoc(_Doc):
    id: str
    from_bus: int = Field(..., alias="from")
    to_bus: int = Field(..., alias="to")
    r: float


class LossEstimateDoc(_Doc):
    p_ac: float = Field(..., description="Rated AC-side active power (p.u.)")
    p_dc: float = Field(..., description="Corresponding DC-side power (p.u.)")


class ConverterDoc(_Doc):
    id: str
    pcc_bus: int
    dc_bus: int
    z_tr: Tuple[float, float] = (0.0, 0.0)
    b_f: float = 0.0
    z_c: Tuple[float, float] = (0.0, 0.0)
    loss_resistance: Optional[float] = None
    loss_estimate: Optional[LossEstimateDoc] = None
    control: Union[int, str]
    setpoints: ConverterSetpoints = ConverterSetpoints()


class ConverterOverride(_Doc):
    control: Optional[Union[int, str]] = None
    setpoints: Optional[ConverterSetpoints] = None
    pcc_bus: Optional[int] = None


class ScenarioDoc(_Doc):
    description: str = ""
    converters: Dict[str, ConverterOverride] = Field(default_factory=dict)
    add_ac_buses: List[AcBusDoc] = Field(default_factory=list)
    add_ac_lines: List[AcLineDoc] = Field(default_factory=list)
    remove_ac_lines: List[str] = Field(default_factory=list)
    stochastic: Optional[StochasticSpec] = Field(None, description="Replaces the case stochastic block")
    stochastic_scale: float = Field(1.0, ge=0, description="PV capacity multiplier")


class CaseDocument(_Doc):
    name: str
    description: str = ""
    synthetic: bool = False
    base: BaseDoc
    ac_buses: List[AcBusDoc]
    ac_lines: List[AcLineDoc] = Field(default_factory=list)
    dc_buses: List[DcBusDoc] = Field(default_factory=list)
    dc_lines: List[DcLineDoc] = Field(default_factory=list)
    converters: List[ConverterDoc] = Field(default_factory=list)
    stochastic: StochasticSpec = StochasticSpec()
    scenarios: Dict[str, ScenarioDoc] = Field(default_factory=dict)
    default_scenario: Optional[str] = None
