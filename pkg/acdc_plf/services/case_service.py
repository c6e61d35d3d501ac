"""
Service for loading JSON case documents and resolving their scenarios
"""
import json
import logging
import math
from pathlib import Path
from typing import List, Optional, Tuple, Union

from pydantic import ValidationError

from acdc_plf.config import settings
from acdc_plf.exceptions import CaseParseError, CaseValidationError, Violation
from acdc_plf.models.case import CaseDocument, ConverterDoc, ScenarioDoc
from acdc_plf.models.grid import (
    AcBus,
    AcLine,
    ControlMode,
    Converter,
    DcBus,
    DcBusKind,
    DcLine,
    NetworkCase,
)
from acdc_plf.models.stochastic import StochasticSpec
from acdc_plf.services.grid_service import (
    classify_nodes,
    loss_equivalent_resistance,
    per_unit_bases,
    validate_case,
)
from acdc_plf.services.stochastic_service import scale_pv

logger = logging.getLogger(__name__)


def bundled_case_path(name: str) -> Path:
    path = settings.cases_path / f"{name}.json"
    if not path.exists():
        available = sorted(p.stem for p in settings.cases_path.glob("*.json"))
        raise CaseParseError(f"no bundled case '{name}' (available: {', '.join(available)})")
    return path


def resolve_case_path(case: Union[str, Path]) -> Path:
    """A file path, or the name of a bundled case"""
    path = Path(case)
    if path.exists():
        return path
    if path.suffix == "" and (settings.cases_path / f"{case}.json").exists():
        return bundled_case_path(str(case))
    raise CaseParseError(f"case file not found: {case}")


def _field_path(loc) -> str:
    return ".".join(str(part) for part in loc)


class CaseService:
    """Parse, scenario-resolve and validate case documents"""

    def read_document(self, path: Union[str, Path]) -> CaseDocument:
        path = resolve_case_path(path)
        text = path.read_text(encoding="utf-8")
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise CaseParseError(f"{path.name}: {e.msg} at line {e.lineno} column {e.colno}", line=e.lineno)
        try:
            return CaseDocument.model_validate(raw)
        except ValidationError as e:
            first = e.errors()[0]
            field = _field_path(first["loc"])
            raise CaseParseError(f"{path.name}: {field}: {first['msg']} ({e.error_count()} error(s))", field=field)

    def list_scenarios(self, path: Union[str, Path]) -> List[Tuple[str, str]]:
        doc = self.read_document(path)
        return [(name, scenario.description) for name, scenario in doc.scenarios.items()]

    def load_case(self, path: Union[str, Path], scenario: Optional[str] = None) -> Tuple[NetworkCase, StochasticSpec]:
        doc = self.read_document(path)
        name = scenario or doc.default_scenario
        overrides = ScenarioDoc()
        if name is not None:
            if name not in doc.scenarios:
                raise CaseValidationError([Violation("unknown scenario", "scenario", name,
                                                     f"case '{doc.name}' has no scenario '{name}'")])
            overrides = doc.scenarios[name]
        case = validate_case(self.build_case(doc, overrides, name))
        spec = overrides.stochastic if overrides.stochastic is not None else doc.stochastic
        spec = scale_pv(spec, overrides.stochastic_scale)
        logger.info("Loaded case %s (scenario %s): %d AC buses, %d DC buses, %d converters",
                    case.name, name, len(case.ac_buses), len(case.dc_buses), len(case.converters))
        return case, spec

    def build_case(self, doc: CaseDocument, overrides: ScenarioDoc, scenario: Optional[str] = None) -> NetworkCase:
        violations: List[Violation] = []
        unknown = set(overrides.converters) - {c.id for c in doc.converters}
        violations += [Violation("unknown converter", "scenario", cid, f"scenario overrides unknown converter '{cid}'")
                       for cid in sorted(unknown)]
        missing = set(overrides.remove_ac_lines) - {l.id for l in doc.ac_lines}
        violations += [Violation("unknown line", "scenario", lid, f"scenario removes unknown line '{lid}'")
                       for lid in sorted(missing)]

        converters = []
        for conv in doc.converters:
            try:
                converters.append(self._converter(conv, overrides))
            except ValueError as e:
                violations.append(Violation("invalid converter", "converter", conv.id, str(e)))
        if violations:
            raise CaseValidationError(violations)

        attached = {}
        for conv in converters:
            attached.setdefault(conv.dc_bus, conv)
        dc_buses = []
        for bus in doc.dc_buses:
            derived = classify_nodes(attached[bus.id].control).dc_kind if bus.id in attached else DcBusKind.PURE
            if bus.kind is not None and bus.id in attached and bus.kind != derived:
                violations.append(Violation("dc bus kind mismatch", "dc_bus", bus.id,
                                            f"kind {bus.kind.value} disagrees with converter "
                                            f"{attached[bus.id].id} ({derived.value})"))
            dc_buses.append(DcBus(id=bus.id, kind=bus.kind or derived, voltage=bus.voltage, p_inject=bus.p_inject))
        if violations:
            raise CaseValidationError(violations)

        removed = set(overrides.remove_ac_lines)
        return NetworkCase(
            name=doc.name,
            base=per_unit_bases(doc.base.s_ac_mva, doc.base.u_ac_kv),
            ac_buses=[
                AcBus(id=b.id, kind=b.kind, voltage_mag=b.voltage_mag, voltage_ang=math.radians(b.voltage_ang_deg),
                      p_inject=b.p_inject, q_inject=b.q_inject)
                for b in list(doc.ac_buses) + list(overrides.add_ac_buses)
            ],
            ac_lines=[
                AcLine(id=l.id, from_bus=l.from_bus, to_bus=l.to_bus, r=l.r, x=l.x, b_shunt=l.b_shunt)
                for l in list(doc.ac_lines) + list(overrides.add_ac_lines) if l.id not in removed
            ],
            dc_buses=dc_buses,
            dc_lines=[DcLine(id=l.id, from_bus=l.from_bus, to_bus=l.to_bus, resistance=l.r) for l in doc.dc_lines],
            converters=converters,
            scenario=scenario,
            description=doc.description,
        )

    def _converter(self, conv: ConverterDoc, overrides: ScenarioDoc) -> Converter:
        override = overrides.converters.get(conv.id)
        control = conv.control if override is None or override.control is None else override.control
        setpoints = conv.setpoints
        if override is not None and override.setpoints is not None:
            setpoints = setpoints.model_copy(update=override.setpoints.model_dump(exclude_none=True))
        pcc = conv.pcc_bus if override is None or override.pcc_bus is None else override.pcc_bus

        if conv.loss_resistance is not None:
            r_loss = conv.loss_resistance
        elif conv.loss_estimate is not None:
            r_loss = loss_equivalent_resistance(conv.loss_estimate.p_ac, conv.loss_estimate.p_dc)
        else:
            r_loss = 0.0
        return Converter(
            id=conv.id,
            pcc_bus=pcc,
            dc_bus=conv.dc_bus,
            transformer_impedance=conv.z_tr,
            filter_susceptance=conv.b_f,
            reactor_impedance=conv.z_c,
            loss_resistance=r_loss,
            control=ControlMode.parse(control),
            setpoints=setpoints,
        )
