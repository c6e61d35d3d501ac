"""
Case document parsing, scenario resolution and the bundled cases
"""
import copy
import json

import pytest

from conftest import FIVE_TERMINAL_SCENARIOS, THREE_TERMINAL_SCENARIOS
from acdc_plf.exceptions import CaseParseError, CaseValidationError
from acdc_plf.models.grid import ControlMode, DcBusKind
from acdc_plf.services.case_service import CaseService, bundled_case_path

DOC = {
    "name": "tiny",
    "base": {"s_ac_mva": 100.0, "u_ac_kv": 230.0},
    "ac_buses": [
        {"id": 1, "kind": "slack", "voltage_mag": 1.02},
        {"id": 2, "p_inject": -0.3, "q_inject": -0.1},
        {"id": 3, "p_inject": -0.2, "q_inject": -0.05},
    ],
    "ac_lines": [
        {"id": "L12", "from": 1, "to": 2, "r": 0.01, "x": 0.05},
        {"id": "L13", "from": 1, "to": 3, "r": 0.01, "x": 0.05},
    ],
    "dc_buses": [{"id": 1}, {"id": 2}],
    "dc_lines": [{"id": "D12", "from": 1, "to": 2, "r": 0.02}],
    "converters": [
        {"id": "C1", "pcc_bus": 2, "dc_bus": 1, "z_tr": [0.001, 0.1], "z_c": [0.001, 0.15],
         "loss_resistance": 0.005, "control": "Udc-Q", "setpoints": {"u_dc_ref": 1.0, "q_s_ref": 0.0}},
        {"id": "C2", "pcc_bus": 3, "dc_bus": 2, "z_tr": [0.001, 0.1], "z_c": [0.001, 0.15],
         "loss_estimate": {"p_ac": 1.0, "p_dc": 0.98}, "control": "P-Q",
         "setpoints": {"p_s_ref": 0.1, "q_s_ref": 0.02}},
    ],
    "stochastic": {"pv": [{"id": "PV3", "bus": 3, "alpha": 2.0, "beta": 3.0, "r_m_mw": 10.0}]},
    "scenarios": {
        "droop": {
            "description": "C2 on droop",
            "converters": {"C2": {"control": "droop-Q", "setpoints": {"u_dc_ref": 1.0, "p_dc_ref": 0.1, "k_droop": 0.05}}},
        },
        "double_pv": {"description": "twice the PV capacity", "stochastic_scale": 2.0},
    },
}


def _write(tmp_path, doc, name="tiny.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
    return path


def test_minimal_document_loads(tmp_path):
    case, spec = CaseService().load_case(_write(tmp_path, DOC))
    assert case.name == "tiny"
    assert case.scenario is None
    assert [b.kind for b in case.dc_buses] == [DcBusKind.CONST_V, DcBusKind.CONST_P]
    assert spec.pv[0].r_m_mw == 10.0


def test_loss_estimate_becomes_equivalent_resistance(tmp_path):
    case, _ = CaseService().load_case(_write(tmp_path, DOC))
    assert case.converters[1].loss_resistance == pytest.approx(0.045)


def test_zero_power_loss_estimate_is_a_validation_error(tmp_path):
    doc = copy.deepcopy(DOC)
    doc["converters"][1]["loss_estimate"] = {"p_ac": 0.0, "p_dc": 0.0}
    with pytest.raises(CaseValidationError) as info:
        CaseService().load_case(_write(tmp_path, doc))
    assert info.value.violations[0].rule == "invalid converter"
    assert info.value.violations[0].element_id == "C2"


def test_scenario_overrides_control_and_dc_bus_kind(tmp_path):
    case, _ = CaseService().load_case(_write(tmp_path, DOC), "droop")
    c2 = case.converters[1]
    assert c2.control is ControlMode.DROOP_Q
    assert c2.setpoints.k_droop == 0.05
    assert c2.setpoints.q_s_ref == 0.02
    assert case.dc_buses[1].kind is DcBusKind.DROOP
    assert case.scenario == "droop"


def test_scenario_scales_pv(tmp_path):
    _, spec = CaseService().load_case(_write(tmp_path, DOC), "double_pv")
    assert spec.pv[0].r_m_mw == pytest.approx(20.0)


def test_unknown_scenario(tmp_path):
    with pytest.raises(CaseValidationError) as info:
        CaseService().load_case(_write(tmp_path, DOC), "islanded")
    assert info.value.exit_code == 3
    assert info.value.violations[0].rule == "unknown scenario"


def test_override_of_unknown_converter(tmp_path):
    doc = copy.deepcopy(DOC)
    doc["scenarios"]["droop"]["converters"]["C9"] = {"control": "P-Q"}
    with pytest.raises(CaseValidationError) as info:
        CaseService().load_case(_write(tmp_path, doc), "droop")
    assert [v.element_id for v in info.value.violations] == ["C9"]


def test_malformed_json_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "name": "x",\n  oops\n}\n', encoding="utf-8")
    with pytest.raises(CaseParseError) as info:
        CaseService().load_case(path)
    assert info.value.details["line"] == 3
    assert info.value.exit_code == 2


def test_schema_error_reports_field(tmp_path):
    doc = copy.deepcopy(DOC)
    del doc["ac_lines"][0]["x"]
    with pytest.raises(CaseParseError) as info:
        CaseService().load_case(_write(tmp_path, doc))
    assert info.value.details["field"] == "ac_lines.0.x"


def test_unknown_keys_are_rejected(tmp_path):
    doc = copy.deepcopy(DOC)
    doc["ac_buses"][1]["voltage"] = 1.0
    with pytest.raises(CaseParseError):
        CaseService().load_case(_write(tmp_path, doc))


def test_missing_case_file(tmp_path):
    with pytest.raises(CaseParseError):
        CaseService().load_case(tmp_path / "absent.json")
    with pytest.raises(CaseParseError):
        CaseService().load_case("no_such_bundled_case")


def test_list_scenarios(tmp_path, case_service):
    assert CaseService().list_scenarios(_write(tmp_path, DOC)) == [
        ("droop", "C2 on droop"), ("double_pv", "twice the PV capacity")]
    names = [name for name, _ in case_service.list_scenarios("three_terminal")]
    assert set(names) == set(THREE_TERMINAL_SCENARIOS)


@pytest.mark.parametrize("name,scenario", [("three_terminal", s) for s in THREE_TERMINAL_SCENARIOS]
                         + [("five_terminal", s) for s in FIVE_TERMINAL_SCENARIOS])
def test_bundled_scenarios_are_valid(case_service, name, scenario):
    case, spec = case_service.load_case(name, scenario)
    assert case.scenario == scenario
    assert case.converters
    assert spec.pv


def test_explicit_dc_bus_kind_must_match_converter(tmp_path):
    doc = copy.deepcopy(DOC)
    doc["dc_buses"][1]["kind"] = "const_V"
    with pytest.raises(CaseValidationError) as info:
        CaseService().load_case(_write(tmp_path, doc))
    assert info.value.violations[0].rule == "dc bus kind mismatch"


def test_bundled_case_path():
    assert bundled_case_path("five_terminal").name == "five_terminal.json"
    with pytest.raises(CaseParseError) as info:
        bundled_case_path("seven_terminal")
    assert "three_terminal" in info.value.message
