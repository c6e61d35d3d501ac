"""
Correlation-strength and PV-penetration studies
"""
import numpy as np
import pytest

from acdc_plf.exceptions import InvalidStochasticSpecError
from acdc_plf.models.options import McsOptions, PlfOptions
from acdc_plf.models.stochastic import StochasticSpec
from acdc_plf.services.study_service import StudyService, with_correlation


def test_with_correlation_sets_off_diagonals(three_terminal_correlated):
    _, spec = three_terminal_correlated
    changed = with_correlation(spec, 0.8)
    assert changed.correlation_groups[0].matrix == [[1.0, 0.8, 0.8], [0.8, 1.0, 0.8], [0.8, 0.8, 1.0]]
    assert spec.correlation_groups[0].matrix == [[1.0, 0.5, 0.5], [0.5, 1.0, 0.5], [0.5, 0.5, 1.0]]
    assert changed.pv == spec.pv


def test_with_correlation_needs_a_group(three_terminal_correlated):
    _, spec = three_terminal_correlated
    with pytest.raises(InvalidStochasticSpecError):
        with_correlation(StochasticSpec(), 0.5)
    with pytest.raises(InvalidStochasticSpecError):
        with_correlation(spec, 0.5, group="wind")


def test_correlation_study_table(three_terminal_correlated):
    case, spec = three_terminal_correlated
    table = StudyService().correlation_study(case, spec, rhos=(0.2, 0.8), variables=["U:12", "U:11"],
                                             options=PlfOptions(grid_points=65))
    assert list(table.columns) == ["rho", "variable", "mean", "std", "ovp", "lvp_hi", "lvp_lo"]
    assert len(table) == 4
    assert set(table["variable"]) == {"U:11", "U:12"}


@pytest.mark.slow
def test_voltage_spread_grows_with_correlation(three_terminal_correlated):
    case, spec = three_terminal_correlated
    table = StudyService().correlation_study(case, spec, variables=["U:12"])
    table = table.sort_values("rho")
    stds = table["std"].to_numpy()
    means = table["mean"].to_numpy()
    assert list(table["rho"]) == [0.2, 0.5, 0.8]
    assert np.all(np.diff(stds) >= 0)
    assert 0.20 <= stds[-1] / stds[0] - 1 <= 0.6
    assert np.ptp(means) / abs(means[0]) < 0.01


def test_penetration_study_rows(three_terminal):
    case, spec = three_terminal
    table = StudyService().penetration_study(
        case, spec, scales=(0.5, 2.0),
        plf_options=PlfOptions(grid_points=65, monitor=["U:*"]),
        mcs_options=McsOptions(samples=300, monitor=["U:*"]),
    )
    assert list(table["scale"]) == [0.5, 2.0]
    assert set(table["class"]) == {"U"}
    assert (table["arms_mean"] >= 0).all()
