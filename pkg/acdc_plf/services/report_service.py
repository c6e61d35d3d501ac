"""
Service for writing result tables as CSV with self-describing headers,
plus the stage timings of a run
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from acdc_plf.config import settings
from acdc_plf.models.results import McsResult, MetricsReport, PlfResult
from acdc_plf.models.solver import PowerFlowSolution

logger = logging.getLogger(__name__)

BAND_COLUMNS = ("ovp", "lvp_hi", "lvp_lo")

# Options that do not change results stay out of file headers
_VOLATILE_OPTIONS = ("workers", "out", "xlsx")


def flow_tables(solution: PowerFlowSolution) -> Dict[str, pd.DataFrame]:
    net = solution.network
    state = solution.state
    buses = pd.DataFrame({
        "side": ["ac"] * net.n_ac + ["dc"] * net.n_dc,
        "bus": list(net.ac_ids) + list(net.dc_ids),
        "kind": [("slack", "PV", "PQ")[k] for k in net.ac_kind] + [""] * net.n_dc,
        "voltage": np.concatenate([state.u, state.u_dc]),
        "angle_rad": np.concatenate([state.theta, np.zeros(net.n_dc)]),
        "p": np.concatenate([solution.p_calc, solution.pd_calc]),
        "q": np.concatenate([solution.q_calc, np.zeros(net.n_dc)]),
    })
    branches = pd.DataFrame([
        {"kind": f.kind, "id": f.id, "from": f.from_bus, "to": f.to_bus, "p_from": f.p_from, "p_to": f.p_to,
         "q_from": f.q_from, "q_to": f.q_to, "loss": f.loss}
        for f in solution.ac_flows + solution.dc_flows
    ], columns=["kind", "id", "from", "to", "p_from", "p_to", "q_from", "q_to", "loss"])
    converters = pd.DataFrame([
        {"id": c.id, "control": c.control, "pcc_bus": c.pcc_bus, "dc_bus": c.dc_bus, "p_s": c.p_s,
         "q_s": c.q_s, "p_dc": c.p_dc, "loss_p": c.loss_p, "loss_q": c.loss_q, "u_c": c.u_c,
         "delta_c": c.delta_c, "modulation_index": c.modulation_index, "droop_residual": c.droop_residual}
        for c in solution.converters
    ], columns=["id", "control", "pcc_bus", "dc_bus", "p_s", "q_s", "p_dc", "loss_p", "loss_q", "u_c",
                "delta_c", "modulation_index", "droop_residual"])
    iterations = pd.DataFrame([
        {"iteration": r.iteration, "max_mismatch": r.max_mismatch, "ratio": r.ratio}
        for r in solution.iteration_log
    ], columns=["iteration", "max_mismatch", "ratio"])
    return {
        "flow_buses": buses,
        "flow_branches": branches,
        "flow_converters": converters,
        "flow_iterations": iterations,
    }


def _bands_row(bands: Dict[str, Dict[str, float]], variable: str) -> Dict[str, Optional[float]]:
    values = bands.get(variable, {})
    return {k: values.get(k) for k in BAND_COLUMNS}


def _curves(curves) -> pd.DataFrame:
    return pd.DataFrame({
        "variable": np.concatenate([[c.variable] * c.x.size for c in curves]) if curves else [],
        "x": np.concatenate([c.x for c in curves]) if curves else [],
        "pdf": np.concatenate([c.pdf for c in curves]) if curves else [],
        "cdf": np.concatenate([c.cdf for c in curves]) if curves else [],
    })


def cm_tables(result: PlfResult) -> Dict[str, pd.DataFrame]:
    summary = pd.DataFrame([
        {"variable": name, "mean": c.mean, "std": c.std,
         "g3": curve.g[0] if curve.g.size > 0 else None,
         "g4": curve.g[1] if curve.g.size > 1 else None,
         **_bands_row(result.bands, name)}
        for name, c, curve in zip(result.variables, result.cumulants, result.curves)
    ], columns=["variable", "mean", "std", "g3", "g4", *BAND_COLUMNS])
    order = result.cumulants[0].order if result.cumulants else 0
    cumulants = pd.DataFrame(
        [[name, *c.values] for name, c in zip(result.variables, result.cumulants)],
        columns=["variable"] + [f"gamma{k}" for k in range(1, order + 1)],
    )
    return {"cm_summary": summary, "cm_curves": _curves(result.curves), "cm_cumulants": cumulants}


def mcs_tables(result: McsResult) -> Dict[str, pd.DataFrame]:
    summary = pd.DataFrame([
        {"variable": name, "mean": mean, "std": std, **_bands_row(result.bands, name)}
        for name, mean, std in zip(result.variables, result.means, result.stds)
    ], columns=["variable", "mean", "std", *BAND_COLUMNS])
    return {"mcs_summary": summary, "mcs_curves": _curves(result.curves)}


def metrics_tables(report: MetricsReport) -> Dict[str, pd.DataFrame]:
    band_keys = [f"{k}_{m}" for k in BAND_COLUMNS for m in ("cm", "mcs")]
    variables = pd.DataFrame([
        {"variable": v.variable, "class": v.var_class, "eps_mu": v.eps_mu, "eps_sigma": v.eps_sigma,
         "arms": v.arms, "tic": v.tic, **{k: report.bands.get(v.variable, {}).get(k) for k in band_keys},
         "note": v.note}
        for v in report.variables
    ], columns=["variable", "class", "eps_mu", "eps_sigma", "arms", "tic", *band_keys, "note"])
    classes = pd.DataFrame([
        {"class": c.var_class, "count": c.count, "eps_mu_mean": c.eps_mu_mean, "eps_mu_max": c.eps_mu_max,
         "eps_sigma_mean": c.eps_sigma_mean, "eps_sigma_max": c.eps_sigma_max, "arms_mean": c.arms_mean,
         "arms_max": c.arms_max, "tic": c.tic}
        for c in report.classes
    ], columns=["class", "count", "eps_mu_mean", "eps_mu_max", "eps_sigma_mean", "eps_sigma_max",
                "arms_mean", "arms_max", "tic"])
    return {"metrics_variables": variables, "metrics": classes}


class ReportService:
    """Writes every table of a run into one output directory"""

    def __init__(self, out_dir: Path, header: Dict[str, Any]):
        self.out_dir = Path(out_dir)
        self.header = header
        self.tables: Dict[str, pd.DataFrame] = {}
        self.written: List[Path] = []

    def header_lines(self, method: str) -> List[str]:
        options = {k: v for k, v in sorted(self.header.get("options", {}).items()) if k not in _VOLATILE_OPTIONS}
        return [
            f"# {settings.app_name} {settings.app_version}",
            f"# case: {self.header.get('case')}",
            f"# scenario: {self.header.get('scenario')}",
            f"# method: {method}",
            f"# seed: {self.header.get('seed')}",
            f"# options: {json.dumps(options, sort_keys=True, default=str)}",
        ]

    def write_tables(self, tables: Dict[str, pd.DataFrame], method: str) -> List[Path]:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, frame in tables.items():
            path = self.out_dir / f"{name}.csv"
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write("\n".join(self.header_lines(method)) + "\n")
                frame.to_csv(f, index=False, float_format=settings.csv_float_format, lineterminator="\n")
            paths.append(path)
            self.tables[name] = frame
            logger.debug("Wrote %s (%d rows)", path, len(frame))
        self.written += paths
        return paths

    def write_timings(self, timings: Dict[str, float]) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / "timings.json"
        with open(path, "w", encoding="utf-8") as f:
            json.dump({k: round(v, 6) for k, v in timings.items()}, f, indent=2)
        self.written.append(path)
        return path
