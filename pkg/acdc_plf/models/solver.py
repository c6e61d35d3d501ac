"""
Models for the deterministic AC/DC power flow
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from acdc_plf.config import settings


class SolverOptions(BaseModel):
    """Newton-Raphson options"""
    model_config = ConfigDict(frozen=True)

    tolerance: float = Field(default=settings.solver_tolerance, gt=0, description="Max-abs mismatch target (p.u.)")
    max_iterations: int = Field(default=settings.solver_max_iterations, ge=1)
    flat_start: bool = Field(default=True, description="Start from 1.0 p.u. / 0 rad instead of case values")
    dense_limit: int = Field(default=settings.dense_solve_limit, ge=0,
                             description="Largest unknown count solved with dense LU")


@dataclass
class StateVector:
    """Voltages of every bus; the unknown subset is selected by the compiled network"""
    theta: np.ndarray
    u: np.ndarray
    u_dc: np.ndarray

    def copy(self) -> "StateVector":
        return StateVector(self.theta.copy(), self.u.copy(), self.u_dc.copy())


@dataclass
class JacobianMatrix:
    """
    Correction-equation matrix in (angle, dU/U, dUd/Ud) form.

    `blocks` maps a block label to its (row slice, column slice);
    `converter_part` holds the converter correction contributions alone.
    """
    matrix: Any
    converter_part: Any
    blocks: Dict[str, Tuple[slice, slice]]
    labels: List[str]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if hasattr(self.matrix, "toarray") else np.asarray(self.matrix)

    def block(self, label: str) -> np.ndarray:
        rows, cols = self.blocks[label]
        return self.dense()[rows, cols]

    def converter_block(self, label: str) -> np.ndarray:
        rows, cols = self.blocks[label]
        part = self.converter_part.toarray() if hasattr(self.converter_part, "toarray") else self.converter_part
        return part[rows, cols]


@dataclass
class IterationRecord:
    iteration: int
    max_mismatch: float
    ratio: Optional[float] = None


@dataclass
class ConverterResult:
    """Steady-state quantities of one station"""
    id: str
    control: str
    pcc_bus: int
    dc_bus: int
    p_s: float
    q_s: float
    p_dc: float
    loss_p: float
    loss_q: float
    u_c: float
    delta_c: float
    modulation_index: Optional[float]
    droop_residual: Optional[float] = None


@dataclass
class BranchFlow:
    kind: str
    id: str
    from_bus: int
    to_bus: int
    p_from: float
    p_to: float
    q_from: float = 0.0
    q_to: float = 0.0

    @property
    def loss(self) -> float:
        return self.p_from + self.p_to


@dataclass
class PowerFlowSolution:
    """Converged AC/DC operating point"""
    case_name: str
    state: StateVector
    p_calc: np.ndarray
    q_calc: np.ndarray
    pd_calc: np.ndarray
    converters: List[ConverterResult]
    ac_flows: List[BranchFlow]
    dc_flows: List[BranchFlow]
    jacobian: JacobianMatrix
    iteration_log: List[IterationRecord]
    converged: bool
    network: Any = field(repr=False, default=None)

    @property
    def iterations(self) -> int:
        return len(self.iteration_log) - 1

    @property
    def max_mismatch(self) -> float:
        return self.iteration_log[-1].max_mismatch

    @property
    def ac_loss(self) -> float:
        return float(sum(f.loss for f in self.ac_flows))

    @property
    def dc_loss(self) -> float:
        return float(sum(f.loss for f in self.dc_flows))

    @property
    def converter_loss(self) -> float:
        return float(sum(c.loss_p for c in self.converters))


@dataclass
class SensitivityModel:
    """Linearized relation between injections and state / monitored variables"""
    state_labels: List[str]
    injection_labels: List[str]
    variables: List[str]
    variable_classes: List[str]
    base_state: np.ndarray
    base_values: np.ndarray
    S_0: np.ndarray
    T_0: np.ndarray
    G_0: np.ndarray
    X_delta: np.ndarray
    H_delta: np.ndarray
    P_delta: np.ndarray
