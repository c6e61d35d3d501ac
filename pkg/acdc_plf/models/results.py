"""
Result records of the probabilistic pipelines
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from acdc_plf.models.stochastic import CumulantSet


@dataclass(eq=False)
class DistributionCurve:
    """PDF and CDF of one variable on a grid"""
    variable: str
    x: np.ndarray
    pdf: np.ndarray
    cdf: np.ndarray
    mean: float
    std: float
    g: np.ndarray = field(default_factory=lambda: np.zeros(0))
    degenerate: bool = False
    series: bool = False
    clamped_pdf: int = 0
    clamped_cdf: int = 0
    warnings: List[str] = field(default_factory=list)


@dataclass(eq=False)
class InjectionMember:
    """One random injection: a marginal entering one column of W with a sign"""
    name: str
    source: str
    column: int
    sign: float
    marginal: Any
    group: Optional[str] = None


@dataclass(eq=False)
class CorrelationGroup:
    id: str
    members: List[int]
    matrix: np.ndarray


@dataclass(eq=False)
class InjectionMap:
    """All random injections of a case mapped onto injection columns"""
    labels: List[str]
    members: List[InjectionMember]
    groups: List[CorrelationGroup]
    deterministic: np.ndarray

    @property
    def expected(self) -> np.ndarray:
        out = self.deterministic.copy()
        for m in self.members:
            out[m.column] += m.sign * m.marginal.mean
        return out

    def grouped(self) -> set:
        return {k for g in self.groups for k in g.members}


@dataclass(eq=False)
class PlfResult:
    case_name: str
    scenario: Optional[str]
    variables: List[str]
    classes: List[str]
    base_values: np.ndarray
    cumulants: List[CumulantSet]
    curves: List[DistributionCurve]
    bands: Dict[str, Dict[str, float]]
    timings: Dict[str, float]
    seed: int
    options: Dict[str, Any]

    @property
    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.cumulants])

    @property
    def stds(self) -> np.ndarray:
        return np.array([c.std for c in self.cumulants])

    @property
    def total_time(self) -> float:
        return float(sum(self.timings.values()))

    def index(self, variable: str) -> int:
        return self.variables.index(variable)


@dataclass(eq=False)
class McsResult:
    case_name: str
    scenario: Optional[str]
    variables: List[str]
    classes: List[str]
    samples: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    curves: List[DistributionCurve]
    bands: Dict[str, Dict[str, float]]
    n_samples: int
    n_failed: int
    seed: int
    wall_time: float
    options: Dict[str, Any]

    def index(self, variable: str) -> int:
        return self.variables.index(variable)


@dataclass
class VariableMetrics:
    variable: str
    var_class: str
    eps_mu: Optional[float]
    eps_sigma: Optional[float]
    arms: Optional[float]
    tic: Optional[float]
    note: str = ""


@dataclass
class ClassMetrics:
    var_class: str
    count: int
    eps_mu_mean: Optional[float]
    eps_mu_max: Optional[float]
    eps_sigma_mean: Optional[float]
    eps_sigma_max: Optional[float]
    arms_mean: Optional[float]
    arms_max: Optional[float]
    tic: Optional[float]


@dataclass
class MetricsReport:
    variables: List[VariableMetrics]
    classes: List[ClassMetrics]
    bands: Dict[str, Dict[str, float]]
    cm_time: float
    mcs_time: float

    @property
    def timing_ratio(self) -> float:
        return self.cm_time / self.mcs_time if self.mcs_time > 0 else float("nan")

    def for_class(self, var_class: str) -> Optional[ClassMetrics]:
        return next((c for c in self.classes if c.var_class == var_class), None)
