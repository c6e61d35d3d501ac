"""
Models for stochastic injections, cumulants and correlated sampling
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from acdc_plf.exceptions import InvalidArgumentError

Side = Literal["ac", "dc"]
Quantity = Literal["p", "q"]


class BetaPvModel(BaseModel):
    """PV plant with Beta-distributed normalized output and zero reactive output"""
    model_config = ConfigDict(frozen=True)

    id: str
    bus: int
    side: Side = "ac"
    alpha: Optional[float] = Field(None, gt=0, description="Beta shape alpha")
    beta: Optional[float] = Field(None, gt=0, description="Beta shape beta")
    mean: Optional[float] = Field(None, description="Normalized mean, alternative to the shapes")
    std: Optional[float] = Field(None, description="Normalized std, alternative to the shapes")
    r_m_mw: Optional[float] = Field(None, gt=0, description="Maximum output R_M (MW)")
    r_max: Optional[float] = Field(None, gt=0, description="Maximum irradiance (kW/m2)")
    areas: List[float] = Field(default_factory=list, description="Module areas (m2)")
    efficiencies: List[float] = Field(default_factory=list, description="Module efficiencies")

    @model_validator(mode="after")
    def _check(self):
        if (self.alpha is None) != (self.beta is None):
            raise ValueError("give both alpha and beta")
        if self.alpha is None and (self.mean is None or self.std is None):
            raise ValueError("give alpha/beta or mean/std")
        if self.r_m_mw is None and self.r_max is None:
            raise ValueError("give r_m_mw or r_max with module areas and efficiencies")
        if any(not 0 < eta <= 1 for eta in self.efficiencies):
            raise ValueError("efficiencies must lie in (0, 1]")
        return self


class GaussianLoadModel(BaseModel):
    """Normally distributed demand; enters the network as a negative injection"""
    model_config = ConfigDict(frozen=True)

    id: str
    bus: int
    side: Side = "ac"
    p_mean: float
    p_std: float = Field(0.0, ge=0)
    q_mean: float = 0.0
    q_std: float = Field(0.0, ge=0)


class EmpiricalModel(BaseModel):
    """Historical samples or a monotone CDF table of an injection"""
    model_config = ConfigDict(frozen=True)

    id: str
    bus: int
    side: Side = "ac"
    quantity: Quantity = "p"
    sign: float = Field(1.0, description="+1 for generation, -1 for demand")
    samples: Optional[List[float]] = None
    cdf_values: Optional[List[float]] = None
    cdf_probabilities: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check(self):
        if self.samples is not None:
            if len(self.samples) < 2:
                raise ValueError("empirical model needs at least 2 samples")
        elif self.cdf_values is not None and self.cdf_probabilities is not None:
            probs = np.asarray(self.cdf_probabilities, dtype=float)
            vals = np.asarray(self.cdf_values, dtype=float)
            if len(probs) != len(vals) or len(probs) < 2:
                raise ValueError("CDF table needs matching value/probability lists of length >= 2")
            if np.any(np.diff(probs) <= 0) or np.any(np.diff(vals) < 0):
                raise ValueError("CDF table must be strictly increasing in probability")
            if probs[0] < 0 or probs[-1] > 1:
                raise ValueError("CDF probabilities must lie in [0, 1]")
        else:
            raise ValueError("give samples or a CDF table")
        return self


class ParametricModel(BaseModel):
    """Injection following a named scipy.stats distribution"""
    model_config = ConfigDict(frozen=True)

    id: str
    bus: int
    side: Side = "ac"
    quantity: Quantity = "p"
    sign: float = 1.0
    distribution: Literal["weibull_min", "lognorm", "gamma", "uniform", "triang"]
    params: Dict[str, float] = Field(default_factory=dict, description="Shape/loc/scale keyword arguments")


class CorrelationMember(BaseModel):
    model_config = ConfigDict(frozen=True)

    source: str
    quantity: Quantity = "p"


class CorrelationGroupSpec(BaseModel):
    """Members sharing a target correlation matrix C_W"""
    model_config = ConfigDict(frozen=True)

    id: str
    members: List[CorrelationMember]
    matrix: List[List[float]]


class StochasticSpec(BaseModel):
    """All random injections of a case"""
    model_config = ConfigDict(frozen=True)

    pv: List[BetaPvModel] = Field(default_factory=list)
    loads: List[GaussianLoadModel] = Field(default_factory=list)
    empirical: List[EmpiricalModel] = Field(default_factory=list)
    parametric: List[ParametricModel] = Field(default_factory=list)
    correlation_groups: List[CorrelationGroupSpec] = Field(default_factory=list)


@dataclass(frozen=True, eq=False)
class CumulantSet:
    """Cumulants gamma_1..gamma_K of one scalar quantity"""
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).copy()
        if values.ndim != 1 or values.size < 2:
            raise InvalidArgumentError("a cumulant set needs at least orders 1 and 2")
        if values[1] < 0:
            if values[1] < -1e-12 * max(1.0, abs(values[0]) ** 2):
                raise InvalidArgumentError(f"negative variance {values[1]}")
            values[1] = 0.0
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def order(self) -> int:
        return self.values.size

    @property
    def mean(self) -> float:
        return float(self.values[0])

    @property
    def variance(self) -> float:
        return float(self.values[1])

    @property
    def std(self) -> float:
        return float(np.sqrt(self.values[1]))

    def gamma(self, k: int) -> float:
        return float(self.values[k - 1])

    def affine(self, a: float, b: float = 0.0) -> "CumulantSet":
        """Cumulants of a*X + b"""
        powers = a ** np.arange(1, self.order + 1)
        out = self.values * powers
        out[0] += b
        return CumulantSet(out)

    def centered(self) -> "CumulantSet":
        return self.affine(1.0, -self.mean)

    def __add__(self, other: "CumulantSet") -> "CumulantSet":
        if other.order != self.order:
            raise InvalidArgumentError("cumulant orders differ")
        return CumulantSet(self.values + other.values)

    @classmethod
    def zeros(cls, order: int) -> "CumulantSet":
        return cls(np.zeros(order))


@dataclass
class Marginal:
    """Marginal distribution of one stochastic member (physical quantity, p.u.)"""
    name: str
    ppf: Callable[[np.ndarray], np.ndarray]
    cdf: Callable[[np.ndarray], np.ndarray]
    mean: float
    std: float
    is_gaussian: bool = False
    cumulants: Optional[Callable[[int], CumulantSet]] = None
    samples: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class CorrelationModel:
    """Correlation matrix with its lower-triangular factor G and B = G^-1"""
    members: List[str]
    C: np.ndarray
    G: np.ndarray
    B: np.ndarray


@dataclass
class NatafSampler:
    """Gaussian-copula sampler reproducing a target correlation between arbitrary marginals"""
    C_W: np.ndarray
    C_Q: np.ndarray
    G_Q: np.ndarray
    marginals: List[Marginal]
    seed: int
    stream: int = 0
    repaired: bool = False
    labels: List[str] = field(default_factory=list)
