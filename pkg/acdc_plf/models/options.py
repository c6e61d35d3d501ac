"""
Run option models; defaults come from settings
"""
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from acdc_plf.config import settings
from acdc_plf.models.solver import SolverOptions


class PlfOptions(BaseModel):
    """Options of the cumulant probabilistic load flow"""
    model_config = ConfigDict(frozen=True)

    order: int = Field(settings.cumulant_order, ge=2, le=8, description="Highest cumulant order K")
    grid_points: int = Field(settings.grid_points, ge=33, description="Points per reconstructed curve")
    grid_span: float = Field(settings.grid_sigma_span, gt=0, description="Curve grid half-width in standard deviations")
    sample_size: int = Field(settings.cumulant_sample_size, ge=2,
                             description="Draws used when a cumulant has no closed form")
    seed: int = Field(settings.default_seed, ge=0)
    monitor: Optional[List[str]] = Field(None, description="Glob patterns of monitored variables")
    solver: SolverOptions = SolverOptions()


class McsOptions(BaseModel):
    """Options of the Monte Carlo oracle"""
    model_config = ConfigDict(frozen=True)

    samples: int = Field(settings.mcs_samples, ge=1)
    seed: int = Field(settings.default_seed, ge=0)
    workers: int = Field(1, ge=1)
    grid_points: int = Field(settings.grid_points, ge=33)
    grid_span: float = Field(settings.grid_sigma_span, gt=0)
    bins: int = Field(settings.mcs_histogram_bins, ge=2)
    failed_limit: float = Field(settings.mcs_failed_limit, ge=0, le=1)
    monitor: Optional[List[str]] = None
    solver: SolverOptions = SolverOptions()


Method = Literal["flow", "cm", "mcs", "compare", "correlation", "penetration"]


class RunConfig(BaseModel):
    """One command-line run"""
    model_config = ConfigDict(frozen=True)

    case: str = Field(settings.default_case, description="Case file path or bundled case name")
    scenario: Optional[str] = None
    method: Method = "compare"
    samples: int = Field(settings.mcs_samples, ge=1)
    seed: int = Field(settings.default_seed, ge=0)
    order: int = Field(settings.cumulant_order, ge=2, le=8)
    grid_points: int = Field(settings.grid_points, ge=33)
    monitor: Optional[List[str]] = None
    out: Path = Path("out")
    workers: int = Field(1, ge=1)
    xlsx: bool = False
    rhos: List[float] = Field(default_factory=lambda: list(settings.correlation_study_rhos))
    scales: List[float] = Field(default_factory=lambda: list(settings.penetration_study_scales))

    def plf_options(self) -> PlfOptions:
        return PlfOptions(order=self.order, grid_points=self.grid_points, seed=self.seed, monitor=self.monitor)

    def mcs_options(self) -> McsOptions:
        return McsOptions(samples=self.samples, seed=self.seed, workers=self.workers,
                          grid_points=self.grid_points, monitor=self.monitor)
