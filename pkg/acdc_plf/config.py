"""
Configuration settings for the AC/DC probabilistic load flow tool
"""
from pathlib import Path

# Get the project root directory (parent of the package folder)
PROJECT_ROOT = Path(__file__).parent.parent.resolve()


class Settings:
    """Application settings"""

    # Application Info
    app_name: str = "acdc-plf"
    app_version: str = "1.0.0"

    # Case Settings
    cases_path: Path = PROJECT_ROOT / "acdc_plf" / "cases"
    default_case: str = "three_terminal"

    # Solver Settings
    solver_tolerance: float = 1e-8
    solver_max_iterations: int = 30
    dense_solve_limit: int = 500

    # Probabilistic Load Flow Settings
    cumulant_order: int = 8
    grid_points: int = 513
    grid_sigma_span: float = 6.0
    cumulant_sample_size: int = 100_000
    degenerate_std_tol: float = 1e-12
    series_warning_limit: float = 2.0
    metric_std_floor: float = 1e-6
    hermite_quadrature_order: int = 40

    # Sampling Settings
    sample_chunk_size: int = 256
    default_seed: int = 2024

    # Monte Carlo Settings
    mcs_samples: int = 10_000
    mcs_failed_limit: float = 0.05
    mcs_histogram_bins: int = 64

    # Voltage band thresholds (p.u.)
    ov_threshold: float = 1.05
    hi_threshold: float = 1.1
    lv_threshold: float = 0.9

    # Study Settings
    correlation_study_rhos: tuple = (0.2, 0.5, 0.8)
    penetration_study_scales: tuple = (0.5, 1.0, 1.5, 2.0)

    # Output Settings
    csv_float_format: str = "%.8e"
    band_highlight_probability: float = 0.01


# Create global settings instance
settings = Settings()
