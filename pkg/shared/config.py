"""
Configuration management for hypobv.
"""

import copy
import os
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, Field


class AppConfig(BaseModel):
    """Application configuration."""
    name: str = "hypobv"
    version: str = "1.0.0"
    debug: bool = False


class LoggingConfig(BaseModel):
    """Logging configuration."""
    level: str = "INFO"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    renderer: str = "console"  # console, json


class SymbolicConfig(BaseModel):
    """Test-function and bump settings."""
    bump_r1: float = 1.0
    bump_r2: float = 2.0
    bump_k_max: int = 12
    envelope_cutoff: float = 1e-16  # Gaussian envelope below this is treated as zero
    seminorm_points: int = 201  # grid points per axis
    max_derivative_order: int = 240  # Hermite recurrences stay finite below this


class WeightsConfig(BaseModel):
    """Weight-sequence toolkit settings."""
    p_max: int = 400
    min_p_max: int = 50
    asymp_one_factor: float = 10.0  # M within this factor of 1 counts as M ~ 1
    m1_tol: float = 1e-9
    m2_hold_rel: float = 0.02
    m2_fail_rel: float = 0.1
    m2star_n_max: int = 8
    m3_slope_margin: float = 0.05
    m4_tol: float = 0.05
    relation_prec_slope: float = 0.1
    relation_bounded_slope: float = 0.02
    floor_fit_exponents: Tuple[int, int] = (-40, 40)  # L = 2^(k/4) for k in range


class IndicesConfig(BaseModel):
    """Index computation and numeric check settings."""
    sphere_points: int = 100000
    seed: int = 20240607
    zero_threshold: float = 1e-8  # relative to coefficient scale
    witness_threshold: float = 1e-12
    r_min: float = 1.0
    r_max: float = 1e3
    radii: int = 31
    random_rays: int = 8
    growth_slope_tol: float = 0.03
    maximality_eps: float = 0.1
    condition_limit: float = 1e14


class ExtensionConfig(BaseModel):
    """Almost-zero extension settings."""
    window: Tuple[int, int] = (10, 4)  # dyadic t in [2^-10, 2^-4]
    x_box: Tuple[float, float] = (-4.0, 4.0)
    x_points: int = 161
    x_points_2d: int = 41
    cutoff_amplitude: Union[float, str] = "auto"  # 8 L1 H^b0 from the fits, or a number
    l_sweep_max: int = 6
    monotone_slack: float = 1e-6
    noise_floor: float = 1e-13
    order_cap: int = 120
    convergent_l: float = 8.0
    convergent_tol: float = 1e-14
    default_order: int = 8
    h_trend: List[float] = Field(default_factory=lambda: [0.25, 0.5, 1.0, 2.0, 4.0])


class BoundaryConfig(BaseModel):
    """Boundary-value and quadrature settings."""
    quad_tol: float = 1e-8
    x_radius: float = 12.0
    bv_t0: float = 0.25
    bv_steps: int = 12
    decay_factor: float = 1.5
    noise_tol: float = 1e-11
    richardson_max_order: int = 4
    gl_order: int = 16
    panel_levels: int = 8  # geometric grading 2^-levels .. around singular points
    stokes_order: int = 8
    stokes_r1: float = 0.0625
    stokes_r2: float = 0.125
    zero_solution_tol: float = 1e-8
    growth_window: Tuple[int, int] = (10, 2)
    fund_radius: float = 1.0
    fund_circle_nodes: int = 128
    fund_xi_max: float = 14.0
    fund_t_max: float = 6.0
    fund_eps: List[float] = Field(default_factory=lambda: [0.1, 0.05, 0.025, 0.0125, 0.00625])
    fund_eps_tol: float = 1e-6
    fund_delta_tol: float = 1e-3
    agreement_tol: float = 1e-3  # direct vs Stokes evaluator


class RunConfig(BaseModel):
    """Batch driver settings."""
    threads: int = 4
    seed: int = 20240607
    schema_version: str = "hypobv-report/1"


class Config(BaseModel):
    """Main configuration."""
    app: AppConfig = AppConfig()
    logging: LoggingConfig = LoggingConfig()
    symbolic: SymbolicConfig = SymbolicConfig()
    weights: WeightsConfig = WeightsConfig()
    indices: IndicesConfig = IndicesConfig()
    extension: ExtensionConfig = ExtensionConfig()
    boundary: BoundaryConfig = BoundaryConfig()
    run: RunConfig = RunConfig()


def apply_env_overrides(config: Config) -> Config:
    """Override configuration values from HYPOBV_* environment variables."""
    config.logging.level = os.getenv("HYPOBV_LOG_LEVEL", config.logging.level)
    config.logging.renderer = os.getenv("HYPOBV_LOG_RENDERER", config.logging.renderer)
    config.run.threads = int(os.getenv("HYPOBV_THREADS", str(config.run.threads)))
    config.run.seed = int(os.getenv("HYPOBV_SEED", str(config.run.seed)))
    config.boundary.quad_tol = float(os.getenv("HYPOBV_QUAD_TOL", str(config.boundary.quad_tol)))
    config.weights.p_max = int(os.getenv("HYPOBV_P_MAX", str(config.weights.p_max)))
    config.app.debug = os.getenv("HYPOBV_DEBUG", str(config.app.debug)).lower() == "true"
    return config


def load_config_from_env() -> Config:
    """Load configuration from environment variables only."""
    load_dotenv()
    return apply_env_overrides(Config())


def load_config_from_yaml(config_path: Optional[str] = None) -> Config:
    """Load configuration from YAML file, then apply environment overrides."""
    load_dotenv()
    config_path = config_path or os.getenv("HYPOBV_CONFIG", "config.yaml")

    if not os.path.exists(config_path):
        raise FileNotFoundError(f"Configuration file not found: {config_path}")

    with open(config_path, "r") as file:
        yaml_data = yaml.safe_load(file) or {}

    return apply_env_overrides(Config(**yaml_data))


def _deep_merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def with_overrides(config: Config, overrides: Optional[Dict[str, Any]]) -> Config:
    """Return a copy of config with a nested override block merged in."""
    if not overrides:
        return config
    return Config.model_validate(_deep_merge(config.model_dump(), overrides))


# Global configuration instance
_config: Optional[Config] = None


def get_config() -> Config:
    """Get the global configuration instance."""
    global _config

    scoped = _scoped.get()
    if scoped is not None:
        return scoped

    if _config is None:
        try:
            _config = load_config_from_yaml()
        except FileNotFoundError:
            # Fallback to environment-only configuration
            _config = load_config_from_env()

    return _config


def reload_config() -> Config:
    """Reload the configuration."""
    global _config
    _config = None
    return get_config()


# Per-job configuration, visible only inside the current context
_scoped: ContextVar[Optional[Config]] = ContextVar("hypobv_scoped_config", default=None)


@contextmanager
def config_scope(overrides: Optional[Dict[str, Any]]) -> Iterator[Config]:
    """Make get_config() return the global config merged with overrides until exit."""
    token = _scoped.set(with_overrides(get_config(), overrides))
    try:
        yield get_config()
    finally:
        _scoped.reset(token)
