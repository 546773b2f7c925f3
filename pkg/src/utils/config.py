"""
Run Configuration
Loads the analysis configuration from YAML, the environment (.env) and
command-line overrides, in that order of increasing precedence.
"""

import logging
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import yaml
from dotenv import load_dotenv

from src.utils.exceptions import ConfigError

logger = logging.getLogger(__name__)

STRATEGY_NAMES = ("averaging", "random_sampling", "deep_ensembles")
SPACE_ALIASES = {
    "original": "isbi_original",
    "isbi_original": "isbi_original",
    "downsampled": "isbi_downsampled",
    "isbi_downsampled": "isbi_downsampled",
}

ENV_PREFIX = "LANDMARK_UQ_"


def _default_landmark_models() -> List[List[float]]:
    # [center_x_mm, center_y_mm, sigma_major_mm, sigma_minor_mm, rotation_deg]
    return [
        [80.0, 70.0, 1.5, 1.0, 0.0],
        [150.0, 60.0, 2.0, 1.0, 30.0],
        [120.0, 120.0, 1.2, 1.2, 0.0],
        [60.0, 110.0, 2.5, 1.5, -45.0],
        [110.0, 200.0, 1.8, 0.8, 60.0],
    ]


@dataclass
class SimulationSettings:
    """Parameters of the synthetic corpus used by the `simulate` command"""
    n_scans: int = 100
    n_landmarks: int = 5
    n_raters: int = 11
    mc_samples: int = 20
    ensemble_size: Optional[int] = None
    scan_scale_range: Tuple[float, float] = (0.5, 2.0)
    confidence_model: str = "spread_coupled"
    landmark_models: List[List[float]] = field(default_factory=_default_landmark_models)
    spread_factors: Dict[str, float] = field(default_factory=lambda: {
        "averaging": 1.5,
        "random_sampling": 0.7,
        "deep_ensembles": 0.5,
    })

    def __post_init__(self):
        for name in ("n_scans", "n_landmarks", "n_raters", "mc_samples"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"simulation.{name} must be >= 1, got {getattr(self, name)}")
        if self.ensemble_size is not None and self.ensemble_size < 1:
            raise ConfigError("simulation.ensemble_size must be >= 1")
        lo, hi = (float(v) for v in self.scan_scale_range)
        if not 0 < lo <= hi:
            raise ConfigError(f"simulation.scan_scale_range must satisfy 0 < lo <= hi, got {self.scan_scale_range}")
        self.scan_scale_range = (lo, hi)
        if self.confidence_model not in ("constant", "spread_coupled"):
            raise ConfigError(f"Unknown confidence model: {self.confidence_model}")
        if not self.landmark_models:
            raise ConfigError("simulation.landmark_models must not be empty")
        for row in self.landmark_models:
            if len(row) != 5:
                raise ConfigError(f"landmark model rows need 5 values (cx, cy, sigma_major, sigma_minor, rot_deg): {row}")
        unknown = set(self.spread_factors) - set(STRATEGY_NAMES)
        if unknown:
            raise ConfigError(f"Unknown strategies in spread_factors: {sorted(unknown)}")

    @property
    def resolved_ensemble_size(self) -> int:
        return self.ensemble_size or self.n_raters


@dataclass
class RunConfig:
    """Complete configuration of one analysis run"""
    corpus_path: Optional[str] = None
    samples: Dict[str, str] = field(default_factory=dict)
    output_dir: str = "output/analysis"
    seed: int = 42
    n_folds: int = 4
    bin_size: int = 5
    binning: str = "consecutive"
    thresholds_mm: List[float] = field(default_factory=lambda: [2.0, 2.5, 3.0, 4.0])
    epsilon_aniso: float = 1e-6
    epsilon_wcvar: float = 1e-6
    space: str = "isbi_original"
    gt_rater: Optional[str] = None
    heatmap_sigma_px: Optional[float] = None
    ellipse_k_sigma: float = 2.0
    landmark_names: List[str] = field(default_factory=list)
    landmark_subset: Optional[List[int]] = None
    schedule_iterations: int = 100
    log_level: str = "INFO"
    simulation: SimulationSettings = field(default_factory=SimulationSettings)

    def __post_init__(self):
        if isinstance(self.simulation, Mapping):
            self.simulation = SimulationSettings(**dict(self.simulation))
        self.space = SPACE_ALIASES.get(self.space, self.space)
        if self.space not in SPACE_ALIASES.values():
            raise ConfigError(f"Unknown coordinate space '{self.space}' (use original or downsampled)")
        unknown = set(self.samples) - set(STRATEGY_NAMES)
        if unknown:
            raise ConfigError(f"Unknown strategies {sorted(unknown)}; expected one of {list(STRATEGY_NAMES)}")
        if self.n_folds < 1:
            raise ConfigError(f"n_folds must be >= 1, got {self.n_folds}")
        if self.bin_size < 1:
            raise ConfigError(f"bin_size must be >= 1, got {self.bin_size}")
        if self.binning not in ("consecutive", "sorted"):
            raise ConfigError(f"binning must be 'consecutive' or 'sorted', got {self.binning}")
        self.thresholds_mm = [float(t) for t in self.thresholds_mm]
        if any(t <= 0 for t in self.thresholds_mm) or any(
            b <= a for a, b in zip(self.thresholds_mm, self.thresholds_mm[1:])
        ):
            raise ConfigError(f"thresholds must be positive and strictly ascending: {self.thresholds_mm}")
        for name in ("epsilon_aniso", "epsilon_wcvar", "ellipse_k_sigma"):
            if not float(getattr(self, name)) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.heatmap_sigma_px is not None and not float(self.heatmap_sigma_px) > 0:
            raise ConfigError(f"heatmap_sigma_px must be > 0 or null, got {self.heatmap_sigma_px}")
        if self.schedule_iterations < 1:
            raise ConfigError("schedule_iterations must be >= 1")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {sorted(unknown)}")
        try:
            return cls(**dict(data))
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid configuration: {e}") from e

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["simulation"]["scan_scale_range"] = list(self.simulation.scan_scale_range)
        return payload


def _env_overrides() -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if os.getenv(f"{ENV_PREFIX}OUTPUT_DIR"):
        overrides["output_dir"] = os.environ[f"{ENV_PREFIX}OUTPUT_DIR"]
    if os.getenv(f"{ENV_PREFIX}LOG_LEVEL"):
        overrides["log_level"] = os.environ[f"{ENV_PREFIX}LOG_LEVEL"].upper()
    if os.getenv(f"{ENV_PREFIX}SEED"):
        try:
            overrides["seed"] = int(os.environ[f"{ENV_PREFIX}SEED"])
        except ValueError as e:
            raise ConfigError(f"{ENV_PREFIX}SEED must be an integer") from e
    return overrides


def load_run_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Build a RunConfig from defaults, a YAML file, the environment and overrides

    Args:
        path: optional YAML configuration file
        overrides: values from the command line; None entries are ignored

    Returns:
        Validated RunConfig
    """
    load_dotenv()
    data: Dict[str, Any] = {}

    if path is not None:
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigError(f"Configuration file not found: {config_path}")
        with open(config_path, "r", encoding="utf-8") as f:
            try:
                loaded = yaml.safe_load(f) or {}
            except yaml.YAMLError as e:
                raise ConfigError(f"Invalid YAML in {config_path}: {e}") from e
        if not isinstance(loaded, dict):
            raise ConfigError(f"Configuration root in {config_path} must be a mapping")
        data.update(loaded)
        logger.debug(f"Loaded configuration from {config_path}")

    data.update(_env_overrides())

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "simulation" and isinstance(value, Mapping):
            merged = dict(data.get("simulation") or {})
            merged.update(value)
            data["simulation"] = merged
        elif key == "samples" and isinstance(value, Mapping):
            merged = dict(data.get("samples") or {})
            merged.update(value)
            data["samples"] = merged
        else:
            data[key] = value

    return RunConfig.from_dict(data)
