import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from dotenv import load_dotenv

from src.criteria import DivergenceWeights, Tolerances
from src.detector import DetectorConfig, PriorMode
from src.errors import ConfigError, ValidationError
from src.kinematics import RoverGeometry

load_dotenv()

# --- Project Paths ---
# The absolute path to the repository root
BASE_DIR = Path(__file__).resolve().parent.parent

# The four fitted likelihood models shipped with the detector
DEFAULT_MODEL_PATH = BASE_DIR / "models" / "default_model.json"
DEFAULT_CONFIG_PATH = BASE_DIR / "config" / "default.yaml"

# Evaluation ledger (SQLite)
DB_PATH = Path(os.getenv("ENTRAP_DB", BASE_DIR / "entrapment_runs.db"))

# --- Trace Discovery ---
# `eval` crawls directories for files with these extensions
VALID_EXTENSIONS = {".jsonl"}

# --- Logging ---
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def configure_logging(level_name: Optional[str] = None) -> None:
    """Diagnostics go to stderr only; ENTRAP_LOG picks the level."""
    name = (level_name or os.getenv("ENTRAP_LOG") or "error").strip().lower()
    level = LOG_LEVELS.get(name)
    root = logging.getLogger()
    # Replace only our own handler; others (test capture, embedding apps) stay
    for handler in list(root.handlers):
        if getattr(handler, "_entrap", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler._entrap = True
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel(level if level is not None else logging.ERROR)
    if level is None:
        logging.getLogger(__name__).warning("Unknown ENTRAP_LOG level %r, using 'error'", name)


# --- Run Configuration ---
SECTIONS = {"geometry", "tolerances", "weights", "detector", "model", "simulator",
            "fit", "simulate", "detect", "eval"}


@dataclass(frozen=True)
class RunConfig:
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    model_path: Path = DEFAULT_MODEL_PATH
    noise_overrides: Dict[str, float] = field(default_factory=dict)
    commands: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    @property
    def geometry(self) -> RoverGeometry:
        return self.detector.geometry

    @property
    def tolerances(self) -> Tolerances:
        return self.detector.tolerances

    @property
    def weights(self) -> DivergenceWeights:
        return self.detector.weights

    @property
    def prior_mode(self) -> PriorMode:
        return self.detector.prior_mode

    def section(self, command: str) -> Dict[str, Any]:
        return self.commands.get(command, {})

    def option(self, command: str, key: str, flag_value: Any = None, default: Any = None) -> Any:
        """Flag wins over the config file, which wins over the built-in default."""
        if flag_value is not None:
            return flag_value
        return self.section(command).get(key, default)


def _mapping(data: Dict[str, Any], name: str) -> Dict[str, Any]:
    value = data.get(name) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"config section '{name}' must be a mapping")
    return value


def _build(cls, values: Dict[str, Any], name: str):
    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigError(f"config section '{name}': {e}")
    except ValidationError as e:
        raise ConfigError(str(e))


def run_config_from_dict(data: Dict[str, Any], base_dir: Path = BASE_DIR) -> RunConfig:
    unknown = sorted(set(data) - SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(unknown)}")

    geometry = _build(RoverGeometry, _mapping(data, "geometry"), "geometry")
    tolerance_values = {"characteristic_length": geometry.wheelbase}
    tolerance_values.update(_mapping(data, "tolerances"))
    tolerances = _build(Tolerances, tolerance_values, "tolerances")

    weights_value = data.get("weights", [1.0, 0.0, 0.0, 1.0])
    if not isinstance(weights_value, list):
        raise ConfigError("config 'weights' must be a row-major list of 4 numbers")
    weights = _build(DivergenceWeights, {"R": tuple(weights_value)}, "weights")

    detector_values = dict(_mapping(data, "detector"))
    detector_values.update(weights=weights, tolerances=tolerances, geometry=geometry)
    detector = _build(DetectorConfig, detector_values, "detector")

    model_path = Path(data.get("model") or DEFAULT_MODEL_PATH)
    if not model_path.is_absolute():
        model_path = base_dir / model_path

    simulator = _mapping(data, "simulator")
    noise = simulator.get("noise") or {}
    if not isinstance(noise, dict):
        raise ConfigError("config 'simulator.noise' must be a mapping")

    commands = {name: _mapping(data, name) for name in ("fit", "simulate", "detect", "eval")}
    return RunConfig(detector=detector, model_path=model_path, noise_overrides=dict(noise), commands=commands)


def load_run_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """Read a YAML run configuration; relative paths resolve against the file's folder."""
    if path is None:
        return run_config_from_dict({})
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    except yaml.YAMLError as e:
        raise ConfigError(f"config {path} is not valid YAML: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at the top level")
    return run_config_from_dict(data, base_dir=path.resolve().parent)
