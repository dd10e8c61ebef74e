"""Configuration loading and key-value parameter files for uwradio-loc."""

import copy
import logging
import os
import re
from pathlib import Path
from typing import Any, Optional

import yaml

from . import __version__
from .channel_model import DEFAULT_INTERCEPT_B, DEFAULT_NOISE_VAR, DEFAULT_SLOPE_A, DEFAULT_TX_POWER_DBM, ChannelModel
from .errors import DataError, DataFormatError
from .network import Rect
from .ranging import DEFAULT_SIGMA_D, BaseRanging, get_ranging
from .selfloc import SelfLocConfig
from .sim import DEFAULT_LOSS_LEVELS, DEFAULT_TRAJECTORY_STEP

logger = logging.getLogger(__name__)

CONFIG_FILENAME = "config.yaml"
USER_CONFIG_DIR = Path.home() / ".uwradio-loc"

DEFAULTS: dict = {
    "seed": 0,
    "channel": {
        "slope_a_db_per_m": DEFAULT_SLOPE_A,
        "intercept_b_db": DEFAULT_INTERCEPT_B,
        "noise_var_db2": DEFAULT_NOISE_VAR,
        "tx_power_dbm": DEFAULT_TX_POWER_DBM,
    },
    "measurements": {
        "sigma_d_m": DEFAULT_SIGMA_D,
        "ranging": "distance",
    },
    "selfloc": {
        "max_iters": 50,
        "inner_tol": 1e-9,
        "inner_max_iters": 50,
        "packet_loss_prob": 0.0,
        "proximal_tau": 0.0,
        "step_size": 1.0,
        "init_box": None,
    },
    "experiment": {
        "loss_levels": list(DEFAULT_LOSS_LEVELS),
        "n_seeds": 50,
    },
    "tracking": {
        "step_m": DEFAULT_TRAJECTORY_STEP,
        "sense_radius_m": None,
        "n_seeds": 1,
    },
}

MODEL_KEYS = ("slope_a_db_per_m", "intercept_b_db", "noise_var_db2")
RADII_KEYS = ("comm_radius_m", "sense_radius_m")


def expand_env_vars(value: str) -> str:
    """Expand environment variables in a string."""
    pattern = r'\$\{(\w+)\}'

    def replace(match):
        var_name = match.group(1)
        return os.environ.get(var_name, match.group(0))

    return re.sub(pattern, replace, value)


def expand_config(obj: Any) -> Any:
    """Recursively expand environment variables in config."""
    if isinstance(obj, str):
        return expand_env_vars(obj)
    elif isinstance(obj, dict):
        return {k: expand_config(v) for k, v in obj.items()}
    elif isinstance(obj, list):
        return [expand_config(item) for item in obj]
    return obj


def load_config(config_path: Path | str) -> dict:
    """
    Load configuration from YAML file.

    Parameters
    ----------
    config_path : Path | str
        Path to config.yaml file

    Returns
    -------
    dict
        Configuration dictionary with environment variables expanded
    """
    config_path = Path(config_path)
    if not config_path.exists():
        raise FileNotFoundError(f"Config file not found: {config_path}")

    with open(config_path, encoding="utf-8") as f:
        config = yaml.safe_load(f) or {}

    if not isinstance(config, dict):
        raise DataFormatError("top level must be a mapping", path=str(config_path))
    return expand_config(config)


def find_config(project_root: Path) -> Optional[Path]:
    """Project config.yaml, else the per-user one, else None."""
    for candidate in (project_root / CONFIG_FILENAME, USER_CONFIG_DIR / CONFIG_FILENAME):
        if candidate.exists():
            return candidate
    return None


def resolve_config(config: Optional[dict]) -> dict:
    """
    Merge a loaded config over the defaults.

    Unknown sections or keys are rejected so that typos do not silently fall
    back to defaults.
    """
    resolved = copy.deepcopy(DEFAULTS)
    for key, value in (config or {}).items():
        if key not in resolved:
            raise DataFormatError(f"unknown config section '{key}'")
        if isinstance(resolved[key], dict):
            if not isinstance(value, dict):
                raise DataFormatError(f"config section '{key}' must be a mapping")
            unknown = sorted(set(value) - set(resolved[key]))
            if unknown:
                raise DataFormatError(f"unknown keys in config section '{key}': {unknown}")
            resolved[key].update(value)
        else:
            resolved[key] = value
    return resolved


def flatten(config: dict, prefix: str = "") -> dict[str, Any]:
    """Flatten nested sections into dotted keys for output headers."""
    flat = {}
    for key, value in config.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, f"{name}."))
        else:
            flat[name] = value
    return flat


def parse_init_box(value: Any) -> Optional[Rect]:
    """Accept None, 'auto', [xmin, xmax, ymin, ymax] or 'xmin,xmax,ymin,ymax'."""
    if value is None or value == "auto":
        return None
    if isinstance(value, str):
        value = value.split(",")
    try:
        xmin, xmax, ymin, ymax = (float(v) for v in value)
    except (TypeError, ValueError) as e:
        raise DataFormatError(f"init_box must be four numbers xmin,xmax,ymin,ymax, got {value!r}") from e
    return Rect(xmin, xmax, ymin, ymax)


def selfloc_config(config: dict, seed: Optional[int] = None) -> SelfLocConfig:
    """Build a SelfLocConfig from the resolved ``selfloc`` section."""
    section = config["selfloc"]
    try:
        return SelfLocConfig(
            max_iters=int(section["max_iters"]),
            inner_tol=float(section["inner_tol"]),
            inner_max_iters=int(section["inner_max_iters"]),
            packet_loss_prob=float(section["packet_loss_prob"]),
            proximal_tau=float(section["proximal_tau"]),
            step_size=float(section["step_size"]),
            init_box=parse_init_box(section["init_box"]),
            seed=int(config["seed"] if seed is None else seed),
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, DataError):
            raise
        raise DataFormatError(f"invalid selfloc config: {e}") from e


def channel_model(config: dict) -> ChannelModel:
    """Channel model described by the resolved ``channel`` section."""
    section = config["channel"]
    return ChannelModel(
        float(section["slope_a_db_per_m"]),
        float(section["intercept_b_db"]),
        float(section["noise_var_db2"]),
    )


def ranging(config: dict) -> BaseRanging:
    """Ranging back end selected by ``measurements.ranging``."""
    return get_ranging(
        config["measurements"]["ranging"],
        sigma_d=float(config["measurements"]["sigma_d_m"]),
        model=channel_model(config),
        tx_power_dbm=float(config["channel"]["tx_power_dbm"]),
    )


def _header(title: str) -> str:
    return f"# uwradio-loc {__version__} {title}\n"


def _load_mapping(path: Path | str, keys: tuple[str, ...]) -> dict[str, float]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    with open(path, encoding="utf-8") as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise DataFormatError(f"not a key-value file: {e}", path=str(path)) from e
    if not isinstance(data, dict):
        raise DataFormatError("expected a key-value mapping", path=str(path))
    missing = [k for k in keys if k not in data]
    if missing:
        raise DataFormatError(f"missing keys {missing}", path=str(path))
    try:
        return {k: float(data[k]) for k in keys}
    except (TypeError, ValueError) as e:
        raise DataFormatError(f"non-numeric value: {e}", path=str(path)) from e


def _save_mapping(values: dict[str, float], path: Path | str, title: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(_header(title))
        yaml.safe_dump(values, f, sort_keys=False, default_flow_style=False)


def load_channel_model(path: Path | str) -> ChannelModel:
    """Read a channel-model file."""
    values = _load_mapping(path, MODEL_KEYS)
    return ChannelModel(values["slope_a_db_per_m"], values["intercept_b_db"], values["noise_var_db2"])


def save_channel_model(model: ChannelModel, path: Path | str) -> None:
    """Write a channel-model file that ``load_channel_model`` reads back exactly."""
    _save_mapping(model.to_dict(), path, "channel model")
    logger.info(f"Wrote channel model to {path}")


def radii_path(scenario_path: Path | str) -> Path:
    """Sidecar file holding a scenario's radii."""
    return Path(scenario_path).with_suffix(".yaml")


def load_radii(path: Path | str) -> tuple[float, float]:
    """Read (comm_radius, sense_radius) from a radii sidecar."""
    values = _load_mapping(path, RADII_KEYS)
    return values["comm_radius_m"], values["sense_radius_m"]


def save_radii(comm_radius: float, sense_radius: float, path: Path | str) -> None:
    _save_mapping(
        {"comm_radius_m": float(comm_radius), "sense_radius_m": float(sense_radius)},
        path,
        "scenario radii",
    )
