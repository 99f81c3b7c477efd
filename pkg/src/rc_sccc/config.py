"""Experiment configuration: TOML file merged over built-in defaults."""

import copy
import logging
import tomllib
from pathlib import Path

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULTS = {
    "code": {
        "K": 2000,
        "tables_dir": "",
        "interleaver": "random",
        "s": 0,
    },
    "simulation": {
        "n_iterations": 10,
        "max_log": False,
        "min_bit_errors": 100,
        "max_bits": 10_000_000,
        "batch_frames": 32,
        "record_iterations": False,
    },
    "exit": {
        "n_samples": 200_000,
        "ia_points": 21,
        "frame_length": 2000,
        "tolerance_db": 0.05,
        "d2_step": 10,
    },
    "bound": {
        "w_max": 8,
        "h_max": 40,
        "l_max": 40,
    },
    "optimizer": {
        "ref_snr_db": 4.0,
        "ref_rate": 0.5,
        "w_max": 6,
        "h_max": 20,
        "l_max": 20,
    },
    "resources": {
        "threads": 1,
        "memory_target": 0.6,
        "memory_spill": 0.7,
        "memory_pause": 0.8,
    },
}


def _merge(base: dict, update: dict) -> dict:
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
    return base


def load_config(config_file: Path | None = None) -> dict:
    """
    Load a TOML configuration and fill in everything it leaves out.
    A missing default file is not an error; an explicitly given one is.
    """
    config = copy.deepcopy(DEFAULTS)
    if config_file is None:
        return config

    config_file = Path(config_file)
    if not config_file.exists():
        logger.info(f"No configuration file at {config_file}, using defaults")
        return config

    try:
        with open(config_file, "rb") as f:
            loaded = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"Cannot parse {config_file}: {e}") from e

    unknown = set(loaded) - set(DEFAULTS)
    if unknown:
        logger.warning(f"Ignoring unknown configuration sections: {sorted(unknown)}")

    logger.info(f"Loaded configuration from {config_file}")
    return _merge(config, loaded)


def override(config: dict, section: str, **values) -> dict:
    """Apply CLI values that were actually given (not None) to one section."""
    for key, value in values.items():
        if value is None:
            continue
        config[section][key] = value
        logger.info(f"Overriding {section}.{key} from CLI: {value}")
    return config
