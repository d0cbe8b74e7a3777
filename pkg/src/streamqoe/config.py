"""
Configuration loading and management for streamqoe.
"""

import copy
import hashlib
import json
import logging
import os
from pathlib import Path

import yaml

from .errors import ConfigError

logger = logging.getLogger(__name__)

BASE_DIR = Path(__file__).resolve().parent
CONFIG_FILE_NAME = "streamqoe.yaml"
DEFAULT_CONFIG_PATH = BASE_DIR / CONFIG_FILE_NAME
CONFIG_ENV_VAR = "STREAMQOE_YAML"

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
TARGET_TRANSFORMS = ("logit", "none")

# Set by load_config.
CONFIG_PATH_USED = None

DEFAULTS = {
    "logging": {"level": "INFO"},
    "split": {"ratios": [8, 1, 1], "seed": 0},
    "gbm": {
        "n_estimators": 200,
        "learning_rate": 0.1,
        "max_depth": 3,
        "min_samples_split": 10,
        "min_samples_leaf": 6,
        "max_features": "sqrt",
        "loss": "huber",
        "huber_quantile": 0.9,
        "criterion": "friedman_mse",
    },
    "lasso": {"alpha": 0.00005, "max_iter": 10000, "tol": 1.0e-8},
    "training": {"target_transform": "logit", "normalize": True},
}

# Sections that influence fitted models.
TRAINING_SECTIONS = ("split", "gbm", "lasso", "training")


def default_config():
    return copy.deepcopy(DEFAULTS)


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _require(condition, key, message):
    if not condition:
        raise ConfigError(f"{key} {message}")


def validate_config(config: dict) -> dict:
    """Check every known key; unknown sections or keys are rejected."""
    for section, values in config.items():
        _require(section in DEFAULTS, section, "is not a known configuration section")
        _require(isinstance(values, dict), section, "must be a mapping")
        for key in values:
            _require(key in DEFAULTS[section], f"{section}.{key}", "is not a known setting")

    level = config["logging"]["level"]
    _require(isinstance(level, str) and level.upper() in LOG_LEVELS, "logging.level",
             f"must be one of {', '.join(LOG_LEVELS)}, got: {level}")

    split = config["split"]
    ratios = split["ratios"]
    _require(isinstance(ratios, list) and len(ratios) == 3 and all(_is_int(r) and r >= 0 for r in ratios)
             and sum(ratios) > 0, "split.ratios", f"must be three non-negative integers, got: {ratios}")
    _require(_is_int(split["seed"]) and split["seed"] >= 0, "split.seed",
             f"must be a non-negative integer, got: {split['seed']}")

    gbm = config["gbm"]
    for key in ("n_estimators", "max_depth", "min_samples_split", "min_samples_leaf"):
        _require(_is_int(gbm[key]) and gbm[key] >= 0, f"gbm.{key}", f"must be a non-negative integer, got: {gbm[key]}")
    _require(gbm["max_depth"] >= 1, "gbm.max_depth", "must be at least 1")
    _require(gbm["min_samples_split"] >= 2, "gbm.min_samples_split", "must be at least 2")
    _require(gbm["min_samples_leaf"] >= 1, "gbm.min_samples_leaf", "must be at least 1")
    _require(_is_number(gbm["learning_rate"]) and gbm["learning_rate"] > 0, "gbm.learning_rate",
             f"must be a positive number, got: {gbm['learning_rate']}")
    _require(_is_number(gbm["huber_quantile"]) and 0 < gbm["huber_quantile"] <= 1, "gbm.huber_quantile",
             f"must lie in (0, 1], got: {gbm['huber_quantile']}")
    max_features = gbm["max_features"]
    _require(max_features in ("sqrt", "all") or (_is_int(max_features) and max_features >= 1),
             "gbm.max_features", f"must be 'sqrt', 'all' or a positive integer, got: {max_features}")
    _require(gbm["loss"] in ("huber", "squared_error"), "gbm.loss",
             f"must be 'huber' or 'squared_error', got: {gbm['loss']}")
    _require(gbm["criterion"] == "friedman_mse", "gbm.criterion", f"must be 'friedman_mse', got: {gbm['criterion']}")

    lasso = config["lasso"]
    _require(_is_number(lasso["alpha"]) and lasso["alpha"] >= 0, "lasso.alpha",
             f"must be a non-negative number, got: {lasso['alpha']}")
    _require(_is_int(lasso["max_iter"]) and lasso["max_iter"] >= 1, "lasso.max_iter",
             f"must be a positive integer, got: {lasso['max_iter']}")
    _require(_is_number(lasso["tol"]) and lasso["tol"] > 0, "lasso.tol", f"must be a positive number, got: {lasso['tol']}")

    training = config["training"]
    _require(training["target_transform"] in TARGET_TRANSFORMS, "training.target_transform",
             f"must be one of {', '.join(TARGET_TRANSFORMS)}, got: {training['target_transform']}")
    _require(isinstance(training["normalize"], bool), "training.normalize",
             f"must be a boolean, got: {type(training['normalize'])}")
    return config


def merge_config(overrides: dict | None) -> dict:
    """Defaults with the sections of `overrides` laid over them."""
    config = default_config()
    for section, values in (overrides or {}).items():
        if not isinstance(values, dict):
            raise ConfigError(f"{section} must be a mapping")
        config.setdefault(section, {}).update(values)
    return validate_config(config)


def load_config(config_path=None) -> dict:
    """Load configuration from YAML.

    Resolution order: explicit path, $STREAMQOE_YAML, ./streamqoe.yaml, the
    packaged defaults. A file requested explicitly (argument or environment)
    must exist.
    """
    global CONFIG_PATH_USED
    explicit = config_path is not None
    if config_path is None:
        env_path = os.getenv(CONFIG_ENV_VAR)
        cwd_default = Path.cwd() / CONFIG_FILE_NAME
        if env_path:
            explicit = True
            config_path = Path(env_path)
        elif cwd_default.exists():
            config_path = cwd_default
        else:
            config_path = DEFAULT_CONFIG_PATH
    config_path = Path(config_path)
    if not config_path.is_absolute():
        config_path = (Path.cwd() / config_path).resolve()

    try:
        with open(config_path, "r", encoding="utf-8") as f:
            loaded = yaml.safe_load(f) or {}
    except FileNotFoundError:
        if explicit:
            raise ConfigError(f"configuration file '{config_path}' not found")
        logger.warning(f"Configuration file '{config_path}' not found. Using defaults.")
        CONFIG_PATH_USED = None
        return default_config()
    except yaml.YAMLError as e:
        raise ConfigError(f"error parsing configuration file '{config_path}': {e}") from e

    if not isinstance(loaded, dict):
        raise ConfigError(f"configuration file '{config_path}' must contain a mapping")
    CONFIG_PATH_USED = config_path
    return merge_config(loaded)


# --- Config fingerprint ---

def get_config_fingerprint(config: dict) -> dict:
    """Return a stable, JSON-serializable representation of the training settings."""
    return {section: dict(sorted(config[section].items())) for section in TRAINING_SECTIONS}


def get_config_hash(config: dict) -> str:
    """Compute a hash of the training settings for model provenance."""
    payload = json.dumps(get_config_fingerprint(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
