"""Single structured run configuration shared by all pipeline stages."""

from __future__ import annotations

import copy

import yaml

from .errors import ConfigInvalid

CONFIG_VERSION = 1

DEFAULTS = {
    "version": CONFIG_VERSION,
    "seed": 42,
    "simulate": {
        "profiles": ["urban_canyon", "suburban", "open_sky"],
        "sessions_per_profile": 10,
        "epochs_per_session": 200,
        "rate_hz": 5.0,
        "noise_sigma_m": 1.0,
        "nlos_bias_mean_m": 30.0,
    },
    "train": {
        "hidden": 64,
        "learning_rate": 3e-3,
        "batch_size": 16,
        "max_epochs": 60,
        "patience": 8,
        "feature_mode": "full",
    },
    "evaluate": {
        "strategies": ["truth", "nn_full", "nn_residual", "fde_sota", "equal"],
        "fde": {
            "threshold": 3.0,
            "max_exclusions": 8,
            "min_retained": 6,
            "noise_sigma_m": 1.0,
        },
    },
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigInvalid(f"unknown config key '{where}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigInvalid(f"'{where}' must be a mapping")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def _validate(cfg: dict) -> None:
    if cfg["version"] != CONFIG_VERSION:
        raise ConfigInvalid(f"config version {cfg['version']} unsupported (want {CONFIG_VERSION})")
    sim = cfg["simulate"]
    if sim["sessions_per_profile"] < 3:
        raise ConfigInvalid("'simulate.sessions_per_profile' must be >= 3")
    if sim["rate_hz"] <= 0:
        raise ConfigInvalid("'simulate.rate_hz' must be > 0")
    if sim["epochs_per_session"] < 1:
        raise ConfigInvalid("'simulate.epochs_per_session' must be >= 1")
    if sim["noise_sigma_m"] < 0:
        raise ConfigInvalid("'simulate.noise_sigma_m' must be >= 0")
    if sim["nlos_bias_mean_m"] < 0:
        raise ConfigInvalid("'simulate.nlos_bias_mean_m' must be >= 0")
    from .sim import PROFILES

    for p in sim["profiles"]:
        if p not in PROFILES:
            raise ConfigInvalid(f"'simulate.profiles' entry {p!r} not one of {PROFILES}")
    tr = cfg["train"]
    if tr["feature_mode"] not in ("full", "residual"):
        raise ConfigInvalid("'train.feature_mode' must be 'full' or 'residual'")
    if tr["max_epochs"] < 1 or tr["batch_size"] < 1 or tr["hidden"] < 1:
        raise ConfigInvalid("'train' sizes must be >= 1")
    if tr["patience"] < 0:
        raise ConfigInvalid("'train.patience' must be >= 0")
    if tr["learning_rate"] <= 0:
        raise ConfigInvalid("'train.learning_rate' must be > 0")
    ev = cfg["evaluate"]
    from .evaluation import STRATEGIES

    for s in ev["strategies"]:
        if s not in STRATEGIES:
            raise ConfigInvalid(f"'evaluate.strategies' entry {s!r} not one of {STRATEGIES}")
    if ev["fde"]["threshold"] <= 0:
        raise ConfigInvalid("'evaluate.fde.threshold' must be > 0")


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Merge file + overrides onto defaults, validating every key."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigInvalid("config file must contain a mapping")
        cfg = _merge(cfg, data)
    if overrides:
        cfg = _merge(cfg, overrides)
    _validate(cfg)
    return cfg
