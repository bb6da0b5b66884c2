"""Versioned run configuration with ``paper`` and ``quick`` profiles."""
from __future__ import annotations

import copy
import json
from pathlib import Path

from .architectures import DEFAULT_ENCODER, QUICK_ENCODER, EncoderConfig
from .errors import InvalidConfig
from .training import TrainConfig

SCHEMA_VERSION = 1

_PAPER = {
    "schema_version": SCHEMA_VERSION,
    "profile": "paper",
    "seed": 0,
    "threads": None,
    "data_dir": None,
    "out_dir": None,
    "world": {"level": "realistic"},
    "encoder": DEFAULT_ENCODER.to_dict(),
    "segmentation": {"epochs": 30, "lr": 1e-5, "batch_size": 64, "n_patches": 4096, "n_val_patches": 512,
                     "min_cover": 0.01, "augment": True},
    "pointer": {"epochs": 30, "lr": 1e-5, "batch_size": 64, "val_fraction": 0.1, "augment": True},
    "classifier": {"epochs": 100, "lr": 1e-5, "batch_size": 64, "augment": True, "min_steps": 0},
    "mlp": {"epochs": 20, "lr": 1e-5, "batch_size": 64, "augment": False, "min_steps": 0},
    "fusion": {"epochs": 100, "lr": 1e-5, "batch_size": 64, "augment": True, "min_steps": 0},
    "low_data": {"fractions": [0.05, 0.2, 0.4, 0.6, 0.8, 1.0], "min_steps": 0},
    "gradcam": {"n_samples": 32},
    "validation": {"min_samples": 15, "exclude": [], "n_perm": 10000},
}

_QUICK_OVERRIDES = {
    "profile": "quick",
    "encoder": QUICK_ENCODER.to_dict(),
    "segmentation": {"epochs": 8, "lr": 1e-3, "batch_size": 32, "n_patches": 1024, "n_val_patches": 256},
    "pointer": {"epochs": 10, "lr": 1e-3, "batch_size": 32},
    "classifier": {"epochs": 10, "lr": 1e-3},
    "mlp": {"epochs": 20, "lr": 1e-3},
    "fusion": {"epochs": 10, "lr": 1e-3},
    "low_data": {"fractions": [0.05, 0.2, 1.0], "min_steps": 150},
}

PROFILES = ("paper", "quick")


def merge(base: dict, over: dict) -> dict:
    """Recursive dict merge; ``over`` wins."""
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def profile_defaults(profile: str) -> dict:
    if profile == "paper":
        return copy.deepcopy(_PAPER)
    if profile == "quick":
        return merge(_PAPER, _QUICK_OVERRIDES)
    raise InvalidConfig(f"profile must be one of {PROFILES}, got {profile!r}")


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Profile defaults, then the JSON file, then ``overrides`` (CLI flags)."""
    user = {}
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfig(f"cannot read config {path}: {exc}") from None
        if not isinstance(user, dict):
            raise InvalidConfig("config file must hold a JSON object")
    overrides = overrides or {}
    version = user.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise InvalidConfig(f"config schema_version {version} is not supported (expected {SCHEMA_VERSION})")
    profile = overrides.get("profile") or user.get("profile") or "paper"
    cfg = merge(merge(profile_defaults(profile), user), overrides)
    cfg["profile"] = profile
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    unknown = set(cfg) - set(_PAPER)
    if unknown:
        raise InvalidConfig(f"unknown config keys {sorted(unknown)}")
    encoder_config(cfg).validate()
    for section in ("segmentation", "pointer", "classifier", "mlp", "fusion"):
        train_config(cfg, section).validate()


def encoder_config(cfg: dict) -> EncoderConfig:
    try:
        return EncoderConfig(**cfg["encoder"])
    except TypeError as exc:
        raise InvalidConfig(f"bad encoder section: {exc}") from None


def train_config(cfg: dict, section: str, **extra) -> TrainConfig:
    sec = cfg[section]
    keys = {"epochs", "lr", "batch_size", "augment", "min_steps"}
    kw = {k: sec[k] for k in keys if k in sec}
    kw.update(extra)
    return TrainConfig(seed=int(cfg["seed"]), **kw)
