"""Run configuration: TOML file plus command-line overrides.

Precedence is CLI flag > config file > built-in default. Secrets (the
remote provider API key) come from the environment only, never from the
config file.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from sickscan.features import TokenizerConfig
from sickscan.linear import TrainConfig


@dataclass
class RunConfig:
    # paths
    cache_dir: str = "artifacts/cache"
    models_dir: str = "artifacts"
    reports_dir: str = "reports"
    labeled_source: str = ""
    validation: str = ""
    pools: dict[str, str] = field(default_factory=dict)
    tests: dict[str, str] = field(default_factory=dict)
    # run
    seed: int = 13
    source_lang: str = "en"
    languages: list[str] = field(default_factory=lambda: ["en", "es"])
    target_lang: str = ""
    config_label: str = "EN_PLUS_T"
    threshold: float = 0.5
    grid_configs: list[str] = field(default_factory=lambda: ["EN_ONLY", "EN_PLUS_T"])
    model_name: str = "LogReg"
    # provider
    provider_kind: str = "identity"
    dictionary_dir: str = ""
    provider_endpoint: str = ""
    provider_api_key_env: str = ""
    provider_rps: float | None = None
    parallelism: int = 4
    # backend
    backend_kind: str = "linear_local"
    backend_endpoint: str = ""
    # features
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)
    min_df: int = 2
    # training
    train: TrainConfig = field(default_factory=TrainConfig)
    # language identification
    langid_model: str = ""


_SECTION_FIELDS = {
    "paths": (
        "cache_dir",
        "models_dir",
        "reports_dir",
        "labeled_source",
        "validation",
        "pools",
        "tests",
    ),
    "run": (
        "seed",
        "source_lang",
        "languages",
        "target_lang",
        "config_label",
        "threshold",
        "grid_configs",
        "model_name",
    ),
    "provider": (
        "provider_kind",
        "dictionary_dir",
        "provider_endpoint",
        "provider_api_key_env",
        "provider_rps",
        "parallelism",
    ),
    "backend": ("backend_kind", "backend_endpoint"),
    "langid": ("langid_model",),
}

_PROVIDER_KEY_ALIASES = {
    "kind": "provider_kind",
    "endpoint": "provider_endpoint",
    "api_key_env": "provider_api_key_env",
    "requests_per_second": "provider_rps",
}
_BACKEND_KEY_ALIASES = {"kind": "backend_kind", "endpoint": "backend_endpoint"}


def load_run_config(path: Path | str | None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    known = {f.name for f in fields(RunConfig)}
    for section, keys in _SECTION_FIELDS.items():
        table = raw.get(section, {})
        aliases = (
            _PROVIDER_KEY_ALIASES
            if section == "provider"
            else _BACKEND_KEY_ALIASES
            if section == "backend"
            else {}
        )
        for key, value in table.items():
            name = aliases.get(key, key)
            if name in keys and name in known:
                setattr(cfg, name, value)
    if "features" in raw:
        feats = dict(raw["features"])
        cfg.min_df = int(feats.pop("min_df", cfg.min_df))
        base = cfg.tokenizer.to_json()
        base.update(feats)
        cfg.tokenizer = TokenizerConfig.from_json(base)
    if "train" in raw:
        base = cfg.train.to_json()
        base.update(raw["train"])
        cfg.train = TrainConfig.from_json(base)
    if "seed" not in raw.get("train", {}):
        # the run seed drives training unless [train] pins its own
        base = cfg.train.to_json()
        base["seed"] = cfg.seed
        cfg.train = TrainConfig.from_json(base)
    return cfg


def apply_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Set every non-None override on the config; CLI flags win."""
    train_fields = {f.name for f in fields(TrainConfig)}
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "seed":
            cfg.seed = value
            base = cfg.train.to_json()
            base["seed"] = value
            cfg.train = TrainConfig.from_json(base)
        elif key in train_fields:
            base = cfg.train.to_json()
            base[key] = value
            cfg.train = TrainConfig.from_json(base)
        elif hasattr(cfg, key):
            setattr(cfg, key, value)
        else:
            raise ValueError(f"unknown config override {key!r}")
    return cfg
