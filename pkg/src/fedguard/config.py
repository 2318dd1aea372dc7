"""Typed experiment configuration with strict JSON parsing.

Config files are plain JSON objects. Unknown keys are rejected and every
validation error names the offending field path, e.g.
``adversary.fraction: must be < 1``. An empty object parses to the
full-default clean experiment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any

from .adversary import SCENARIOS, LaplaceParams
from .data import PARTITION_MODES, PartitionSpec
from .defense import DefenseConfig
from .errors import ConfigError, ParameterError
from .model import TrainConfig

DEFAULT_MASTER_SEED = 7


@dataclass(frozen=True)
class SyntheticSource:
    """Parameters of the built-in Gaussian-cluster corpus."""

    n_samples: int = 5000
    n_features: int = 20
    n_tags: int = 20
    separation: float = 4.0


@dataclass(frozen=True)
class CsvSource:
    """Parameters for ingesting a CSV corpus instead."""

    path: str = ""
    label_column: str = "label"
    benign_label: str = "normal"
    tag_column: str | None = None
    drop_columns: tuple[str, ...] = ()
    headerless_kdd: bool = False


@dataclass(frozen=True)
class AdversaryConfig:
    fraction: float = 0.0
    scenario: str = "controlled_clients"
    noise: LaplaceParams = field(default_factory=LaplaceParams)

    def __post_init__(self) -> None:
        if not 0 <= self.fraction < 1:
            raise ParameterError("fraction must be in [0, 1)")
        if self.scenario not in SCENARIOS:
            raise ParameterError(f"unknown scenario: {self.scenario!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; the master seed fully determines the output."""

    dataset: SyntheticSource | CsvSource = field(default_factory=SyntheticSource)
    n_clients: int = 10
    partition_mode: str = "by_tag"
    partition_proportions: tuple[float, ...] | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    defense: DefenseConfig = field(default_factory=DefenseConfig)
    max_rounds: int = 100
    convergence_tol: float = 1e-4
    patience: int = 5
    test_fraction: float = 0.2
    master_seed: int = DEFAULT_MASTER_SEED

    def __post_init__(self) -> None:
        if self.n_clients < 1:
            raise ParameterError("n_clients must be >= 1")
        if self.partition_mode not in PARTITION_MODES:
            raise ParameterError(f"unknown partition mode: {self.partition_mode!r}")
        if self.max_rounds < 0:
            raise ParameterError("max_rounds must be >= 0")
        if not self.convergence_tol > 0:
            raise ParameterError("convergence_tol must be positive")
        if self.patience < 1:
            raise ParameterError("patience must be >= 1")
        if not 0 < self.test_fraction < 1:
            raise ParameterError("test_fraction must be in (0, 1)")

    def partition_spec(self) -> PartitionSpec:
        return PartitionSpec(self.n_clients, self.partition_mode, self.partition_proportions)


# --- strict dict -> dataclass parsing -------------------------------------


def _reject_unknown(raw: dict[str, Any], allowed: set[str], path: str) -> None:
    unknown = sorted(set(raw) - allowed)
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(f"{where}: unknown key")


def _field(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _num(
    raw: dict[str, Any],
    key: str,
    default: float,
    path: str,
    *,
    integer: bool = False,
    minimum: float | None = None,
    maximum: float | None = None,
    min_open: bool = False,
    max_open: bool = False,
) -> Any:
    if key not in raw:
        return default
    value = raw[key]
    where = _field(path, key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: must be a number")
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{where}: must be an integer")
        value = int(value)
    if minimum is not None and (value <= minimum if min_open else value < minimum):
        op = ">" if min_open else ">="
        raise ConfigError(f"{where}: must be {op} {minimum}")
    if maximum is not None and (value >= maximum if max_open else value > maximum):
        op = "<" if max_open else "<="
        raise ConfigError(f"{where}: must be {op} {maximum}")
    return value


def _text(raw: dict[str, Any], key: str, default: Any, path: str, choices: tuple[str, ...] | None = None) -> Any:
    if key not in raw:
        return default
    value = raw[key]
    if not isinstance(value, str):
        raise ConfigError(f"{_field(path, key)}: must be a string")
    if choices is not None and value not in choices:
        raise ConfigError(f"{_field(path, key)}: must be one of {list(choices)}")
    return value


def _flag(raw: dict[str, Any], key: str, default: bool, path: str) -> bool:
    if key not in raw:
        return default
    value = raw[key]
    if not isinstance(value, bool):
        raise ConfigError(f"{_field(path, key)}: must be true or false")
    return value


def _parse_dataset(raw: Any) -> SyntheticSource | CsvSource:
    if raw is None:
        return SyntheticSource()
    if not isinstance(raw, dict):
        raise ConfigError("dataset: must be an object")
    kind = _text(raw, "kind", "synthetic", "dataset", choices=("synthetic", "csv"))
    if kind == "synthetic":
        _reject_unknown(raw, {"kind", "n_samples", "n_features", "n_tags", "separation"}, "dataset")
        return SyntheticSource(
            n_samples=_num(raw, "n_samples", 5000, "dataset", integer=True, minimum=2),
            n_features=_num(raw, "n_features", 20, "dataset", integer=True, minimum=1),
            n_tags=_num(raw, "n_tags", 20, "dataset", integer=True, minimum=1),
            separation=_num(raw, "separation", 4.0, "dataset", minimum=0, min_open=True),
        )
    allowed = {"kind", "path", "label_column", "benign_label", "tag_column", "drop_columns", "headerless_kdd"}
    _reject_unknown(raw, allowed, "dataset")
    path_value = _text(raw, "path", "", "dataset")
    if not path_value:
        raise ConfigError("dataset.path: required for csv datasets")
    tag_column = raw.get("tag_column")
    if tag_column is not None and not isinstance(tag_column, str):
        raise ConfigError("dataset.tag_column: must be a string or null")
    drops = raw.get("drop_columns", [])
    if not isinstance(drops, list) or not all(isinstance(d, str) for d in drops):
        raise ConfigError("dataset.drop_columns: must be a list of strings")
    return CsvSource(
        path=path_value,
        label_column=_text(raw, "label_column", "label", "dataset"),
        benign_label=_text(raw, "benign_label", "normal", "dataset"),
        tag_column=tag_column,
        drop_columns=tuple(drops),
        headerless_kdd=_flag(raw, "headerless_kdd", False, "dataset"),
    )


def _parse_noise(raw: Any) -> LaplaceParams:
    if raw is None:
        return LaplaceParams()
    if not isinstance(raw, dict):
        raise ConfigError("adversary.noise: must be an object")
    _reject_unknown(raw, {"b", "interpretation", "sensitivity", "mu"}, "adversary.noise")
    return LaplaceParams(
        b=_num(raw, "b", 0.005, "adversary.noise", minimum=0, min_open=True),
        interpretation=_text(raw, "interpretation", "epsilon", "adversary.noise", choices=("scale", "epsilon")),
        sensitivity=_num(raw, "sensitivity", 1.0, "adversary.noise", minimum=0, min_open=True),
        mu=_num(raw, "mu", 0.0, "adversary.noise"),
    )


def config_from_dict(raw: dict[str, Any]) -> ExperimentConfig:
    """Build a fully-defaulted config from a parsed JSON object."""
    if not isinstance(raw, dict):
        raise ConfigError("top level: must be an object")
    allowed = {
        "dataset", "n_clients", "partition", "train", "adversary", "defense",
        "max_rounds", "convergence_tol", "patience", "test_fraction", "master_seed",
    }
    _reject_unknown(raw, allowed, "")

    partition_raw = raw.get("partition")
    partition_mode = "by_tag"
    proportions: tuple[float, ...] | None = None
    if partition_raw is not None:
        if not isinstance(partition_raw, dict):
            raise ConfigError("partition: must be an object")
        _reject_unknown(partition_raw, {"mode", "proportions"}, "partition")
        partition_mode = _text(partition_raw, "mode", "by_tag", "partition", choices=PARTITION_MODES)
        props = partition_raw.get("proportions")
        if props is not None:
            if not isinstance(props, list) or not all(
                isinstance(p, (int, float)) and not isinstance(p, bool) for p in props
            ):
                raise ConfigError("partition.proportions: must be a list of numbers")
            proportions = tuple(float(p) for p in props)

    train_raw = raw.get("train")
    train = TrainConfig()
    if train_raw is not None:
        if not isinstance(train_raw, dict):
            raise ConfigError("train: must be an object")
        _reject_unknown(train_raw, {"learning_rate", "epochs", "batch_size"}, "train")
        train = TrainConfig(
            learning_rate=_num(train_raw, "learning_rate", 0.1, "train", minimum=0),
            epochs=_num(train_raw, "epochs", 1, "train", integer=True, minimum=0),
            batch_size=_num(train_raw, "batch_size", 32, "train", integer=True, minimum=1),
        )

    adversary_raw = raw.get("adversary")
    adversary = AdversaryConfig()
    if adversary_raw is not None:
        if not isinstance(adversary_raw, dict):
            raise ConfigError("adversary: must be an object")
        _reject_unknown(adversary_raw, {"fraction", "scenario", "noise"}, "adversary")
        adversary = AdversaryConfig(
            fraction=_num(adversary_raw, "fraction", 0.0, "adversary", minimum=0, maximum=1, max_open=True),
            scenario=_text(adversary_raw, "scenario", "controlled_clients", "adversary", choices=SCENARIOS),
            noise=_parse_noise(adversary_raw.get("noise")),
        )

    defense_raw = raw.get("defense")
    defense = DefenseConfig()
    if defense_raw is not None:
        if not isinstance(defense_raw, dict):
            raise ConfigError("defense: must be an object")
        _reject_unknown(
            defense_raw,
            {"enabled", "threshold", "k_max", "elbow_ratio", "exclude_flagged_per_round"},
            "defense",
        )
        defense = DefenseConfig(
            enabled=_flag(defense_raw, "enabled", True, "defense"),
            threshold=_num(defense_raw, "threshold", 20, "defense", integer=True, minimum=1),
            k_max=_num(defense_raw, "k_max", 5, "defense", integer=True, minimum=1),
            elbow_ratio=_num(defense_raw, "elbow_ratio", DefenseConfig().elbow_ratio, "defense", minimum=0, maximum=1, min_open=True, max_open=True),
            exclude_flagged_per_round=_flag(defense_raw, "exclude_flagged_per_round", True, "defense"),
        )

    return ExperimentConfig(
        dataset=_parse_dataset(raw.get("dataset")),
        n_clients=_num(raw, "n_clients", 10, "", integer=True, minimum=1),
        partition_mode=partition_mode,
        partition_proportions=proportions,
        train=train,
        adversary=adversary,
        defense=defense,
        max_rounds=_num(raw, "max_rounds", 100, "", integer=True, minimum=0),
        convergence_tol=_num(raw, "convergence_tol", 1e-4, "", minimum=0, min_open=True),
        patience=_num(raw, "patience", 5, "", integer=True, minimum=1),
        test_fraction=_num(raw, "test_fraction", 0.2, "", minimum=0, maximum=1, min_open=True, max_open=True),
        master_seed=_num(raw, "master_seed", DEFAULT_MASTER_SEED, "", integer=True),
    )


def validate_config(text: str) -> ExperimentConfig:
    """Parse JSON config text into a typed config with defaults filled."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return config_from_dict(raw)


def config_to_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    """Fully-resolved plain-dict form; round-trips through config_from_dict."""
    if isinstance(cfg.dataset, SyntheticSource):
        dataset: dict[str, Any] = {
            "kind": "synthetic",
            "n_samples": cfg.dataset.n_samples,
            "n_features": cfg.dataset.n_features,
            "n_tags": cfg.dataset.n_tags,
            "separation": cfg.dataset.separation,
        }
    else:
        dataset = {
            "kind": "csv",
            "path": cfg.dataset.path,
            "label_column": cfg.dataset.label_column,
            "benign_label": cfg.dataset.benign_label,
            "tag_column": cfg.dataset.tag_column,
            "drop_columns": list(cfg.dataset.drop_columns),
            "headerless_kdd": cfg.dataset.headerless_kdd,
        }
    return {
        "dataset": dataset,
        "n_clients": cfg.n_clients,
        "partition": {
            "mode": cfg.partition_mode,
            "proportions": list(cfg.partition_proportions) if cfg.partition_proportions else None,
        },
        "train": {
            "learning_rate": cfg.train.learning_rate,
            "epochs": cfg.train.epochs,
            "batch_size": cfg.train.batch_size,
        },
        "adversary": {
            "fraction": cfg.adversary.fraction,
            "scenario": cfg.adversary.scenario,
            "noise": {
                "b": cfg.adversary.noise.b,
                "interpretation": cfg.adversary.noise.interpretation,
                "sensitivity": cfg.adversary.noise.sensitivity,
                "mu": cfg.adversary.noise.mu,
            },
        },
        "defense": {
            "enabled": cfg.defense.enabled,
            "threshold": cfg.defense.threshold,
            "k_max": cfg.defense.k_max,
            "elbow_ratio": cfg.defense.elbow_ratio,
            "exclude_flagged_per_round": cfg.defense.exclude_flagged_per_round,
        },
        "max_rounds": cfg.max_rounds,
        "convergence_tol": cfg.convergence_tol,
        "patience": cfg.patience,
        "test_fraction": cfg.test_fraction,
        "master_seed": cfg.master_seed,
    }


def with_defense(cfg: ExperimentConfig, enabled: bool) -> ExperimentConfig:
    return replace(cfg, defense=replace(cfg.defense, enabled=enabled))


def with_seed(cfg: ExperimentConfig, master_seed: int) -> ExperimentConfig:
    return replace(cfg, master_seed=master_seed)
