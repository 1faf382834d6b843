"""Run configuration with flag > config file > default precedence."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Any, Optional

from .autoencoder import AutoencoderConfig
from .classifier import ARCHITECTURES, TrainConfig
from .data import SyntheticPopulationSpec
from .forest import RfConfig
from .nn import ClassWeights, OptimizerConfig


class ConfigError(ValueError):
    pass


SWEEP_VALUES = {
    "encoder_size": (16, 32, 64, 128),
    "architecture": tuple(ARCHITECTURES),
    "ratio": tuple(range(1, 11)),
}

# Scaled-down training for single-core CI runs; every other field keeps its default.
QUICK_PRESET: dict[str, Any] = {
    "encoded_size": 16,
    "ae_first_width": 64,
    "ae_epochs": 5,
    "hidden": (128, 64),
    "epochs": 10,
    "learning_rate": 0.01,
}


@dataclass(frozen=True)
class RunConfig:
    # data: either the three CSV paths plus a schema, or the synthetic spec
    schema_path: Optional[str] = None
    audience_path: Optional[str] = None
    universe_path: Optional[str] = None
    conversions_path: Optional[str] = None
    synthetic: SyntheticPopulationSpec = field(default_factory=SyntheticPopulationSpec)
    ratio: int = 4
    test_fraction: float = 0.2

    encoded_size: int = 32
    ae_first_width: int = 256
    ae_epochs: int = 100
    ae_learning_rate: float = 1e-3

    model: str = "dl"  # "dl" or "rf"
    architecture: str = "A4096"
    hidden: Optional[tuple[int, ...]] = None
    optimizer: str = "sgd_momentum"
    learning_rate: float = 1e-4
    momentum: float = 0.92
    batch_size: int = 256
    epochs: int = 100
    dropout_p: float = 0.5
    class_weight_ratio: Optional[float] = None  # w1/w0 with w0 = 1; None: inverse frequency
    threshold: float = 0.5

    rf_trees: int = 300
    rf_max_depth: int = 12
    rf_min_samples: float = 5
    rf_features_per_split: Optional[int] = None
    rf_weighted_gini: bool = False

    seeds: tuple[int, ...] = (0,)
    output_dir: str = "runs/default"

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.hidden is not None:
            object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.model not in ("dl", "rf"):
            raise ConfigError(f"model must be 'dl' or 'rf', got {self.model!r}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.hidden is None and self.architecture not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.architecture!r}; expected one of {list(ARCHITECTURES)}")
        if isinstance(self.ratio, bool) or int(self.ratio) != self.ratio or self.ratio < 1:
            raise ConfigError(f"ratio must be an integer >= 1, got {self.ratio!r}")
        if self.optimizer not in ("sgd_momentum", "adam", "adamw"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must be in (0, 1)")
        paths = [self.audience_path, self.universe_path, self.schema_path]
        if any(paths) and not all(paths):
            raise ConfigError("file input needs schema_path, audience_path and universe_path together")

    @property
    def uses_files(self) -> bool:
        return self.audience_path is not None

    def autoencoder_config(self, seed: int) -> AutoencoderConfig:
        return AutoencoderConfig(
            encoded_size=self.encoded_size,
            first_width=self.ae_first_width,
            epochs=self.ae_epochs,
            batch_size=self.batch_size,
            optimizer=OptimizerConfig.adam(self.ae_learning_rate),
            seed=seed,
        )

    def train_config(self, seed: int) -> TrainConfig:
        weights = None if self.class_weight_ratio is None else ClassWeights(1.0, float(self.class_weight_ratio))
        return TrainConfig(
            architecture=self.architecture,
            hidden=self.hidden,
            optimizer=OptimizerConfig(kind=self.optimizer, learning_rate=self.learning_rate, momentum=self.momentum),
            batch_size=self.batch_size,
            epochs=self.epochs,
            dropout_p=self.dropout_p,
            class_weights=weights,
            seed=seed,
        )

    def rf_config(self, seed: int) -> RfConfig:
        m = self.rf_min_samples
        return RfConfig(
            n_trees=self.rf_trees,
            max_depth=self.rf_max_depth,
            min_samples=int(m) if float(m).is_integer() else float(m),
            features_per_split=self.rf_features_per_split,
            weighted_gini=self.rf_weighted_gini,
            seed=seed,
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["synthetic"]["categorical_cardinalities"] = list(self.synthetic.categorical_cardinalities)
        d["seeds"] = list(self.seeds)
        if self.hidden is not None:
            d["hidden"] = list(self.hidden)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}
_SYNTH_FIELDS = {f.name for f in dataclasses.fields(SyntheticPopulationSpec)}


def _check_keys(d: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {unknown}")


def build_config(*layers: Optional[dict]) -> RunConfig:
    """Merge override dicts left to right over the defaults; later layers win.

    A ``synthetic`` entry is merged key by key, so a layer can change one
    field of the population spec without restating the rest. The key
    ``preset: "quick"`` expands to the quick-training overrides at the point
    where it appears.
    """
    merged: dict[str, Any] = {}
    synth: dict[str, Any] = {}
    for layer in layers:
        if not layer:
            continue
        layer = dict(layer)
        preset = layer.pop("preset", None)
        if preset is not None:
            if preset != "quick":
                raise ConfigError(f"unknown preset {preset!r}")
            merged.update(QUICK_PRESET)
        _check_keys(layer, _FIELDS, "config")
        if "synthetic" in layer:
            _check_keys(layer["synthetic"], _SYNTH_FIELDS, "synthetic")
            synth.update(layer.pop("synthetic"))
        merged.update({k: v for k, v in layer.items() if v is not None})
    try:
        return RunConfig(synthetic=SyntheticPopulationSpec(**synth), **merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config_file(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data
