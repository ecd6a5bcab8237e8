"""Run configuration files (TOML, ``schema_version = 1``).

Layout::

    schema_version = 1
    seeds = [0, 1, 2, 3, 4]

    [dataset]               # exactly one of: csv = "path"  /  [dataset.generate]
    train_fraction = 0.8
    [dataset.generate]
    num_classes = 10
    n_max = 2000
    imbalance_ratio = 50.0
    decay = "exponential"
    dims = 16
    cluster_separation = 3.0
    noise_sigma = 1.0
    seed = 0

    [training]              # TrainConfig fields; loss comes from [loss] / [[losses]]
    learning_rate = 0.01
    epochs = 100

    [loss]                  # used by `train`
    kind = "alpa"
    variant = "v2"

    [[losses]]              # used by `bench`, two or more entries
    kind = "ce"

    [output]
    dir = "runs/example"
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .datagen import LabeledDataset, LongTailProfile, generate, load_csv
from .losses import LossSpec
from .trainer import TrainConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


@dataclass
class RunConfig:
    path: Path
    seeds: list[int]
    train_fraction: float
    profile: Optional[LongTailProfile] = None
    csv_path: Optional[Path] = None
    training: dict = field(default_factory=dict)
    loss: Optional[LossSpec] = None
    losses: list[LossSpec] = field(default_factory=list)
    out_dir: Optional[Path] = None

    def load_dataset(self) -> LabeledDataset:
        if self.profile is not None:
            return generate(self.profile)
        return load_csv(self.csv_path)

    def train_config(self, loss: LossSpec, seed: int) -> TrainConfig:
        return TrainConfig(loss=loss, seed=seed, **self.training)

    def dataset_summary(self) -> dict:
        if self.profile is not None:
            out = {"source": "generate"}
            for f in fields(self.profile):
                val = getattr(self.profile, f.name)
                out[f.name] = getattr(val, "value", val)
            return out
        return {"source": "csv", "path": str(self.csv_path)}


def _loss_from(table, where: str) -> LossSpec:
    if not isinstance(table, dict):
        raise ConfigError(f"{where}: expected a table")
    try:
        return LossSpec.from_dict(table)
    except KeyError as exc:
        raise ConfigError(f"{where}: missing or unknown key {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None

    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{path}: schema_version must be {SCHEMA_VERSION}, got {version!r}")

    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise ConfigError(f"{path}: 'seeds' must be a non-empty list of integers")

    if "dataset" not in raw:
        raise ConfigError(f"{path}: missing key 'dataset'")
    ds = dict(raw["dataset"])
    train_fraction = float(ds.pop("train_fraction", 0.8))
    gen = ds.pop("generate", None)
    csv_path = ds.pop("csv", None)
    if ds:
        raise ConfigError(f"{path}: unknown key(s) in [dataset]: {', '.join(sorted(ds))}")
    if (gen is None) == (csv_path is None):
        raise ConfigError(f"{path}: [dataset] needs exactly one of 'csv' or [dataset.generate]")
    profile = None
    if gen is not None:
        try:
            profile = LongTailProfile(**gen)
        except TypeError as exc:
            raise ConfigError(f"{path}: [dataset.generate]: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"{path}: [dataset.generate]: {exc}") from None
    else:
        csv_path = (path.parent / csv_path).resolve()

    training = dict(raw.get("training", {}))
    allowed = {f.name for f in fields(TrainConfig)} - {"loss", "seed"}
    unknown = set(training) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) in [training]: {', '.join(sorted(unknown))}")

    loss = _loss_from(raw["loss"], f"{path}: [loss]") if "loss" in raw else None
    losses = [_loss_from(t, f"{path}: [[losses]] #{i + 1}")
              for i, t in enumerate(raw.get("losses", []))]

    out_dir = raw.get("output", {}).get("dir")
    if out_dir is not None:
        out_dir = Path(out_dir)

    try:
        TrainConfig(loss=LossSpec.bce(), **training)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: [training]: {exc}") from None

    return RunConfig(path=path, seeds=list(seeds), train_fraction=train_fraction,
                     profile=profile, csv_path=csv_path, training=training, loss=loss,
                     losses=losses, out_dir=out_dir)
