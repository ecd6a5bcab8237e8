"""Small numpy models trained with Adam on any :class:`LossSpec`.

Two architectures are supported: ``linear`` (``z = x W^T + b``) and ``mlp1``
(one ReLU hidden layer). Gradients are hand-written reverse mode fed by the
analytic logit gradients from :mod:`alpalab.losses`.

Checkpoint layout (JSON)::

    {
      "format": "alpalab-checkpoint",
      "version": 1,
      "architecture": "linear" | "mlp1",
      "input_dim": int, "num_classes": int, "hidden_units": int | null,
      "params": {"W1": {"shape": [...], "data": [...]}, "b1": ..., "W2": ..., "b2": ...},
      "config": {... TrainConfig fields, loss as a mapping ...}
    }

Parameter arrays are stored flattened in C order.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from .datagen import LabeledDataset, kfold_indices
from .losses import LossSpec, batch_loss_from_logits
from .metrics import MetricsReport, evaluate


class Architecture(str, Enum):
    LINEAR = "linear"
    MLP1 = "mlp1"


@dataclass
class ModelParams:
    architecture: Architecture
    params: dict[str, np.ndarray]
    hidden_units: Optional[int] = None

    @property
    def names(self) -> list[str]:
        return ["W1", "b1"] if self.architecture is Architecture.LINEAR else ["W1", "b1", "W2", "b2"]

    @property
    def input_dim(self) -> int:
        return self.params["W1"].shape[1]

    @property
    def num_classes(self) -> int:
        return self.params[self.names[-1]].shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams(self.architecture, {k: v.copy() for k, v in self.params.items()},
                           self.hidden_units)


def init_model(input_dim: int, num_classes: int, architecture=Architecture.LINEAR,
               hidden_units: int = 32, init_scale: float = 1.0, seed: int = 0) -> ModelParams:
    """Weights uniform in ``[-s, s] / sqrt(fan_in)``, biases zero."""
    architecture = Architecture(architecture)
    rng = np.random.Generator(np.random.PCG64(seed))

    def layer(fan_out, fan_in):
        bound = init_scale / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=(fan_out, fan_in)), np.zeros(fan_out)

    if architecture is Architecture.LINEAR:
        w, b = layer(num_classes, input_dim)
        return ModelParams(architecture, {"W1": w, "b1": b})
    w1, b1 = layer(hidden_units, input_dim)
    w2, b2 = layer(num_classes, hidden_units)
    return ModelParams(architecture, {"W1": w1, "b1": b1, "W2": w2, "b2": b2}, hidden_units)


def _forward(model: ModelParams, x: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ValueError(f"expected features of shape (n, {model.input_dim}), got {x.shape}")
    p = model.params
    if model.architecture is Architecture.LINEAR:
        return x @ p["W1"].T + p["b1"], None
    pre = x @ p["W1"].T + p["b1"]
    hidden = np.maximum(pre, 0.0)
    return hidden @ p["W2"].T + p["b2"], (pre, hidden)


def forward(model: ModelParams, features) -> np.ndarray:
    """Logits, shape ``(n_samples, num_classes)``."""
    return _forward(model, features)[0]


def backward(model: ModelParams, features, dlogits) -> dict[str, np.ndarray]:
    """Parameter gradients given ``dL/dz`` for every logit."""
    x = np.asarray(features, dtype=np.float64)
    logits, cache = _forward(model, x)
    dz = np.asarray(dlogits, dtype=np.float64)
    if dz.shape != logits.shape:
        raise ValueError(f"loss gradient shape {dz.shape} != logits shape {logits.shape}")
    if model.architecture is Architecture.LINEAR:
        return {"W1": dz.T @ x, "b1": dz.sum(axis=0)}
    pre, hidden = cache
    dh = (dz @ model.params["W2"]) * (pre > 0)
    return {
        "W1": dh.T @ x,
        "b1": dh.sum(axis=0),
        "W2": dz.T @ hidden,
        "b2": dz.sum(axis=0),
    }


def predict(model: ModelParams, features) -> np.ndarray:
    """Argmax over per-class sigmoid scores (equivalently over logits)."""
    return np.argmax(forward(model, features), axis=1)


@dataclass
class TrainConfig:
    loss: LossSpec
    learning_rate: float = 1e-4
    batch_size: int = 128
    epochs: int = 100
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 1e-3
    seed: int = 0
    init_scale: float = 1.0
    architecture: Architecture = Architecture.LINEAR
    hidden_units: int = 32

    def __post_init__(self):
        self.architecture = Architecture(self.architecture)
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.init_scale <= 0:
            raise ValueError("init_scale must be > 0")

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "loss"}
        out["architecture"] = self.architecture.value
        out["loss"] = self.loss.to_dict()
        return out


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros_like(cls, model: ModelParams) -> "AdamState":
        return cls(0, {k: np.zeros_like(a) for k, a in model.params.items()},
                   {k: np.zeros_like(a) for k, a in model.params.items()})


def adam_step(model: ModelParams, grads: dict[str, np.ndarray], state: AdamState,
              config: TrainConfig) -> None:
    """One in-place Adam update with decoupled weight decay."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"diverged: non-finite gradient for {name}")
    state.step += 1
    b1, b2, lr = config.adam_beta1, config.adam_beta2, config.learning_rate
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name in model.names:
        p, g = model.params[name], grads[name]
        if config.weight_decay:
            p -= lr * config.weight_decay * p
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + config.adam_eps)


@dataclass
class TrainHistory:
    """Per-epoch mean training loss and balanced accuracy on the eval set.

    The eval set is the validation set when one is passed to :func:`train`
    and the training set otherwise.
    """

    train_loss: list[float]
    eval_balanced_accuracy: list[float]
    model: ModelParams

    def to_dict(self) -> dict:
        return {"train_loss": self.train_loss,
                "eval_balanced_accuracy": self.eval_balanced_accuracy}


def _seeds(seed: int) -> tuple[int, int]:
    init_ss, shuffle_ss = np.random.SeedSequence(seed).spawn(2)
    return int(init_ss.generate_state(1)[0]), int(shuffle_ss.generate_state(1)[0])


def train(ds: LabeledDataset, config: TrainConfig,
          val: Optional[LabeledDataset] = None) -> TrainHistory:
    counts = ds.class_counts
    if np.any(counts == 0):
        empty = np.flatnonzero(counts == 0).tolist()
        raise ValueError(f"every class needs training samples; empty classes: {empty}")
    init_seed, shuffle_seed = _seeds(config.seed)
    model = init_model(ds.dims, ds.num_classes, config.architecture, config.hidden_units,
                       config.init_scale, init_seed)
    state = AdamState.zeros_like(model)
    rng = np.random.Generator(np.random.PCG64(shuffle_seed))
    x, targets = ds.features, ds.onehot()
    eval_ds = ds if val is None else val
    n = len(ds)
    losses, bal = [], []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        running = 0.0
        for step, start in enumerate(range(0, n, config.batch_size), start=1):
            idx = order[start:start + config.batch_size]
            xb = x[idx]
            with np.errstate(over="ignore", invalid="ignore"):
                logits = forward(model, xb)
            if not np.all(np.isfinite(logits)):
                raise FloatingPointError(f"diverged at epoch {epoch}, step {step}: non-finite logits")
            total, dz = batch_loss_from_logits(logits, targets[idx], config.loss, counts)
            if not math.isfinite(total):
                raise FloatingPointError(f"diverged at epoch {epoch}, step {step}: loss={total}")
            running += total * (idx.size if config.loss.reduction.value == "mean" else 1)
            adam_step(model, backward(model, xb, dz), state, config)
        losses.append(running / n)
        bal.append(evaluate(eval_ds.labels, predict(model, eval_ds.features),
                            ds.num_classes).balanced_accuracy)
    return TrainHistory(losses, bal, model)


def evaluate_model(model: ModelParams, ds: LabeledDataset) -> MetricsReport:
    return evaluate(ds.labels, predict(model, ds.features), ds.num_classes)


@dataclass
class CVResult:
    folds: list[MetricsReport]

    @property
    def mean_balanced_accuracy(self) -> float:
        return float(np.mean([f.balanced_accuracy for f in self.folds]))

    @property
    def mean_overall_accuracy(self) -> float:
        return float(np.mean([f.overall_accuracy for f in self.folds]))


def cross_validate(ds: LabeledDataset, config: TrainConfig, k: int = 5,
                   seed: Optional[int] = None) -> CVResult:
    """Stratified k-fold driver: train on k-1 folds, report on the held-out fold."""
    seed = config.seed if seed is None else seed
    reports = []
    for train_idx, val_idx in kfold_indices(ds, k, seed):
        tr, va = ds.subset(train_idx), ds.subset(val_idx)
        hist = train(tr, config, val=va)
        reports.append(evaluate_model(hist.model, va))
    return CVResult(reports)


# --- checkpoints ----------------------------------------------------------------


def save_checkpoint(model: ModelParams, config: TrainConfig, path) -> None:
    payload = {
        "format": "alpalab-checkpoint",
        "version": 1,
        "architecture": model.architecture.value,
        "input_dim": model.input_dim,
        "num_classes": model.num_classes,
        "hidden_units": model.hidden_units,
        "params": {
            name: {"shape": list(model.params[name].shape),
                   "data": model.params[name].ravel().tolist()}
            for name in model.names
        },
        "config": config.to_dict(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def load_checkpoint(path) -> tuple[ModelParams, TrainConfig]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != "alpalab-checkpoint":
        raise ValueError(f"{path}: not an alpalab checkpoint")
    params = {
        name: np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in payload["params"].items()
    }
    model = ModelParams(Architecture(payload["architecture"]), params, payload.get("hidden_units"))
    cfg = dict(payload["config"])
    cfg["loss"] = LossSpec.from_dict(cfg["loss"])
    return model, TrainConfig(**cfg)
