"""L2-regularized binary logistic regression, seeded mini-batch gradient
descent, early stopping on validation loss.

Everything is deterministic under a fixed config: weights start at zero
(the objective is convex, no symmetry to break), per-epoch reshuffling is
seeded from (seed, epoch), and model files serialize to byte-identical
JSON. Loss and sigmoid use log1p/exp guards so margins up to +-700 never
overflow.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from sickscan.corpus import Label, LabeledDataset
from sickscan.features import SparseVector, Vectorizer, vectorize_doc
from sickscan.weaklabel import LeakageDetected, TrainingAssembly, leakage_check


class LinearModelError(Exception):
    pass


class DimensionMismatch(LinearModelError):
    pass


class EmptyAssembly(LinearModelError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    l2_lambda: float = 1e-4
    batch_size: int = 64
    max_epochs: int = 50
    patience: int = 3
    seed: int = 0
    reshuffle_each_epoch: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience > self.max_epochs:
            raise ValueError("patience must not exceed max_epochs")

    def to_json(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "l2_lambda": self.l2_lambda,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "seed": self.seed,
            "reshuffle_each_epoch": self.reshuffle_each_epoch,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        return cls(**obj)


@dataclass(frozen=True)
class TrainingMeta:
    seed: int
    epochs_run: int
    final_val_loss: float
    config: TrainConfig

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "epochs_run": self.epochs_run,
            "final_val_loss": self.final_val_loss,
            "config": self.config.to_json(),
        }


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float
    vectorizer_ref: str
    training_meta: TrainingMeta

    def __post_init__(self):
        if not np.all(np.isfinite(self.weights)) or not math.isfinite(self.bias):
            raise ValueError("model parameters must be finite")

    @property
    def dim(self) -> int:
        return len(self.weights)

    def to_json(self) -> dict:
        return {
            "version": 1,
            "weights": [float(w) for w in self.weights],
            "bias": float(self.bias),
            "vectorizer_ref": self.vectorizer_ref,
            "training_meta": self.training_meta.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LinearModel":
        meta = obj["training_meta"]
        return cls(
            weights=np.asarray(obj["weights"], dtype=np.float64),
            bias=float(obj["bias"]),
            vectorizer_ref=obj["vectorizer_ref"],
            training_meta=TrainingMeta(
                seed=int(meta["seed"]),
                epochs_run=int(meta["epochs_run"]),
                final_val_loss=float(meta["final_val_loss"]),
                config=TrainConfig.from_json(meta["config"]),
            ),
        )


def _stable_sigmoid(margin: float) -> float:
    if margin >= 0:
        return 1.0 / (1.0 + math.exp(-margin))
    e = math.exp(margin)
    return e / (1.0 + e)


def _softplus(margin: np.ndarray) -> np.ndarray:
    # log(1 + e^m) without overflow for large |m|
    return np.maximum(margin, 0.0) + np.log1p(np.exp(-np.abs(margin)))


def _sigmoid(margin: np.ndarray) -> np.ndarray:
    out = np.empty_like(margin)
    pos = margin >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-margin[pos]))
    e = np.exp(margin[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _margins(
    weights: np.ndarray, bias: float, batch: Sequence[SparseVector]
) -> np.ndarray:
    margins = np.empty(len(batch))
    for i, v in enumerate(batch):
        if v.dim != len(weights):
            raise DimensionMismatch(f"vector dim {v.dim} != model dim {len(weights)}")
        margins[i] = weights[v.indices] @ v.values + bias
    return margins


def loss_and_gradient(
    weights: np.ndarray,
    bias: float,
    batch: Sequence[tuple[SparseVector, Label]],
    l2_lambda: float,
) -> tuple[float, np.ndarray, float]:
    """Mean binary cross-entropy plus (lambda/2) ||w||^2, with exact
    analytic gradients."""
    if not batch:
        raise ValueError("batch must be non-empty")
    vectors = [v for v, _ in batch]
    y = np.array([1.0 if label is Label.SICK else 0.0 for _, label in batch])
    margins = _margins(weights, bias, vectors)
    losses = _softplus(margins) - y * margins
    loss = float(np.mean(losses)) + 0.5 * l2_lambda * float(weights @ weights)
    residual = (_sigmoid(margins) - y) / len(batch)
    grad_w = l2_lambda * weights.copy()
    for r, v in zip(residual, vectors):
        np.add.at(grad_w, v.indices, r * v.values)
    grad_b = float(np.sum(residual))
    return loss, grad_w, grad_b


def model_loss(
    weights: np.ndarray,
    bias: float,
    vectors: Sequence[SparseVector],
    labels: Sequence[Label],
    l2_lambda: float = 0.0,
) -> float:
    batch = list(zip(vectors, labels))
    loss, _, _ = loss_and_gradient(weights, bias, batch, l2_lambda)
    return loss


def predict_proba(model: LinearModel, v: SparseVector) -> float:
    """Probability of the Sick label; stable for any margin magnitude."""
    if v.dim != model.dim:
        raise DimensionMismatch(f"vector dim {v.dim} != model dim {model.dim}")
    margin = float(model.weights[v.indices] @ v.values) + model.bias
    return _stable_sigmoid(margin)


def train(
    assembly: TrainingAssembly,
    validation: LabeledDataset,
    vectorizer: Vectorizer,
    config: TrainConfig,
) -> LinearModel:
    """Fit on the assembly, early-stop on validation loss, and return the
    weights from the best-validation-loss epoch (the zero init counts as
    the epoch-0 candidate, so max_epochs=0 returns it unchanged)."""
    if not assembly.docs:
        raise EmptyAssembly("training assembly has no documents")
    if not validation.docs:
        raise ValueError("validation set has no documents")
    report = leakage_check(assembly, [validation])
    if not report.clean:
        raise LeakageDetected(
            f"{len(report.collisions)} (text, lang) collisions between the "
            "assembly and the validation set"
        )

    train_vecs = [vectorize_doc(vectorizer, d) for d in assembly.docs]
    train_labels = [d.label for d in assembly.docs]
    val_vecs = [vectorize_doc(vectorizer, d) for d in validation.docs]
    val_labels = [d.label for d in validation.docs]

    dim = vectorizer.dim
    weights = np.zeros(dim)
    bias = 0.0

    best_val = model_loss(weights, bias, val_vecs, val_labels)
    best_weights = weights.copy()
    best_bias = bias
    stale = 0
    epochs_run = 0

    order = list(range(len(train_vecs)))
    for epoch in range(config.max_epochs):
        if config.reshuffle_each_epoch or epoch == 0:
            random.Random(f"{config.seed}:{epoch}").shuffle(order)
        for start in range(0, len(order), config.batch_size):
            rows = order[start : start + config.batch_size]
            batch = [(train_vecs[i], train_labels[i]) for i in rows]
            _, grad_w, grad_b = loss_and_gradient(
                weights, bias, batch, config.l2_lambda
            )
            weights -= config.learning_rate * grad_w
            bias -= config.learning_rate * grad_b
        epochs_run = epoch + 1
        val_loss = model_loss(weights, bias, val_vecs, val_labels)
        if val_loss < best_val:
            best_val = val_loss
            best_weights = weights.copy()
            best_bias = bias
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    return LinearModel(
        weights=best_weights,
        bias=best_bias,
        vectorizer_ref=vectorizer.content_hash(),
        training_meta=TrainingMeta(
            seed=config.seed,
            epochs_run=epochs_run,
            final_val_loss=best_val,
            config=config,
        ),
    )


def serialize_model(model: LinearModel) -> str:
    return json.dumps(model.to_json(), ensure_ascii=False, sort_keys=True)


def save_model(model: LinearModel, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_model(model), encoding="utf-8")
    return path


def load_model(path: Path | str) -> LinearModel:
    with open(path, encoding="utf-8") as fh:
        return LinearModel.from_json(json.load(fh))
