"""Trainable-network machinery: parameter store, backprop, Adam, training loop."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

from . import kernels
from .errors import ConfigError, DataError, TrainingDiverged
from .seeding import derive_rng

if TYPE_CHECKING:  # pragma: no cover
    from .models import Model, ModelSpec

Array = np.ndarray


class ParamStore:
    """Ordered map of named parameter tensors plus a parallel gradient map."""

    def __init__(self, params: dict[str, Array]):
        self.params: dict[str, Array] = {}
        for name, value in params.items():
            self.params[name] = np.asarray(value, dtype=np.float64)
        self.grads: dict[str, Array] = {
            name: np.zeros_like(value) for name, value in self.params.items()
        }

    def names(self) -> list[str]:
        return list(self.params)

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g[...] = 0.0

    def copy(self) -> "ParamStore":
        return ParamStore({name: v.copy() for name, v in self.params.items()})


def init_params(spec: "ModelSpec", seed: int) -> ParamStore:
    """He-uniform weights (bound sqrt(6/fan_in)), zero biases, seeded."""
    rng = derive_rng(seed, "init")
    params: dict[str, Array] = {}
    for name, (shape, fan_in) in spec.param_defs().items():
        if name.endswith(".bias"):
            params[name] = np.zeros(shape)
        else:
            bound = math.sqrt(6.0 / fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape)
    return ParamStore(params)


@dataclass
class AdamState:
    """Bias-corrected Adam moments, one (m, v) pair per parameter."""

    m: dict[str, Array]
    v: dict[str, Array]
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_store(cls, store: ParamStore, lr: float = 0.001, **kw) -> "AdamState":
        return cls(
            m={name: np.zeros_like(p) for name, p in store.params.items()},
            v={name: np.zeros_like(p) for name, p in store.params.items()},
            lr=lr,
            **kw,
        )


def adam_step(store: ParamStore, state: AdamState) -> None:
    """One in-place Adam update from the gradients currently in the store."""
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for name, p in store.params.items():
        g = store.grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int = 128
    lr: float = 0.001
    seed: int = 0
    target: str = "cp"
    view_loss_weight: float = 0.1
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not math.isfinite(self.view_loss_weight) or self.view_loss_weight < 0:
            raise ConfigError(
                f"view_loss_weight must be finite and >= 0, got {self.view_loss_weight}"
            )
        if self.target not in ("cp", "gi"):
            raise ConfigError(f"target must be 'cp' or 'gi', got {self.target!r}")


@dataclass
class LabeledImages:
    """Training/eval arrays: images (n,c,h,w), scores in [0,1], view class ids."""

    images: Array
    scores: Array
    views: Array

    def __len__(self) -> int:
        return self.images.shape[0]


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_rmse: Optional[float] = None


def backprop(
    model: "Model",
    images: Array,
    score_targets: Array,
    view_labels: Array,
    view_loss_weight: float,
    batch_index: Optional[int] = None,
):
    """Fill the model's gradient map for one batch; returns the total loss.

    Total loss is mse(score head) + weight * cross_entropy(view head). With
    weight = 0 the view loss is skipped entirely and training is pure
    regression.
    """
    scores, logits, trace = model.forward_trace(images)
    loss = kernels.mse_loss(scores, score_targets)
    d_scores = kernels.mse_loss_grad(scores, score_targets)
    if view_loss_weight != 0.0:
        loss += view_loss_weight * kernels.cross_entropy_loss(logits, view_labels)
        d_logits = view_loss_weight * kernels.cross_entropy_grad(logits, view_labels)
    else:
        d_logits = np.zeros_like(logits)
    if not math.isfinite(loss):
        raise TrainingDiverged(loss, batch_index=batch_index)
    model.backward(trace, d_scores, d_logits)
    return loss, model.store.grads


def train(
    model: "Model",
    data: LabeledImages,
    config: TrainConfig,
    val_data: Optional[LabeledImages] = None,
):
    """Mini-batch Adam training; returns (trained params, per-epoch history)."""
    n = len(data)
    if n == 0:
        raise DataError("training set is empty")
    rng = derive_rng(config.seed, "shuffle")
    state = AdamState.for_store(model.store, lr=config.lr)
    history: list[EpochStats] = []
    for epoch in range(config.epochs):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        total = 0.0
        for bi, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            try:
                loss, _ = backprop(
                    model,
                    data.images[idx],
                    data.scores[idx],
                    data.views[idx],
                    config.view_loss_weight,
                    batch_index=bi,
                )
            except TrainingDiverged as err:
                err.epoch = epoch
                raise
            adam_step(model.store, state)
            total += loss * len(idx)
        val_rmse = None
        if val_data is not None:
            val_rmse = _score_rmse(model, val_data)
        history.append(EpochStats(epoch, total / n, val_rmse))
    return model.store, history


def _score_rmse(model: "Model", data: LabeledImages, chunk: int = 256) -> float:
    """De-normalised score RMSE of the model over a labelled set."""
    errs = []
    for start in range(0, len(data), chunk):
        scores, _ = model.forward(data.images[start : start + chunk])
        truth = data.scores[start : start + chunk]
        errs.append((scores - truth) * model.score_scale)
    d = np.concatenate(errs)
    return float(np.sqrt(np.mean(d * d)))
