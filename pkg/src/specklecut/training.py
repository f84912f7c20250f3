"""Losses, Adam/Adamax optimization, and the mini-batch training loop.

The loop mirrors the original pipeline: seeded shuffling, augmentation on
the training split only, best-weights checkpointing on validation loss,
and early stopping after a patience window. Every random draw derives
from the config seed, so identical configs reproduce identical histories
bit for bit.
"""

from __future__ import annotations

import copy
import io
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .dataset import DatasetIndex, load_planes
from .errors import EmptyDataset, InvalidDistribution, ShapeMismatch
from .imaging import AugmentSpec, ChannelMode, augment

LOSS_EPS = 1e-12


@dataclass
class TrainConfig:
    optimizer: str = "adam"            # "adam" or "adamax"
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 256
    epochs: int = 100
    steps_per_epoch: int | None = None
    early_stop_patience: int = 10
    seed: int = 0
    loss: str = "categorical_ce"       # or "binary_ce"

    def __post_init__(self):
        if self.optimizer not in ("adam", "adamax"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch size and epochs must be >= 1")
        if self.early_stop_patience < 1:
            raise ValueError("patience must be >= 1")
        if self.loss not in ("categorical_ce", "binary_ce"):
            raise ValueError(f"unknown loss {self.loss!r}")

    def to_json(self) -> dict:
        return {"optimizer": self.optimizer,
                "learning_rate": self.learning_rate,
                "beta1": self.beta1, "beta2": self.beta2,
                "epsilon": self.epsilon, "batch_size": self.batch_size,
                "epochs": self.epochs, "steps_per_epoch": self.steps_per_epoch,
                "early_stop_patience": self.early_stop_patience,
                "seed": self.seed, "loss": self.loss}

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        return cls(**{k: obj[k] for k in cls().to_json() if k in obj})


@dataclass
class EpochRecord:
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("epoch,train_loss,train_acc,val_loss,val_acc\n")
        for i, rec in enumerate(self.epochs):
            buf.write(f"{i},{float(rec.train_loss)!r},{float(rec.train_acc)!r},"
                      f"{float(rec.val_loss)!r},{float(rec.val_acc)!r}\n")
        return buf.getvalue()


@dataclass
class OptimizerState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params) -> "OptimizerState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params])


# -------------------------------------------------------------------- losses

def categorical_cross_entropy(probs: np.ndarray, onehot: np.ndarray):
    """Loss and the fused softmax gradient (probs - onehot) w.r.t. logits."""
    probs = np.asarray(probs, dtype=np.float64)
    onehot = np.asarray(onehot, dtype=np.float64)
    if probs.shape != onehot.shape:
        raise ShapeMismatch("probability and one-hot vectors differ in shape")
    if abs(probs.sum() - 1.0) > 1e-4:
        raise InvalidDistribution("probabilities must sum to 1 within 1e-4")
    ones = onehot == 1.0
    if ones.sum() != 1 or not np.all((onehot == 0.0) | ones):
        raise InvalidDistribution("target must be one-hot")
    loss = -float(np.sum(onehot * np.log(np.maximum(probs, LOSS_EPS))))
    return loss, probs - onehot


def binary_cross_entropy(p: float, y: int):
    """Loss and the fused sigmoid gradient (p - y) w.r.t. the logit."""
    p_c = min(max(float(p), LOSS_EPS), 1.0 - LOSS_EPS)
    loss = -(y * np.log(p_c) + (1 - y) * np.log(1.0 - p_c))
    return float(loss), float(p) - float(y)


def _batch_loss_and_grad(probs: np.ndarray, labels: np.ndarray, loss: str):
    """Mean loss, mean fused logit gradient, and correct-count for a batch."""
    n = probs.shape[0]
    if loss == "binary_ce":
        p = np.clip(probs[:, 0].astype(np.float64), LOSS_EPS, 1 - LOSS_EPS)
        y = labels.astype(np.float64)
        total = float(-(y * np.log(p) + (1 - y) * np.log(1 - p)).sum())
        dlogits = ((probs[:, 0] - labels) / n).astype(probs.dtype)[:, None]
        correct = int(((probs[:, 0] > 0.5).astype(np.int64) == labels).sum())
    else:
        picked = probs[np.arange(n), labels].astype(np.float64)
        total = float(-np.log(np.maximum(picked, LOSS_EPS)).sum())
        onehot = np.zeros_like(probs)
        onehot[np.arange(n), labels] = 1
        dlogits = (probs - onehot) / probs.dtype.type(n)
        correct = int((probs.argmax(axis=1) == labels).sum())
    return total / n, dlogits, correct


# ----------------------------------------------------------------- optimizer

def adam_step(params, grads, state: OptimizerState, cfg: TrainConfig):
    """One bias-corrected Adam (or Adamax) update, in place."""
    if len(params) != len(grads):
        raise ShapeMismatch("parameter and gradient lists differ in length")
    state.t += 1
    t = state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeMismatch(
                f"gradient shape {g.shape} != parameter shape {p.shape}")
        state.m[i] = cfg.beta1 * state.m[i] + (1 - cfg.beta1) * g
        if cfg.optimizer == "adamax":
            state.v[i] = np.maximum(cfg.beta2 * state.v[i], np.abs(g))
            step = (cfg.learning_rate / (1 - cfg.beta1 ** t)) \
                * state.m[i] / (state.v[i] + cfg.epsilon)
        else:
            state.v[i] = cfg.beta2 * state.v[i] + (1 - cfg.beta2) * (g * g)
            m_hat = state.m[i] / (1 - cfg.beta1 ** t)
            v_hat = state.v[i] / (1 - cfg.beta2 ** t)
            step = cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
        p -= step.astype(p.dtype, copy=False)
    return params, state


# -------------------------------------------------------------- fit/evaluate

def _snapshot_weights(net: nn.NetworkSpec):
    return [p.copy() for p in nn.parameters(net)]


def _restore_weights(net: nn.NetworkSpec, snapshot):
    for p, saved in zip(nn.parameters(net), snapshot):
        p[:] = saved


def _check_head(net: nn.NetworkSpec, classes: list[str], loss: str):
    head = net.layers[-1]
    if loss == "binary_ce":
        if head.units != 1 or len(classes) != 2:
            raise ShapeMismatch(
                "binary loss needs a 1-unit head and a 2-class dataset")
    elif head.units != len(classes):
        raise ShapeMismatch(
            f"head width {head.units} != class count {len(classes)}")


def _forward_in_chunks(net, planes, labels, loss, chunk=64):
    total_loss = 0.0
    correct = 0
    probs_out = []
    for start in range(0, planes.shape[0], chunk):
        xb = planes[start:start + chunk]
        yb = labels[start:start + chunk]
        probs = nn.forward_batch(net, xb)
        mean_loss, _, ok = _batch_loss_and_grad(probs, yb, loss)
        total_loss += mean_loss * xb.shape[0]
        correct += ok
        probs_out.append(probs)
    n = planes.shape[0]
    return total_loss / n, correct / n, np.concatenate(probs_out, axis=0)


def evaluate(net: nn.NetworkSpec, data: DatasetIndex, mode: ChannelMode,
             loss: str | None = None):
    """(loss, accuracy, per-image probabilities) without augmentation."""
    if not data.records:
        raise EmptyDataset("cannot evaluate an empty dataset")
    if loss is None:
        loss = "binary_ce" if net.layers[-1].units == 1 else "categorical_ce"
    _check_head(net, data.classes, loss)
    planes = load_planes(data, mode)
    if planes.shape[1:] != tuple(net.input_shape):
        raise ShapeMismatch(
            f"images are {planes.shape[1:]}, network wants {net.input_shape}")
    return _forward_in_chunks(net, planes, data.labels(), loss)


def fit(net: nn.NetworkSpec, train: DatasetIndex, val: DatasetIndex,
        cfg: TrainConfig, mode: ChannelMode,
        augment_spec: AugmentSpec | None = None):
    """Train in place; returns (net-with-best-weights, TrainHistory)."""
    if not train.records or not val.records:
        raise EmptyDataset("train and validation splits must be nonempty")
    nn.validate_network(net)
    _check_head(net, train.classes, cfg.loss)

    train_planes = load_planes(train, mode)
    val_planes = load_planes(val, mode)
    if train_planes.shape[1:] != tuple(net.input_shape):
        raise ShapeMismatch(
            f"images are {train_planes.shape[1:]}, "
            f"network wants {net.input_shape}")
    train_labels = train.labels()
    val_labels = val.labels()

    params = nn.parameters(net)
    state = OptimizerState.for_params(params)
    rng = np.random.default_rng(cfg.seed)
    history = TrainHistory()
    best_val = np.inf
    best_weights = _snapshot_weights(net)
    bad_epochs = 0
    draw_counter = 0

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train_labels))
        starts = range(0, len(order), cfg.batch_size)
        if cfg.steps_per_epoch is not None:
            starts = list(starts)[:cfg.steps_per_epoch]
        run_loss = 0.0
        run_correct = 0
        seen = 0
        for start in starts:
            sel = order[start:start + cfg.batch_size]
            if augment_spec is not None:
                xb = np.stack([augment(train_planes[i], augment_spec,
                                       draw_counter + j)
                               for j, i in enumerate(sel)])
                draw_counter += len(sel)
            else:
                xb = train_planes[sel]
            yb = train_labels[sel]
            cache = nn.ForwardCache()
            probs = nn.forward_batch(net, xb, cache)
            mean_loss, dlogits, ok = _batch_loss_and_grad(probs, yb, cfg.loss)
            grads = nn.network_backward(net, cache, dlogits, from_logits=True)
            adam_step(params, grads.flat(), state, cfg)
            run_loss += mean_loss * len(sel)
            run_correct += ok
            seen += len(sel)

        val_loss, val_acc, _ = _forward_in_chunks(net, val_planes, val_labels,
                                                  cfg.loss)
        history.epochs.append(EpochRecord(
            train_loss=run_loss / seen, train_acc=run_correct / seen,
            val_loss=val_loss, val_acc=val_acc))

        if val_loss < best_val:
            best_val = val_loss
            history.best_epoch = epoch
            best_weights = _snapshot_weights(net)
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.early_stop_patience:
                history.stopped_early = True
                break

    _restore_weights(net, best_weights)
    return net, history
