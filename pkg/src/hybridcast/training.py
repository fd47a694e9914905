"""Training loop: percentage-error loss on raw-scale targets, Adam updates,
fixed epoch budget with seeded shuffling, per-epoch train/validation history.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad

__all__ = [
    "TrainConfig",
    "AdamState",
    "Adam",
    "TrainingDiverged",
    "EpochRecord",
    "mape_loss",
    "count_guard_hits",
    "adam_step",
    "train_model",
    "write_history",
]

MAPE_GUARD = 1e-3


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; message names the epoch and batch."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 128
    learning_rate: float = 0.01
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs/batch_size must be >= 1 and learning_rate > 0")


def _clamped_targets(y: np.ndarray, guard: float = MAPE_GUARD) -> np.ndarray:
    """Denominators for percentage errors; |y| <= guard is clamped to
    sign(y) * guard (positive guard at exactly zero)."""
    y = np.asarray(y, dtype=np.float64)
    signs = np.where(y < 0, -1.0, 1.0)
    return np.where(np.abs(y) > guard, y, signs * guard)


def count_guard_hits(y: np.ndarray, guard: float = MAPE_GUARD) -> int:
    """How many targets would trip the near-zero denominator guard."""
    return int(np.count_nonzero(np.abs(np.asarray(y)) <= guard))


def mape_loss(y: np.ndarray, y_pred: ad.Tensor, guard: float = MAPE_GUARD) -> ad.Tensor:
    """Mean of |1 - pred/target| over the batch, differentiable in the
    predictions (subgradient 0 where pred equals target exactly)."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != y_pred.shape:
        raise ValueError(f"target shape {y.shape} vs prediction shape {y_pred.shape}")
    inv = ad.tensor(1.0 / _clamped_targets(y, guard))
    ratio = ad.mul(y_pred, inv)
    return ad.mean(ad.absolute(ad.shift(ratio, -1.0)))


def mape_value(y: np.ndarray, y_pred: np.ndarray, guard: float = MAPE_GUARD) -> float:
    """Plain-number percentage error used for history bookkeeping."""
    y = np.asarray(y, dtype=np.float64)
    return float(np.mean(np.abs(1.0 - np.asarray(y_pred) / _clamped_targets(y, guard))))


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> np.ndarray:
    """One Adam update; mutates ``state`` and returns the new parameters."""
    state.t += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = state.m / (1.0 - beta1 ** state.t)
    v_hat = state.v / (1.0 - beta2 ** state.t)
    return param - lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    """Adam over a named parameter dict (moment hyperparameters at the
    standard defaults; only the learning rate is configurable)."""

    def __init__(self, params: dict, learning_rate: float):
        self.params = params
        self.learning_rate = learning_rate
        self.state = {
            name: AdamState(np.zeros_like(p.data), np.zeros_like(p.data))
            for name, p in params.items()
        }

    def step(self) -> None:
        for name, p in self.params.items():
            if p.grad is None:
                continue
            p.data = adam_step(p.data, p.grad, self.state[name], self.learning_rate)

    def zero_grad(self) -> None:
        ad.zero_grad(self.params.values())


# ---------------------------------------------------------------------------
# loop


@dataclass
class EpochRecord:
    epoch: int
    train_mape: float
    val_mape: float
    guard_hits: int = 0


def train_model(model, train, validation, config: TrainConfig) -> list[EpochRecord]:
    """Run exactly ``config.epochs`` epochs of seeded shuffled mini-batches.

    Predictions are un-standardized before the loss so percentage errors
    are taken on raw concentrations.  No early stopping and no best-epoch
    selection: the validation curve is recorded for analysis only and the
    final-epoch parameters are kept.
    """
    if len(train) == 0 or (validation is not None and len(validation) == 0):
        raise ValueError("datasets must be non-empty")
    params = model.parameters()
    optimizer = Adam(params, config.learning_rate)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed))
    n = len(train)
    mean, std = train.target_mean, train.target_std
    history: list[EpochRecord] = []
    guard_hits_total = 0

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        loss_sum = 0.0
        for batch_no, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            y = train.y[idx]
            pred_std = model.forward(train.x_num[idx], train.x_cat[idx])
            pred_raw = ad.shift(ad.scale(pred_std, std), mean)
            loss = mape_loss(y, pred_raw)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {batch_no}"
                )
            guard_hits_total += count_guard_hits(y)
            optimizer.zero_grad()
            ad.backward(loss)
            optimizer.step()
            loss_sum += value * len(idx)
        train_mape = loss_sum / n
        val_mape = float("nan")
        if validation is not None:
            val_pred = model.predict(validation)
            val_mape = mape_value(validation.y, val_pred)
        history.append(EpochRecord(epoch, train_mape, val_mape, guard_hits_total))
    return history


def write_history(path, history: list[EpochRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,train_mape,val_mape\n")
        for rec in history:
            fh.write(f"{rec.epoch},{rec.train_mape!r},{rec.val_mape!r}\n")
