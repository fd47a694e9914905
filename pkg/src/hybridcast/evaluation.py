"""Forecast accuracy metrics, the Diebold-Mariano comparison test,
robustness summaries over repeated runs, and relative-improvement tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .training import MAPE_GUARD, _clamped_targets

__all__ = [
    "Metrics",
    "DMResult",
    "EvaluationError",
    "compute_metrics",
    "dm_test",
    "robustness_summary",
    "improvement_table",
]

CRITERIA = ("mape", "mae", "rmse")


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class Metrics:
    mape: float
    mae: float
    rmse: float
    n: int

    def as_dict(self) -> dict:
        return {"mape": self.mape, "mae": self.mae, "rmse": self.rmse, "n": self.n}


def compute_metrics(y, y_pred, guard: float = MAPE_GUARD) -> Metrics:
    """Percentage, absolute and root-squared mean errors.

    The percentage error uses the same near-zero denominator guard as the
    training loss.
    """
    y = np.asarray(y, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y.size == 0:
        raise EvaluationError("empty input")
    if y.shape != y_pred.shape:
        raise EvaluationError(f"shape mismatch {y.shape} vs {y_pred.shape}")
    mape = float(np.mean(np.abs(1.0 - y_pred / _clamped_targets(y, guard))))
    mae = float(np.mean(np.abs(y - y_pred)))
    rmse = float(np.sqrt(np.mean((y - y_pred) ** 2)))
    return Metrics(mape=mape, mae=mae, rmse=rmse, n=y.size)


@dataclass(frozen=True)
class DMResult:
    """Two-sided comparison of forecast accuracy via percentage-error loss
    differentials.

    ``degenerate`` marks identical forecast tracks (the statistic is
    undefined); ``variance_nonpositive`` marks a truncated long-run
    variance estimate that came out non-positive (no p-value is
    fabricated).  Negative statistics favor forecast A.
    """

    statistic: float
    p_value: float
    horizon: int
    degenerate: bool = False
    variance_nonpositive: bool = False

    @property
    def failed(self) -> bool:
        return self.degenerate or self.variance_nonpositive


def dm_test(y, y_pred_a, y_pred_b, horizon: int = 1, guard: float = MAPE_GUARD,
            harvey_correction: bool = False) -> DMResult:
    """Diebold-Mariano test on absolute percentage error loss.

    The long-run variance uses autocovariances up to lag ``horizon - 1``;
    p-values come from the standard normal reference (optionally with the
    small-sample correction, off by default).
    """
    y = np.asarray(y, dtype=np.float64)
    a = np.asarray(y_pred_a, dtype=np.float64)
    b = np.asarray(y_pred_b, dtype=np.float64)
    n = y.size
    if not (y.shape == a.shape == b.shape) or n == 0:
        raise EvaluationError("inputs must be equal-length non-empty vectors")
    if not 1 <= horizon <= n:
        raise EvaluationError(f"horizon must be in [1, {n}], got {horizon}")
    if np.array_equal(a, b):
        return DMResult(math.nan, math.nan, horizon, degenerate=True)

    denom = _clamped_targets(y, guard)
    d = np.abs(1.0 - a / denom) - np.abs(1.0 - b / denom)
    d_bar = d.mean()
    centered = d - d_bar
    variance = float(np.dot(centered, centered)) / n
    for k in range(1, horizon):
        variance += 2.0 * float(np.dot(centered[k:], centered[:-k])) / n
    if variance <= 0.0:
        return DMResult(math.nan, math.nan, horizon, variance_nonpositive=True)

    statistic = d_bar / math.sqrt(variance / n)
    if harvey_correction:
        statistic *= math.sqrt((n + 1 - 2 * horizon + horizon * (horizon - 1) / n) / n)
    p_value = 2.0 * float(norm.sf(abs(statistic)))
    return DMResult(statistic, p_value, horizon)


def robustness_summary(runs) -> dict:
    """Mean and sample standard deviation (n-1) per criterion across
    repeated runs of the same configuration."""
    runs = list(runs)
    if len(runs) < 2:
        raise EvaluationError(f"robustness summary needs >= 2 runs, got {len(runs)}")
    out = {}
    for criterion in CRITERIA:
        values = np.array([getattr(run, criterion) for run in runs], dtype=np.float64)
        out[criterion] = (float(values.mean()), float(values.std(ddof=1)))
    return out


def improvement_table(per_model: dict, proposed: str) -> dict:
    """Percentage reduction of the proposed model against each benchmark.

    ``per_model`` maps model name -> {horizon -> Metrics}; every model
    must cover the same horizons.  Per criterion the reduction is
    ``1 - mean_h(proposed) / mean_h(benchmark)``.
    """
    if proposed not in per_model:
        raise EvaluationError(f"proposed model {proposed!r} missing from reports")
    horizons = sorted(per_model[proposed])
    for name, rows in per_model.items():
        if sorted(rows) != horizons:
            raise EvaluationError(f"model {name!r} does not cover horizons {horizons}")

    def criterion_mean(name, criterion):
        return float(np.mean([getattr(per_model[name][h], criterion) for h in horizons]))

    table = {}
    for name in per_model:
        if name == proposed:
            continue
        table[name] = {
            criterion: 1.0 - criterion_mean(proposed, criterion) / criterion_mean(name, criterion)
            for criterion in CRITERIA
        }
    return table
