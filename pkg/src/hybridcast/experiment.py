"""Experiment harness: runs the (model, horizon, replicate) grid over a
data source, evaluates on the held-out test split, and writes the report
files.  Cells are independent; a failing cell is logged and skipped so the
rest of the comparison survives.  All output files are byte-deterministic
for a fixed config and seed (no wall-clock content, stable float
formatting via ``repr``).
"""

from __future__ import annotations

import concurrent.futures
import json
import os
import re
import sys
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .config import ExperimentConfig, stable_seed
from .datapipe import ingest, interpolate_missing, prepare_datasets, write_frame
from .decomposition import ceemdan, reconstruct
from .evaluation import (
    CRITERIA,
    Metrics,
    compute_metrics,
    dm_test,
    improvement_table,
    robustness_summary,
)
from .models import EmbeddingSpec, build_model
from .synthetic import synth_generate
from .training import TrainConfig, write_history

__all__ = ["run_experiment", "run_decompose", "run_synth", "rebuild_report", "CellResult"]


@dataclass
class CellResult:
    model: str
    horizon: int
    replicate: int
    metrics: Metrics
    predictions: np.ndarray
    actuals: np.ndarray
    times: list[datetime]
    history: list | None


def _load_frame(cfg: ExperimentConfig):
    if cfg.source == "synthetic":
        return synth_generate(cfg.n_hours, cfg.data_seed)
    return ingest(cfg.source)


def _model_kwargs(cfg: ExperimentConfig, base: str) -> dict:
    spec = EmbeddingSpec(sizes=cfg.embedding_sizes)
    if base == "LR":
        return {}
    if base == "BPNN":
        return {"hidden": cfg.bpnn_hidden, "embeddings": spec}
    if base == "LSTM":
        return {"hidden": cfg.lstm_hidden, "embeddings": spec}
    if base == "GRU":
        return {"hidden": cfg.gru_hidden, "embeddings": spec}
    if base == "DeepTCN":
        return {
            "n_blocks": cfg.tcn_blocks,
            "dilations": tuple(cfg.tcn_dilations),
            "channels": tuple(cfg.tcn_channels),
            "kernel_size": cfg.tcn_kernel_size,
            "embeddings": spec,
        }
    raise ValueError(f"unknown base model {base!r}")


def _run_cell(frame, decomp_result, cfg: ExperimentConfig, model_name: str,
              horizon: int, replicate: int) -> CellResult:
    decomposed = model_name.startswith("CEEMDAN-")
    base = model_name.split("-", 1)[1] if decomposed else model_name
    seed = stable_seed(cfg.base_seed, model_name, horizon, replicate)

    decompose = None
    result = None
    if decomposed:
        if cfg.attach_mode == "train_only_refit":
            def decompose(series):
                return ceemdan(series, cfg.noise_ratio, cfg.trials, cfg.decomposition_seed)
        else:
            result = decomp_result
    train, val, test, _ = prepare_datasets(
        frame,
        history=cfg.history_length,
        horizon=horizon,
        fractions=cfg.fractions,
        decompose=decompose,
        decomposition_result=result,
        attach_mode=cfg.attach_mode,
    )
    model = build_model(base, train, seed=seed, **_model_kwargs(cfg, base))
    train_config = TrainConfig(
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        seed=seed,
    )
    model.fit(train, val, train_config=train_config)
    predictions = model.predict(test)
    metrics = compute_metrics(test.y, predictions)
    return CellResult(
        model=model_name,
        horizon=horizon,
        replicate=replicate,
        metrics=metrics,
        predictions=predictions,
        actuals=test.y.copy(),
        times=list(test.target_times),
        history=getattr(model, "history_", None),
    )


def _cell_task(args):
    frame, decomp_result, cfg, name, horizon, replicate = args
    try:
        return ("ok", _run_cell(frame, decomp_result, cfg, name, horizon, replicate))
    except Exception as exc:  # cell isolation: one divergence must not kill the grid
        return ("error", (name, horizon, replicate, f"{type(exc).__name__}: {exc}"))


# ---------------------------------------------------------------------------
# report writers


def _fmt(x: float) -> str:
    return repr(float(x))


def _cell_name(model: str, horizon: int, replicate: int) -> str:
    return f"{model}_h{horizon}_r{replicate}"


def _write_predictions(path, result: CellResult) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("timestamp,actual,predicted\n")
        for ts, actual, pred in zip(result.times, result.actuals, result.predictions):
            fh.write(f"{ts.isoformat(sep=' ')},{_fmt(actual)},{_fmt(pred)}\n")


def _mean_metrics(cells: list[CellResult]) -> Metrics:
    return Metrics(
        mape=float(np.mean([c.metrics.mape for c in cells])),
        mae=float(np.mean([c.metrics.mae for c in cells])),
        rmse=float(np.mean([c.metrics.rmse for c in cells])),
        n=cells[0].metrics.n,
    )


def _group_results(results: list[CellResult]):
    """-> {model: {horizon: [cells sorted by replicate]}}"""
    grouped: dict = {}
    for res in results:
        grouped.setdefault(res.model, {}).setdefault(res.horizon, []).append(res)
    for rows in grouped.values():
        for cells in rows.values():
            cells.sort(key=lambda c: c.replicate)
    return grouped


def _write_metrics(out_dir, cfg, grouped) -> dict:
    """Long-format metric tables; returns {model: {horizon: Metrics}} means."""
    means = {}
    with open(os.path.join(out_dir, "metrics_replicates.csv"), "w",
              encoding="utf-8", newline="\n") as fh:
        fh.write("model,horizon,replicate,mape,mae,rmse,n\n")
        for model in cfg.models:
            for horizon in cfg.horizons:
                for cell in grouped.get(model, {}).get(horizon, []):
                    m = cell.metrics
                    fh.write(
                        f"{model},{horizon},{cell.replicate},"
                        f"{_fmt(m.mape)},{_fmt(m.mae)},{_fmt(m.rmse)},{m.n}\n"
                    )
    with open(os.path.join(out_dir, "metrics.csv"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write("model,horizon,criterion,value\n")
        for model in cfg.models:
            rows = {}
            for horizon in cfg.horizons:
                cells = grouped.get(model, {}).get(horizon)
                if not cells:
                    continue
                mean = _mean_metrics(cells)
                rows[horizon] = mean
                for criterion in CRITERIA:
                    fh.write(f"{model},{horizon},{criterion},{_fmt(getattr(mean, criterion))}\n")
            if rows:
                means[model] = rows
    return means


def _write_wide_table(path, cfg, means, models) -> None:
    """Horizon x criterion rows, one column per model (report-table shape)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("horizon,criterion," + ",".join(models) + "\n")
        for horizon in cfg.horizons:
            for criterion in CRITERIA:
                cells = []
                for model in models:
                    metric = means.get(model, {}).get(horizon)
                    cells.append(_fmt(getattr(metric, criterion)) if metric else "")
                fh.write(f"{horizon},{criterion}," + ",".join(cells) + "\n")


def _dm_pairs(cfg, grouped, horizon=None):
    """Lower-triangular matrix rows for the first replicate's predictions."""
    models = [
        m for m in cfg.models
        if grouped.get(m) and all(grouped[m].get(h) for h in cfg.horizons)
    ]
    if len(models) < 2:
        return models, {}

    def track(model):
        if horizon is not None:
            cell = grouped[model][horizon][0]
            return cell.actuals, cell.predictions
        actuals = np.concatenate([grouped[model][h][0].actuals for h in cfg.horizons])
        preds = np.concatenate([grouped[model][h][0].predictions for h in cfg.horizons])
        return actuals, preds

    h_used = horizon if horizon is not None else max(cfg.horizons)
    cells = {}
    for i, row_model in enumerate(models):
        y_row, pred_row = track(row_model)
        for col_model in models[:i]:
            _, pred_col = track(col_model)
            # Column model on the A side: negative statistics favor it.
            cells[(row_model, col_model)] = dm_test(y_row, pred_col, pred_row, h_used)
    return models, cells


def _write_dm_matrix(path, models, cells) -> None:
    if len(models) < 2:
        return
    cols = models[:-1]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("model," + ",".join(cols) + "\n")
        for i, row_model in enumerate(models):
            if i == 0:
                continue
            row = [row_model]
            for col_model in cols:
                res = cells.get((row_model, col_model))
                if res is None:
                    row.append("")
                elif res.failed:
                    row.append("degenerate" if res.degenerate else "variance<=0")
                else:
                    row.append(f"{res.statistic:.2f} ({res.p_value:.2f})")
            fh.write(",".join(row) + "\n")


def _dm_json(models, cells) -> list:
    out = []
    for (row_model, col_model), res in cells.items():
        out.append({
            "a": col_model,
            "b": row_model,
            "statistic": None if res.failed else res.statistic,
            "p_value": None if res.failed else res.p_value,
            "degenerate": res.degenerate,
            "variance_nonpositive": res.variance_nonpositive,
        })
    return out


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run the configured grid; returns the process exit code (0 = every
    cell succeeded)."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    frame = _load_frame(cfg)

    decomp_result = None
    if cfg.needs_decomposition() and cfg.attach_mode == "full_series":
        series = interpolate_missing(frame).column("pm25")
        decomp_result = ceemdan(
            series, cfg.noise_ratio, cfg.trials, cfg.decomposition_seed, jobs=cfg.jobs
        )

    grid = [
        (frame, decomp_result, cfg, model, horizon, replicate)
        for model in cfg.models
        for horizon in cfg.horizons
        for replicate in range(cfg.robustness_runs)
    ]
    if cfg.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(_cell_task, grid))
    else:
        outcomes = [_cell_task(args) for args in grid]

    results = [payload for status, payload in outcomes if status == "ok"]
    failures = [payload for status, payload in outcomes if status == "error"]
    write_report(cfg, results, failures)
    for name, horizon, replicate, message in failures:
        print(f"FAILED {_cell_name(name, horizon, replicate)}: {message}", file=sys.stderr)
    return 1 if failures else 0


def write_report(cfg: ExperimentConfig, results: list[CellResult], failures) -> None:
    out_dir = cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    grouped = _group_results(results)

    for res in results:
        stem = _cell_name(res.model, res.horizon, res.replicate)
        _write_predictions(os.path.join(out_dir, f"predictions_{stem}.csv"), res)
        if res.history:
            write_history(os.path.join(out_dir, f"history_{stem}.csv"), res.history)

    means = _write_metrics(out_dir, cfg, grouped)
    present = [m for m in cfg.models if m in means]
    _write_wide_table(os.path.join(out_dir, "metrics_summary.csv"), cfg, means, present)

    ceemdan_models = [m for m in present if m.startswith("CEEMDAN-")]
    if ceemdan_models:
        _write_wide_table(
            os.path.join(out_dir, "ceemdan_comparison.csv"), cfg, means, ceemdan_models
        )

    dm_payload = {}
    for horizon in cfg.horizons:
        models, cells = _dm_pairs(cfg, grouped, horizon)
        _write_dm_matrix(os.path.join(out_dir, f"dm_h{horizon}.csv"), models, cells)
        dm_payload[f"h{horizon}"] = _dm_json(models, cells)
    models, cells = _dm_pairs(cfg, grouped, None)
    _write_dm_matrix(os.path.join(out_dir, "dm_pooled.csv"), models, cells)
    dm_payload["pooled"] = _dm_json(models, cells)

    robustness = {}
    if cfg.robustness_runs >= 2:
        with open(os.path.join(out_dir, "robustness.csv"), "w",
                  encoding="utf-8", newline="\n") as fh:
            fh.write("model,horizon,criterion,mean,std,cell\n")
            for model in present:
                for horizon in cfg.horizons:
                    cells_h = grouped.get(model, {}).get(horizon, [])
                    if len(cells_h) < 2:
                        continue
                    summary = robustness_summary([c.metrics for c in cells_h])
                    for criterion in CRITERIA:
                        mean, std = summary[criterion]
                        fh.write(
                            f"{model},{horizon},{criterion},{_fmt(mean)},{_fmt(std)},"
                            f"{mean:.3f} ({std:.3f})\n"
                        )
                    robustness.setdefault(model, {})[f"h{horizon}"] = {
                        c: {"mean": summary[c][0], "std": summary[c][1]} for c in CRITERIA
                    }

    improvements = {}
    proposed = next(
        (m for m in ("CEEMDAN-DeepTCN", "DeepTCN") if m in means), None
    )
    covered = {
        m: means[m] for m in means if sorted(means[m]) == sorted(cfg.horizons)
    }
    if proposed in covered and len(covered) > 1:
        improvements = improvement_table(covered, proposed)
        with open(os.path.join(out_dir, "improvement.csv"), "w",
                  encoding="utf-8", newline="\n") as fh:
            fh.write("benchmark,criterion,reduction\n")
            for benchmark in cfg.models:
                if benchmark not in improvements:
                    continue
                for criterion in CRITERIA:
                    fh.write(
                        f"{benchmark},{criterion},{_fmt(improvements[benchmark][criterion])}\n"
                    )

    report = {
        "config": cfg.describe(),
        "notes": [
            "recurrent and dense heads use an identity output activation; "
            "the bounded literal-sigmoid head is available via model config "
            "(literal_output_sigmoid)",
            "validation curves are recorded per epoch but never steer "
            "training (fixed epoch budget, final-epoch parameters kept)",
            f"decomposition attachment mode: {cfg.attach_mode} "
            "(full_series computes one decomposition over the entire series "
            "and therefore leaks future information into the features; "
            "train_only_refit is strictly causal)",
        ],
        "metrics": {
            model: {
                f"h{h}": means[model][h].as_dict() for h in sorted(means[model])
            }
            for model in present
        },
        "dm": dm_payload,
        "robustness": robustness,
        "improvements": {"proposed": proposed, "reductions": improvements},
        "failures": [
            {"model": m, "horizon": h, "replicate": r, "error": msg}
            for m, h, r, msg in failures
        ],
    }
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8",
              newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if failures:
        with open(os.path.join(out_dir, "failures.csv"), "w",
                  encoding="utf-8", newline="\n") as fh:
            fh.write("model,horizon,replicate,error\n")
            for m, h, r, msg in failures:
                fh.write(f"{m},{h},{r},{json.dumps(msg)}\n")


# ---------------------------------------------------------------------------
# other subcommands


def run_decompose(cfg: ExperimentConfig) -> int:
    """Decompose the pm25 series and write the mode table plus metadata."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    frame = _load_frame(cfg)
    series = interpolate_missing(frame).column("pm25")
    result = ceemdan(
        series, cfg.noise_ratio, cfg.trials, cfg.decomposition_seed, jobs=cfg.jobs
    )
    matrix = result.as_matrix()
    header = [f"imf_{j + 1}" for j in range(result.n_imfs)] + ["residue"]
    path = os.path.join(cfg.out_dir, "decomposition.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in matrix:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    error = float(np.max(np.abs(reconstruct(result) - series)))
    meta = dict(result.meta)
    meta.update({"n_imfs": result.n_imfs, "mode": cfg.attach_mode,
                 "reconstruction_error": error, "n_points": int(series.size)})
    with open(os.path.join(cfg.out_dir, "decomposition_meta.json"), "w",
              encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def run_synth(n_hours: int, seed: int, out_path) -> int:
    write_frame(out_path, synth_generate(n_hours, seed))
    return 0


_PRED_RE = re.compile(r"predictions_(?P<model>.+)_h(?P<h>\d+)_r(?P<r>\d+)\.csv$")


def rebuild_report(run_dir, cfg: ExperimentConfig | None = None) -> int:
    """Recompute every derived table from the stored prediction traces."""
    results = []
    for name in sorted(os.listdir(run_dir)):
        match = _PRED_RE.match(name)
        if not match:
            continue
        times, actual, predicted = [], [], []
        with open(os.path.join(run_dir, name), encoding="utf-8") as fh:
            next(fh)
            for line in fh:
                ts, a, p = line.rstrip("\n").split(",")
                times.append(datetime.fromisoformat(ts))
                actual.append(float(a))
                predicted.append(float(p))
        actual = np.array(actual)
        predicted = np.array(predicted)
        results.append(
            CellResult(
                model=match["model"],
                horizon=int(match["h"]),
                replicate=int(match["r"]),
                metrics=compute_metrics(actual, predicted),
                predictions=predicted,
                actuals=actual,
                times=times,
                history=None,
            )
        )
    if not results:
        print(f"no prediction traces found in {run_dir}", file=sys.stderr)
        return 1
    if cfg is None:
        from .config import ALL_MODELS

        found = {r.model for r in results}
        # Registry order keeps rebuilt tables byte-stable regardless of
        # directory listing order.
        models = [m for m in ALL_MODELS if m in found]
        models += sorted(found - set(models))
        horizons = tuple(sorted({r.horizon for r in results}))
        replicates = max(r.replicate for r in results) + 1
        cfg = ExperimentConfig(
            models=tuple(models), horizons=horizons, robustness_runs=replicates,
            out_dir=run_dir,
            decomposition_enabled=any(m.startswith("CEEMDAN-") for m in models),
        )
    write_report(cfg, results, [])
    return 0
