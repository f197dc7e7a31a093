"""Evaluation metrics, the repeated-training protocol, and report tables.

Reported MSE is 1/C Σ (λ−λ′)² — the evaluation metric, not the trainer's
half-mean cost.  Experiments repeat training ``runs`` times with seeds
``base_seed + r`` and report per-run metrics plus their means; failed
runs are recorded and excluded from the means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .ann import (
    TrainConfig,
    TrainerId,
    init_weights,
    predict_batch,
    train_lm,
    train_scg,
)
from .dataset import SplitSpec, split, standardize_apply, standardize_fit
from .errors import (
    ConfigInvalid,
    DataFormatError,
    DegenerateVariance,
    DimensionMismatch,
    EmptyInput,
    LengthMismatch,
    NumericalError,
)
from ._textfmt import fmt_float

__all__ = [
    "SPLIT_NAMES",
    "RunResult",
    "EvalReport",
    "TableRow",
    "ReportTables",
    "mse",
    "pearson_r",
    "run_experiment",
    "table_row",
    "report_table",
    "parse_machine_table",
    "write_overlay",
]

SPLIT_NAMES = ("all", "train", "validation", "test")


def _paired(targets, predictions) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(targets, dtype=np.float64)
    p = np.asarray(predictions, dtype=np.float64)
    if t.ndim != 1 or p.ndim != 1:
        raise DimensionMismatch("metrics expect one-dimensional sequences")
    if t.size != p.size:
        raise LengthMismatch(f"length mismatch: {t.size} targets, {p.size} predictions")
    if t.size == 0:
        raise EmptyInput("metrics need at least one sample")
    return t, p


def mse(targets, predictions) -> float:
    """Mean squared error 1/C Σ (λ−λ′)²."""
    t, p = _paired(targets, predictions)
    d = t - p
    return float(d @ d) / t.size


def pearson_r(targets, predictions) -> float:
    """Pearson correlation of the two sequences."""
    t, p = _paired(targets, predictions)
    dt = t - t.mean()
    dp = p - p.mean()
    nt = float(np.sqrt(dt @ dt))
    np_ = float(np.sqrt(dp @ dp))
    if nt == 0.0 or np_ == 0.0:
        raise DegenerateVariance("correlation undefined for a constant sequence")
    return float(dt @ dp) / (nt * np_)


@dataclass(frozen=True)
class RunResult:
    """Per-split metrics of a single training run (or its failure)."""

    seed: int
    failed: bool
    error: str
    stop_reason: str
    best_epoch: int
    mse: dict[str, float]
    r: dict[str, float]
    predictions: np.ndarray | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class EvalReport:
    """Aggregated result of the repeated-training protocol."""

    method: str
    feature_length: int
    trainer: str
    runs: int
    failed_runs: int
    run_results: tuple[RunResult, ...]
    mean_mse: dict[str, float]
    mean_r: dict[str, float]


def run_experiment(
    features: np.ndarray,
    targets: np.ndarray,
    trainer: str = TrainerId.SCG,
    runs: int = 10,
    base_seed: int = 0,
    method: str = "",
    cfg: TrainConfig | None = None,
    seeds=None,
    keep_predictions: bool = False,
) -> EvalReport:
    """Train ``runs`` times (seed = base_seed + r) and aggregate metrics.

    Each run re-splits, re-standardizes, re-initializes, and re-trains
    under its own seed, then scores MSE/R on the all/train/validation/
    test splits.  Runs that raise a numerical failure are marked failed
    and excluded from the means.
    """
    if trainer not in TrainerId.ALL:
        raise ConfigInvalid(f"unknown trainer {trainer!r}")
    if runs < 1:
        raise ConfigInvalid(f"runs must be >= 1, got {runs}")
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch(f"features must be a 2-D matrix, got shape {x.shape}")
    if x.shape[0] == 0:
        raise EmptyInput("experiment needs at least one sample")
    if y.shape != (x.shape[0],):
        raise LengthMismatch(
            f"{x.shape[0]} feature rows but {y.size} targets"
        )
    template = cfg if cfg is not None else TrainConfig(method=trainer)
    seed_list = list(seeds) if seeds is not None else [base_seed + r for r in range(runs)]
    if len(seed_list) != runs:
        raise ConfigInvalid(f"expected {runs} seeds, got {len(seed_list)}")

    train_fn = train_lm if trainer == TrainerId.LM else train_scg
    results: list[RunResult] = []
    for seed in seed_list:
        idx_train, idx_val, idx_test = split(x.shape[0], SplitSpec(seed=seed))
        try:
            std = standardize_fit(x[idx_train])
            xs = standardize_apply(std, x)
            model0 = init_weights(x.shape[1], seed)
            model, report = train_fn(
                model0,
                xs[idx_train],
                y[idx_train],
                xs[idx_val],
                y[idx_val],
                replace(template, method=trainer, seed=seed),
            )
            preds = predict_batch(model, xs)
            indices = {
                "all": slice(None),
                "train": idx_train,
                "validation": idx_val,
                "test": idx_test,
            }
            mse_d = {s: mse(y[i], preds[i]) for s, i in indices.items()}
            r_d = {s: pearson_r(y[i], preds[i]) for s, i in indices.items()}
        except NumericalError as exc:
            results.append(
                RunResult(
                    seed=seed,
                    failed=True,
                    error=f"{type(exc).__name__}: {exc}",
                    stop_reason="",
                    best_epoch=-1,
                    mse={},
                    r={},
                )
            )
            continue
        results.append(
            RunResult(
                seed=seed,
                failed=False,
                error="",
                stop_reason=report.stop_reason,
                best_epoch=report.best_epoch,
                mse=mse_d,
                r=r_d,
                predictions=preds if keep_predictions else None,
            )
        )

    ok = [res for res in results if not res.failed]
    mean_mse = {
        s: float(np.mean([res.mse[s] for res in ok])) if ok else math.nan
        for s in SPLIT_NAMES
    }
    mean_r = {
        s: float(np.mean([res.r[s] for res in ok])) if ok else math.nan
        for s in SPLIT_NAMES
    }
    return EvalReport(
        method=method,
        feature_length=x.shape[1],
        trainer=trainer,
        runs=runs,
        failed_runs=len(results) - len(ok),
        run_results=tuple(results),
        mean_mse=mean_mse,
        mean_r=mean_r,
    )


# ---------------------------------------------------------------------------
# report tables


@dataclass(frozen=True)
class TableRow:
    """One (method, feature length, trainer) line of the comparison table."""

    method: str
    feature_length: int
    trainer: str
    runs: int
    failed_runs: int
    mse: dict[str, float]
    r: dict[str, float]


@dataclass(frozen=True)
class ReportTables:
    machine: str
    human: str


_MACHINE_HEADER = "method,feature_length,trainer,runs,failed_runs," + ",".join(
    f"mse_{s},r_{s}" for s in SPLIT_NAMES
)


def table_row(report: EvalReport) -> TableRow:
    return TableRow(
        method=report.method,
        feature_length=report.feature_length,
        trainer=report.trainer,
        runs=report.runs,
        failed_runs=report.failed_runs,
        mse=dict(report.mean_mse),
        r=dict(report.mean_r),
    )


def _sort_key(row: TableRow):
    r_all = row.r.get("all", math.nan)
    return -(r_all if not math.isnan(r_all) else -math.inf)


def report_table(reports) -> ReportTables:
    """Render reports as machine (CSV) and human tables, best R first."""
    rows = sorted((table_row(rep) for rep in reports), key=_sort_key)
    if not rows:
        raise EmptyInput("no reports to tabulate")

    machine_lines = [_MACHINE_HEADER]
    for row in rows:
        cells = [row.method, str(row.feature_length), row.trainer, str(row.runs),
                 str(row.failed_runs)]
        for s in SPLIT_NAMES:
            cells.append(fmt_float(row.mse[s]))
            cells.append(fmt_float(row.r[s]))
        machine_lines.append(",".join(cells))

    name_w = max(len("method"), max(len(r.method) for r in rows))
    human_lines = [
        f"{'method':<{name_w}}  {'FVL':>5}  {'trainer':<7}  {'runs':>4}  "
        f"{'MSE(all)':>10}  {'R(all)':>8}  {'MSE(train)':>10}  {'R(train)':>8}  "
        f"{'MSE(test)':>10}  {'R(test)':>8}"
    ]
    for row in rows:
        cells = [f"{row.method:<{name_w}}", f"{row.feature_length:>5}",
                 f"{row.trainer:<7}", f"{row.runs:>4}"]
        for s in ("all", "train", "test"):
            cells.append(f"{row.mse[s]:>10.4f}")
            cells.append(f"{row.r[s]:>8.4f}")
        human_lines.append("  ".join(cells))
    return ReportTables(
        machine="\n".join(machine_lines) + "\n",
        human="\n".join(human_lines) + "\n",
    )


def parse_machine_table(text: str) -> list[TableRow]:
    """Parse the machine rendering back into table rows."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != _MACHINE_HEADER:
        raise DataFormatError("unrecognized report table header")
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != 5 + 2 * len(SPLIT_NAMES):
            raise DataFormatError(f"malformed report row: {ln!r}")
        mse_d = {}
        r_d = {}
        for k, s in enumerate(SPLIT_NAMES):
            mse_d[s] = float(cells[5 + 2 * k])
            r_d[s] = float(cells[6 + 2 * k])
        rows.append(
            TableRow(
                method=cells[0],
                feature_length=int(cells[1]),
                trainer=cells[2],
                runs=int(cells[3]),
                failed_runs=int(cells[4]),
                mse=mse_d,
                r=r_d,
            )
        )
    return rows


def write_overlay(path, targets, predictions) -> None:
    """Two-column target/prediction text file for external plotting."""
    t, p = _paired(targets, predictions)
    lines = ["lambda,prediction"]
    for a, b in zip(t, p):
        lines.append(f"{fmt_float(a)},{fmt_float(b)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
