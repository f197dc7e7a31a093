"""Command-line front-end wiring the full soft-sensor pipeline.

Subcommands: ``synth``, ``fit-model``, ``extract``, ``train``,
``predict``, ``evaluate``, ``report``.  Every setting lives in a flat
JSON config file and every key can be overridden by a flag, so runs are
archivable and reproducible from (config, seed) alone.  Exit codes are
stable: 0 success, 2 argument/config error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, fields as dataclass_fields

import numpy as np
from PIL import Image

from . import baseline_features as bf
from . import dataset as ds
from . import synth as sy
from .ann import TrainConfig, TrainerId, init_weights, train_lm, train_scg
from .errors import (
    ConfigInvalid,
    DataError,
    DataFormatError,
    FlameSenseError,
)
from .evaluation import report_table, run_experiment, write_overlay
from .flame_model import fit_ideal_model, load_model, save_model
from .imaging import (
    Channel,
    GridSpec,
    RgbImage,
    channels_label,
    extract_channel,
    load_image,
    parse_channels,
)
from .predictor import build_predictor, load_predictor, predict_image, save_predictor
from .similarity_features import (
    FeatureMethod,
    compute_features,
    gmm_weight_grid,
)

__all__ = ["RunConfig", "main"]

#: Temporal baselines with no single-frame definition; reported as
#: unavailable rather than failing the whole evaluation.
_UNAVAILABLE = set(bf.UNAVAILABLE_BASELINES)

_PATH_KEYS = (
    "out",
    "model",
    "manifest",
    "frame_index",
    "lambda_log",
    "references",
    "features",
    "predictor",
)


@dataclass
class RunConfig:
    """Flat key/value configuration shared by every subcommand."""

    seed: int = 0
    out: str = "out"
    size: int = 128
    duration_s: float = 1000.0
    frame_rate: float = 2.0
    lambda_rate: float = 1.0
    lambda_min: float = 0.8
    lambda_max: float = 3.0
    noise_sigma: float = 2.0
    reference_count: int = 22
    grid_rows: int = 16
    grid_cols: int = 16
    method: str = FeatureMethod.SUM_SIM
    channels: str = "R-G-B"
    weights: int | None = None
    trainer: str = TrainerId.SCG
    runs: int = 10
    max_epochs: int = 1000
    patience: int = 6
    model: str | None = None
    manifest: str | None = None
    frame_index: str | None = None
    lambda_log: str | None = None
    references: str | None = None
    features: str | None = None
    predictor: str | None = None
    methods: list[str] | None = None
    trainers: list[str] | None = None


_INT_KEYS = {
    "seed", "size", "reference_count", "grid_rows", "grid_cols",
    "weights", "runs", "max_epochs", "patience",
}
_FLOAT_KEYS = {
    "duration_s", "frame_rate", "lambda_rate", "lambda_min", "lambda_max",
    "noise_sigma",
}
_LIST_KEYS = {"methods", "trainers"}


def _coerce(key: str, value):
    if value is None:
        return None
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigInvalid(f"config key {key!r} must be an integer")
        return value
    if key in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigInvalid(f"config key {key!r} must be a number")
        return float(value)
    if key in _LIST_KEYS:
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigInvalid(f"config key {key!r} must be a list of strings")
        return list(value)
    if not isinstance(value, str):
        raise ConfigInvalid(f"config key {key!r} must be a string")
    return value


def load_config(config_path: str | None, overrides: dict) -> RunConfig:
    """Merge defaults, the optional config file, and flag overrides."""
    cfg = RunConfig()
    known = {f.name for f in dataclass_fields(RunConfig)}
    if config_path is not None:
        with open(config_path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigInvalid(f"{config_path}: invalid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigInvalid(f"{config_path}: config must be a JSON object")
        unknown = set(raw) - known
        if unknown:
            raise ConfigInvalid(
                f"{config_path}: unknown config keys: {sorted(unknown)}"
            )
        base = os.path.dirname(os.path.abspath(config_path))
        for key, value in raw.items():
            value = _coerce(key, value)
            if key in _PATH_KEYS and value is not None:
                value = os.path.normpath(os.path.join(base, value))
            setattr(cfg, key, value)
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, _coerce(key, value))
    return cfg


def _grid(cfg: RunConfig) -> GridSpec:
    return GridSpec(cfg.grid_rows, cfg.grid_cols)


def _rig(cfg: RunConfig) -> sy.RigConfig:
    return sy.RigConfig(
        size=cfg.size,
        duration_s=cfg.duration_s,
        frame_rate=cfg.frame_rate,
        lambda_rate=cfg.lambda_rate,
        lambda_range=(cfg.lambda_min, cfg.lambda_max),
        noise_sigma=cfg.noise_sigma,
        seed=cfg.seed,
    )


def _require(cfg: RunConfig, key: str) -> str:
    value = getattr(cfg, key)
    if value is None:
        raise ConfigInvalid(f"missing required setting {key!r}")
    return value


def _load_frame(path: str) -> RgbImage:
    try:
        return load_image(path)
    except OSError as exc:
        raise DataError(f"cannot read frame {path}: {exc}") from None


def _load_dataset(cfg: RunConfig) -> ds.SyncedDataset:
    """Manifest if configured, otherwise frame index + λ log synchronized."""
    if cfg.manifest is not None:
        return ds.read_manifest(cfg.manifest)
    if cfg.frame_index is None or cfg.lambda_log is None:
        raise ConfigInvalid(
            "need either 'manifest' or both 'frame_index' and 'lambda_log'"
        )
    frames = ds.read_frame_index(cfg.frame_index)
    log = ds.read_lambda_log(cfg.lambda_log)
    synced = ds.sync(frames, log)
    rep = synced.report
    if rep.dropped_before or rep.dropped_after:
        print(
            f"sync: dropped {rep.dropped_before} frames before and "
            f"{rep.dropped_after} after the lambda span"
        )
    return synced


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(cfg: RunConfig) -> int:
    rig = _rig(cfg)
    out = cfg.out
    frames, log, truth, session = sy.generate_session(rig, out)

    ref_dir = os.path.join(out, "references")
    os.makedirs(ref_dir, exist_ok=True)
    ref_lams = sy.reference_lambdas(cfg.reference_count)
    ref_paths = []
    for k, img in enumerate(sy.ideal_reference_frames(rig, cfg.reference_count)):
        rel = os.path.join("references", f"ref_{k:02d}.png")
        Image.fromarray(img.pixels).save(os.path.join(out, rel))
        ref_paths.append(os.path.abspath(os.path.join(out, rel)))
    ref_manifest = ds.SyncedDataset(
        np.arange(len(ref_paths), dtype=np.float64),
        tuple(ref_paths),
        ref_lams,
        ds.SyncReport(len(ref_paths), len(ref_paths), 0, 0),
    )
    ds.write_manifest(os.path.join(out, "references.csv"), ref_manifest)

    print(f"session written to {out}")
    print(f"frames {len(frames)} lambda_samples {len(log)} references {len(ref_paths)}")
    print(
        f"lambda span [{truth.min():.4f}, {truth.max():.4f}] "
        f"noise_sigma {rig.noise_sigma}"
    )
    return 0


def cmd_fit_model(cfg: RunConfig) -> int:
    refs = ds.read_manifest(_require(cfg, "references"))
    frames = [_load_frame(p) for p in refs.paths]
    model = fit_ideal_model(frames, list(refs.lambdas))
    os.makedirs(cfg.out, exist_ok=True)
    out_path = os.path.join(cfg.out, "ideal_model.txt")
    save_model(model, out_path)
    print(f"ideal model fitted from {model.frame_count} frames -> {out_path}")
    for ch in Channel:
        s = model.stats[ch]
        print(f"channel {ch.value} mean {s.mean:.6f} std {s.std:.6f}")
    return 0


def cmd_extract(cfg: RunConfig) -> int:
    if cfg.method not in FeatureMethod.ALL:
        raise ConfigInvalid(
            f"extract supports similarity methods {FeatureMethod.ALL}, "
            f"got {cfg.method!r}"
        )
    model = load_model(_require(cfg, "model"))
    synced = _load_dataset(cfg)
    grid = _grid(cfg)
    channels = parse_channels(cfg.channels)
    os.makedirs(cfg.out, exist_ok=True)

    if cfg.method == FeatureMethod.GMM:
        grid_pts = gmm_weight_grid(channels)
        if cfg.weights is not None:
            if not (0 <= cfg.weights < len(grid_pts)):
                raise ConfigInvalid(
                    f"weights index {cfg.weights} outside grid of {len(grid_pts)}"
                )
            jobs = [(grid_pts[cfg.weights], f"_w{cfg.weights:02d}")]
        else:
            jobs = [(w, f"_w{i:02d}") for i, w in enumerate(grid_pts)]
    else:
        jobs = [(None, "")]

    label = channels_label(channels)
    for weights, suffix in jobs:
        rows = []
        for path in synced.paths:
            img = _load_frame(path)
            fv = compute_features(img, model, cfg.method, channels, grid, weights)
            rows.append(fv.values)
        table = ds.FeatureTable(
            method=cfg.method,
            channels=label,
            grid=grid,
            weights=weights.label() if weights is not None else "",
            timestamps=synced.timestamps,
            lambdas=synced.lambdas,
            features=np.stack(rows) if rows else np.empty((0, 0)),
        )
        out_path = os.path.join(cfg.out, f"features_{cfg.method}_{label}{suffix}.txt")
        ds.write_feature_table(out_path, table)
        print(f"{out_path}: {len(table)} rows of length {table.dim}")
    return 0


def _weights_from_label(channels, label: str):
    if not label:
        return None
    for cand in gmm_weight_grid(channels):
        if cand.label() == label:
            return cand
    raise DataFormatError(f"feature table weights {label!r} not on the grid")


def cmd_train(cfg: RunConfig) -> int:
    table = ds.read_feature_table(_require(cfg, "features"))
    ideal = load_model(_require(cfg, "model"))
    channels = parse_channels(table.channels)
    weights = _weights_from_label(channels, table.weights)
    if cfg.trainer not in TrainerId.ALL:
        raise ConfigInvalid(f"unknown trainer {cfg.trainer!r}")

    idx_train, idx_val, _ = ds.split(len(table), ds.SplitSpec(seed=cfg.seed))
    std = ds.standardize_fit(table.features[idx_train])
    xs = ds.standardize_apply(std, table.features)
    y = table.lambdas
    model0 = init_weights(table.dim, cfg.seed)
    tc = TrainConfig(
        method=cfg.trainer,
        max_epochs=cfg.max_epochs,
        patience=cfg.patience,
        seed=cfg.seed,
    )
    train_fn = train_lm if cfg.trainer == TrainerId.LM else train_scg
    network, report = train_fn(
        model0, xs[idx_train], y[idx_train], xs[idx_val], y[idx_val], tc
    )

    bundle = build_predictor(
        method=table.method,
        channels=channels,
        grid=table.grid,
        weights=weights,
        ideal=ideal,
        standardizer=std,
        network=network,
    )
    os.makedirs(cfg.out, exist_ok=True)
    bundle_path = os.path.join(cfg.out, "predictor.txt")
    save_predictor(bundle_path, bundle)
    report_path = os.path.join(cfg.out, "train_report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "trainer": report.trainer,
                "stop_reason": report.stop_reason,
                "best_epoch": report.best_epoch,
                "accepted_steps": report.accepted_steps,
                "epochs_run": report.epochs_run,
                "train_costs": list(report.train_costs),
                "val_costs": list(report.val_costs),
            },
            fh,
            sort_keys=True,
        )
        fh.write("\n")
    print(
        f"{report.trainer} ran {report.epochs_run} epochs, stop {report.stop_reason}, "
        f"best epoch {report.best_epoch}, "
        f"val cost {report.val_costs[report.best_epoch]!r}"
    )
    print(f"predictor -> {bundle_path}")
    return 0


def cmd_predict(cfg: RunConfig) -> int:
    bundle = load_predictor(_require(cfg, "predictor"))
    if cfg.manifest is not None:
        synced = ds.read_manifest(cfg.manifest)
        ts, paths = synced.timestamps, synced.paths
    else:
        frames = ds.read_frame_index(_require(cfg, "frame_index"))
        ts, paths = frames.timestamps, frames.paths

    os.makedirs(cfg.out, exist_ok=True)
    out_path = os.path.join(cfg.out, "predictions.csv")
    latencies = []
    lines = ["timestamp_s,lambda_hat"]
    for t, path in zip(ts, paths):
        started = time.perf_counter()
        img = _load_frame(path)
        value = predict_image(bundle, img)
        latencies.append(time.perf_counter() - started)
        lines.append(f"{float(t)!r},{value!r}")
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

    if latencies:
        print(
            f"predicted {len(latencies)} frames -> {out_path} "
            f"mean_latency_s {np.mean(latencies):.4f} "
            f"max_latency_s {np.max(latencies):.4f}"
        )
    else:
        print(f"predicted 0 frames -> {out_path}")
    return 0


def _similarity_spec(spec: str):
    """Parse 'Method:channels[:weight-index]' into its parts."""
    parts = spec.split(":")
    method = parts[0]
    if method not in FeatureMethod.ALL:
        raise ConfigInvalid(f"unknown method spec {spec!r}")
    if len(parts) < 2:
        raise ConfigInvalid(f"method spec {spec!r} needs channels, e.g. 'SumSim:R-G-B'")
    channels = parse_channels(parts[1])
    windex = None
    if len(parts) == 3:
        windex = int(parts[2])
    elif len(parts) > 3:
        raise ConfigInvalid(f"malformed method spec {spec!r}")
    return method, channels, windex


def _expand_specs(cfg: RunConfig) -> list[str]:
    if cfg.methods:
        return list(cfg.methods)
    base = cfg.method
    if base in FeatureMethod.ALL:
        spec = f"{base}:{cfg.channels}"
        if base == FeatureMethod.GMM and cfg.weights is not None:
            spec += f":{cfg.weights}"
        return [spec]
    return [base]


def _features_for_spec(
    spec: str, synced: ds.SyncedDataset, ideal, grid: GridSpec, base_seed: int
) -> list[tuple[str, np.ndarray]]:
    """Feature matrices for one method spec (several for a GMM grid sweep)."""
    if spec in _UNAVAILABLE:
        raise AssertionError("unavailable specs are filtered before extraction")
    if spec in bf.BaselineId.ALL:
        basis = None
        if spec == bf.BaselineId.PCA2:
            # The projection basis is fitted once, on the base-seed
            # training split, and reused by every run.
            idx_train, _, _ = ds.split(len(synced), ds.SplitSpec(seed=base_seed))
            keep = set(int(i) for i in idx_train)
            planes = []
            for i, path in enumerate(synced.paths):
                if i in keep:
                    img = _load_frame(path)
                    planes.append(extract_channel(img, Channel.I))
            basis = bf.pca2_fit(planes)
        rows = [
            bf.compute_baseline(_load_frame(p), spec, basis) for p in synced.paths
        ]
        return [(spec, np.stack(rows))]

    method, channels, windex = _similarity_spec(spec)
    if method == FeatureMethod.GMM:
        grid_pts = gmm_weight_grid(channels)
        if windex is not None:
            if not (0 <= windex < len(grid_pts)):
                raise ConfigInvalid(
                    f"weight index {windex} outside grid of {len(grid_pts)}"
                )
            jobs = [(grid_pts[windex], f"{method}:{channels_label(channels)}:{windex}")]
        else:
            jobs = [
                (w, f"{method}:{channels_label(channels)}:{i}")
                for i, w in enumerate(grid_pts)
            ]
    else:
        jobs = [(None, f"{method}:{channels_label(channels)}")]

    out = []
    for weights, row_id in jobs:
        rows = []
        for path in synced.paths:
            img = _load_frame(path)
            rows.append(
                compute_features(img, ideal, method, channels, grid, weights).values
            )
        out.append((row_id, np.stack(rows)))
    return out


def cmd_evaluate(cfg: RunConfig) -> int:
    ideal = load_model(_require(cfg, "model"))
    synced = _load_dataset(cfg)
    grid = _grid(cfg)
    specs = _expand_specs(cfg)
    trainers = cfg.trainers if cfg.trainers else [cfg.trainer]
    for tr in trainers:
        if tr not in TrainerId.ALL:
            raise ConfigInvalid(f"unknown trainer {tr!r}")
    os.makedirs(cfg.out, exist_ok=True)

    reports = []
    failures: list[tuple[str, FlameSenseError]] = []
    for spec in specs:
        if spec in _UNAVAILABLE:
            print(f"{spec}: unavailable (temporal feature, no single-frame definition)")
            continue
        try:
            featsets = _features_for_spec(spec, synced, ideal, grid, cfg.seed)
        except FlameSenseError as exc:
            print(f"{spec}: failed ({type(exc).__name__}: {exc})", file=sys.stderr)
            failures.append((spec, exc))
            continue
        for row_id, feats in featsets:
            for tr in trainers:
                report = run_experiment(
                    feats,
                    synced.lambdas,
                    trainer=tr,
                    runs=cfg.runs,
                    base_seed=cfg.seed,
                    method=row_id,
                    cfg=TrainConfig(
                        method=tr,
                        max_epochs=cfg.max_epochs,
                        patience=cfg.patience,
                        seed=cfg.seed,
                    ),
                    keep_predictions=True,
                )
                reports.append(report)
                first_ok = next(
                    (r for r in report.run_results if not r.failed), None
                )
                if first_ok is not None and first_ok.predictions is not None:
                    name = row_id.replace(":", "-")
                    write_overlay(
                        os.path.join(cfg.out, f"overlay_{name}_{tr}.csv"),
                        synced.lambdas,
                        first_ok.predictions,
                    )

    if reports:
        tables = report_table(reports)
        with open(os.path.join(cfg.out, "report.csv"), "w", encoding="utf-8") as fh:
            fh.write(tables.machine)
        with open(os.path.join(cfg.out, "report.txt"), "w", encoding="utf-8") as fh:
            fh.write(tables.human)
        print(tables.human, end="")
        return 0
    if failures:
        return failures[0][1].exit_code
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flamesense",
        description="Flame-image soft sensor for the combustion excess air coefficient.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    commands = {
        "synth": (cmd_synth, "generate a synthetic session"),
        "fit-model": (cmd_fit_model, "fit the ideal-flame model from references"),
        "extract": (cmd_extract, "extract similarity features for a session"),
        "train": (cmd_train, "train the regression network on a feature table"),
        "predict": (cmd_predict, "predict lambda for frames with a trained bundle"),
        "evaluate": (cmd_evaluate, "run the repeated-training comparison"),
        "report": (cmd_evaluate, "alias of evaluate"),
    }
    for name, (fn, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=fn)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--method")
        p.add_argument("--channels")
        p.add_argument("--weights", type=int, help="GMM weight-grid index")
        p.add_argument("--trainer", choices=TrainerId.ALL)
        p.add_argument("--runs", type=int)
        p.add_argument("--size", type=int)
        p.add_argument("--duration-s", dest="duration_s", type=float)
        p.add_argument("--frame-rate", dest="frame_rate", type=float)
        p.add_argument("--lambda-rate", dest="lambda_rate", type=float)
        p.add_argument("--lambda-min", dest="lambda_min", type=float)
        p.add_argument("--lambda-max", dest="lambda_max", type=float)
        p.add_argument("--noise-sigma", dest="noise_sigma", type=float)
        p.add_argument("--reference-count", dest="reference_count", type=int)
        p.add_argument("--grid", help="grid as ROWSxCOLS, e.g. 16x16")
        p.add_argument("--max-epochs", dest="max_epochs", type=int)
        p.add_argument("--patience", type=int)
        p.add_argument("--model", help="ideal-flame model file")
        p.add_argument("--manifest", help="synced manifest file")
        p.add_argument("--frame-index", dest="frame_index")
        p.add_argument("--lambda-log", dest="lambda_log")
        p.add_argument("--references", help="reference-frame manifest")
        p.add_argument("--features", help="feature table file")
        p.add_argument("--predictor", help="trained predictor bundle")
        p.add_argument("--methods", help="comma-separated method specs")
        p.add_argument("--trainers", help="comma-separated trainer ids")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    skip = {"command", "func", "config"}
    over = {
        k: v for k, v in vars(args).items() if k not in skip and k != "grid"
    }
    if getattr(args, "grid", None):
        try:
            rows, cols = (int(t) for t in args.grid.lower().split("x"))
        except ValueError:
            raise ConfigInvalid(f"--grid must look like 16x16, got {args.grid!r}")
        over["grid_rows"] = rows
        over["grid_cols"] = cols
    for key in ("methods", "trainers"):
        if over.get(key) is not None:
            over[key] = [t for t in over[key].split(",") if t]
    return over


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        return args.func(cfg)
    except FlameSenseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
