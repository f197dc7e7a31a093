"""Session ingestion: λ-log/frame-index files, cubic synchronization,
seeded splitting, and feature standardization.

File formats (decimal text, one header line):

* λ log:        ``timestamp_s,lambda``
* frame index:  ``timestamp_s,image_path``
* manifest:     ``timestamp_s,image_path,lambda``

Image paths are stored relative to the file that contains them and are
resolved on read, so session directories relocate cleanly and repeated
runs produce byte-identical files.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from ._textfmt import fmt_float, fmt_floats, read_checksummed, write_checksummed
from .errors import (
    ConfigInvalid,
    CorruptModel,
    DataFormatError,
    EmptyInput,
    LengthMismatch,
    OutOfRange,
    TooFewPoints,
)
from .imaging import GridSpec

__all__ = [
    "LambdaLog",
    "FrameIndex",
    "SyncReport",
    "SyncedDataset",
    "SplitSpec",
    "Standardizer",
    "FeatureTable",
    "read_lambda_log",
    "write_lambda_log",
    "read_frame_index",
    "write_frame_index",
    "read_manifest",
    "write_manifest",
    "cubic_interp",
    "sync",
    "split",
    "standardize_fit",
    "standardize_apply",
    "standardize_invert",
    "standardizer_lines",
    "standardizer_from_lines",
    "read_feature_table",
    "write_feature_table",
]


def _as_increasing(timestamps, what: str) -> np.ndarray:
    ts = np.asarray(timestamps, dtype=np.float64)
    if ts.ndim != 1:
        raise DataFormatError(f"{what} timestamps must be one-dimensional")
    if ts.size and not np.all(np.isfinite(ts)):
        raise DataFormatError(f"{what} timestamps must be finite")
    if ts.size > 1 and not np.all(np.diff(ts) > 0):
        raise DataFormatError(f"{what} timestamps must be strictly increasing")
    return ts


@dataclass(frozen=True)
class LambdaLog:
    """Analyzer readings: strictly increasing timestamps, positive λ."""

    timestamps: np.ndarray
    lambdas: np.ndarray

    def __post_init__(self):
        ts = _as_increasing(self.timestamps, "lambda log")
        lam = np.asarray(self.lambdas, dtype=np.float64)
        if lam.shape != ts.shape:
            raise LengthMismatch(
                f"lambda log has {ts.size} timestamps but {lam.size} values"
            )
        if lam.size and (not np.all(np.isfinite(lam)) or np.any(lam <= 0)):
            raise DataFormatError("lambda values must be finite and positive")
        ts.flags.writeable = False
        lam.flags.writeable = False
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "lambdas", lam)

    def __len__(self) -> int:
        return self.timestamps.size

    @property
    def span(self) -> tuple[float, float]:
        if not len(self):
            raise EmptyInput("empty lambda log has no time span")
        return float(self.timestamps[0]), float(self.timestamps[-1])


@dataclass(frozen=True)
class FrameIndex:
    """Camera frames: strictly increasing timestamps, one path per frame."""

    timestamps: np.ndarray
    paths: tuple[str, ...]

    def __post_init__(self):
        ts = _as_increasing(self.timestamps, "frame index")
        paths = tuple(self.paths)
        if len(paths) != ts.size:
            raise LengthMismatch(
                f"frame index has {ts.size} timestamps but {len(paths)} paths"
            )
        ts.flags.writeable = False
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "paths", paths)

    def __len__(self) -> int:
        return self.timestamps.size


@dataclass(frozen=True)
class SyncReport:
    """Bookkeeping for frames dropped outside the λ log's span."""

    frame_count: int
    paired_count: int
    dropped_before: int
    dropped_after: int


@dataclass(frozen=True)
class SyncedDataset:
    """Frames paired with interpolated λ targets inside the log span."""

    timestamps: np.ndarray
    paths: tuple[str, ...]
    lambdas: np.ndarray
    report: SyncReport

    def __post_init__(self):
        ts = _as_increasing(self.timestamps, "synced dataset")
        lam = np.asarray(self.lambdas, dtype=np.float64)
        paths = tuple(self.paths)
        if not (ts.size == lam.size == len(paths)):
            raise LengthMismatch("synced dataset columns differ in length")
        if lam.size and (not np.all(np.isfinite(lam)) or np.any(lam <= 0)):
            raise DataFormatError("synced targets must be finite and positive")
        ts.flags.writeable = False
        lam.flags.writeable = False
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "paths", paths)

    def __len__(self) -> int:
        return self.timestamps.size


@dataclass(frozen=True)
class SplitSpec:
    """Random split ratios (train, validation, test) plus the seed."""

    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15)
    seed: int = 0

    def __post_init__(self):
        if len(self.ratios) != 3 or any(r <= 0 for r in self.ratios):
            raise ConfigInvalid(f"split ratios must be three positives: {self.ratios}")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ConfigInvalid(f"split ratios must sum to 1: {self.ratios}")


# ---------------------------------------------------------------------------
# file I/O


def _read_rows(path: str | os.PathLike, header: str, n_fields: int) -> list[list[str]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise DataFormatError(f"{path}: empty file")
    if lines[0].strip() != header:
        raise DataFormatError(f"{path}: expected header {header!r}, got {lines[0]!r}")
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != n_fields:
            raise DataFormatError(
                f"{path}:{i}: expected {n_fields} comma-separated fields"
            )
        rows.append(parts)
    return rows


def _parse_float(path, row_no: int, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataFormatError(f"{path}:{row_no}: not a number: {text!r}") from None


def _resolve(base_dir: str, path: str) -> str:
    if os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(base_dir, path))


def _relativize(out_path: str | os.PathLike, path: str) -> str:
    # Stored paths are relative to the containing file so that identical
    # session layouts serialize to identical bytes wherever they live.
    base = os.path.dirname(os.path.abspath(out_path))
    return os.path.relpath(path, base) if os.path.isabs(path) else path


def read_lambda_log(path: str | os.PathLike) -> LambdaLog:
    rows = _read_rows(path, "timestamp_s,lambda", 2)
    ts = [_parse_float(path, i + 2, r[0]) for i, r in enumerate(rows)]
    lam = [_parse_float(path, i + 2, r[1]) for i, r in enumerate(rows)]
    return LambdaLog(np.array(ts), np.array(lam))


def write_lambda_log(path: str | os.PathLike, log: LambdaLog) -> None:
    lines = ["timestamp_s,lambda"]
    for t, v in zip(log.timestamps, log.lambdas):
        lines.append(f"{fmt_float(t)},{fmt_float(v)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_frame_index(path: str | os.PathLike) -> FrameIndex:
    rows = _read_rows(path, "timestamp_s,image_path", 2)
    base = os.path.dirname(os.path.abspath(path))
    ts = [_parse_float(path, i + 2, r[0]) for i, r in enumerate(rows)]
    paths = tuple(_resolve(base, r[1]) for r in rows)
    return FrameIndex(np.array(ts), paths)


def write_frame_index(path: str | os.PathLike, frames: FrameIndex) -> None:
    lines = ["timestamp_s,image_path"]
    for t, p in zip(frames.timestamps, frames.paths):
        lines.append(f"{fmt_float(t)},{_relativize(path, p)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(path: str | os.PathLike) -> SyncedDataset:
    rows = _read_rows(path, "timestamp_s,image_path,lambda", 3)
    base = os.path.dirname(os.path.abspath(path))
    ts = [_parse_float(path, i + 2, r[0]) for i, r in enumerate(rows)]
    paths = tuple(_resolve(base, r[1]) for r in rows)
    lam = [_parse_float(path, i + 2, r[2]) for i, r in enumerate(rows)]
    n = len(rows)
    report = SyncReport(frame_count=n, paired_count=n, dropped_before=0, dropped_after=0)
    return SyncedDataset(np.array(ts), paths, np.array(lam), report)


def write_manifest(path: str | os.PathLike, ds: SyncedDataset) -> None:
    lines = ["timestamp_s,image_path,lambda"]
    for t, p, v in zip(ds.timestamps, ds.paths, ds.lambdas):
        lines.append(f"{fmt_float(t)},{_relativize(path, p)},{fmt_float(v)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# synchronization


def _build_spline(log: LambdaLog) -> CubicSpline:
    if len(log) < 4:
        raise TooFewPoints(
            f"cubic interpolation needs at least 4 lambda samples, got {len(log)}"
        )
    # Not-a-knot ends: reproduces cubic polynomials exactly, which natural
    # boundary conditions would not.
    return CubicSpline(log.timestamps, log.lambdas, bc_type="not-a-knot")


def cubic_interp(log: LambdaLog, t: float) -> float:
    """Evaluate the not-a-knot cubic spline through the log at time ``t``."""
    spline = _build_spline(log)
    lo, hi = log.span
    if not (lo <= t <= hi):
        raise OutOfRange(f"query time {t} outside lambda log span [{lo}, {hi}]")
    return float(spline(t))


def sync(frames: FrameIndex, log: LambdaLog) -> SyncedDataset:
    """Pair every frame inside the λ log's span with an interpolated target.

    Frames before the first or after the last λ sample are dropped (no
    extrapolation) and counted in the returned dataset's report.
    """
    if not len(frames):
        raise EmptyInput("frame index is empty; nothing to synchronize")
    spline = _build_spline(log)
    lo, hi = log.span
    before = frames.timestamps < lo
    after = frames.timestamps > hi
    inside = ~(before | after)
    ts = frames.timestamps[inside]
    paths = tuple(p for p, keep in zip(frames.paths, inside) if keep)
    lam = np.asarray(spline(ts), dtype=np.float64)
    report = SyncReport(
        frame_count=len(frames),
        paired_count=int(ts.size),
        dropped_before=int(np.count_nonzero(before)),
        dropped_after=int(np.count_nonzero(after)),
    )
    return SyncedDataset(ts, paths, lam, report)


# ---------------------------------------------------------------------------
# splitting


def split(
    dataset, spec: SplitSpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded random partition into (train, validation, test) index arrays.

    Validation and test sizes are floors of their ratios; training takes
    the remainder, so C=9956 yields 6970/1493/1493.
    """
    count = dataset if isinstance(dataset, int) else len(dataset)
    if count <= 0:
        raise EmptyInput("cannot split an empty dataset")
    n_val = math.floor(spec.ratios[1] * count)
    n_test = math.floor(spec.ratios[2] * count)
    n_train = count - n_val - n_test
    perm = np.random.default_rng(spec.seed).permutation(count)
    return (
        perm[:n_train],
        perm[n_train : n_train + n_val],
        perm[n_train + n_val :],
    )


# ---------------------------------------------------------------------------
# standardization


@dataclass(frozen=True)
class Standardizer:
    """Per-feature z-score parameters fitted on the training split."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.shape != std.shape or mean.ndim != 1:
            raise LengthMismatch("standardizer mean/std must be equal-length vectors")
        if np.any(std <= 0):
            raise DataFormatError("standardizer std entries must be positive")
        mean.flags.writeable = False
        std.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)


def standardize_fit(features: np.ndarray) -> Standardizer:
    """Fit per-column mean/std on training features; std floored at 1e-12."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptyInput("standardizer needs a non-empty 2-D feature matrix")
    mean = x.mean(axis=0)
    std = np.maximum(x.std(axis=0), 1e-12)
    return Standardizer(mean=mean, std=std)


def standardize_apply(std: Standardizer, features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != std.mean.size:
        raise LengthMismatch(
            f"features have {x.shape[-1]} columns, standardizer has {std.mean.size}"
        )
    return (x - std.mean) / std.std


def standardize_invert(std: Standardizer, features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != std.mean.size:
        raise LengthMismatch(
            f"features have {x.shape[-1]} columns, standardizer has {std.mean.size}"
        )
    return x * std.std + std.mean


def standardizer_lines(std: Standardizer) -> list[str]:
    return [
        f"dim {std.mean.size}",
        "mean " + fmt_floats(std.mean),
        "std " + fmt_floats(std.std),
    ]


def standardizer_from_lines(lines: list[str]) -> Standardizer:
    if len(lines) != 3 or not lines[0].startswith("dim "):
        raise CorruptModel("malformed standardizer block")
    dim = int(lines[0].split()[1])
    mean = np.array([float(t) for t in lines[1].split()[1:]])
    std = np.array([float(t) for t in lines[2].split()[1:]])
    if mean.size != dim or std.size != dim:
        raise CorruptModel("standardizer block length mismatch")
    return Standardizer(mean=mean, std=std)


# ---------------------------------------------------------------------------
# feature tables

_FEATURES_FORMAT = "flamesense-features"
_FEATURES_VERSION = 1


@dataclass(frozen=True)
class FeatureTable:
    """Per-frame feature vectors with targets, plus extraction metadata."""

    method: str
    channels: str
    grid: GridSpec
    weights: str  # GMM weight label, or "" for weightless methods
    timestamps: np.ndarray
    lambdas: np.ndarray
    features: np.ndarray  # (C, D)

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.float64)
        lam = np.asarray(self.lambdas, dtype=np.float64)
        feat = np.asarray(self.features, dtype=np.float64)
        if feat.ndim != 2 or ts.ndim != 1 or not (ts.size == lam.size == feat.shape[0]):
            raise LengthMismatch("feature table columns differ in length")
        for arr in (ts, lam, feat):
            arr.flags.writeable = False
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "features", feat)

    def __len__(self) -> int:
        return self.timestamps.size

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def write_feature_table(path: str | os.PathLike, table: FeatureTable) -> None:
    lines = [
        f"method {table.method}",
        f"channels {table.channels}",
        f"grid {table.grid.grid_rows} {table.grid.grid_cols}",
        f"weights {table.weights or '-'}",
        f"count {len(table)} dim {table.dim}",
    ]
    for t, lam, row in zip(table.timestamps, table.lambdas, table.features):
        lines.append(f"row {fmt_float(t)} {fmt_float(lam)} " + fmt_floats(row))
    write_checksummed(path, _FEATURES_FORMAT, _FEATURES_VERSION, lines)


def read_feature_table(path: str | os.PathLike) -> FeatureTable:
    lines = read_checksummed(path, _FEATURES_FORMAT, _FEATURES_VERSION)
    if len(lines) < 5:
        raise CorruptModel(f"{path}: truncated feature table")
    head = {}
    for ln in lines[:4]:
        key, _, rest = ln.partition(" ")
        head[key] = rest
    count_parts = lines[4].split()
    if (
        set(head) != {"method", "channels", "grid", "weights"}
        or len(count_parts) != 4
        or count_parts[0] != "count"
        or count_parts[2] != "dim"
    ):
        raise CorruptModel(f"{path}: malformed feature table header")
    count, dim = int(count_parts[1]), int(count_parts[3])
    rows = lines[5:]
    if len(rows) != count:
        raise CorruptModel(f"{path}: expected {count} rows, found {len(rows)}")
    ts = np.empty(count)
    lam = np.empty(count)
    feats = np.empty((count, dim))
    for i, ln in enumerate(rows):
        parts = ln.split()
        if parts[0] != "row" or len(parts) != 3 + dim:
            raise CorruptModel(f"{path}: malformed feature row {i}")
        ts[i] = float(parts[1])
        lam[i] = float(parts[2])
        feats[i] = [float(t) for t in parts[3:]]
    gr, gc = (int(t) for t in head["grid"].split())
    weights = "" if head["weights"] == "-" else head["weights"]
    return FeatureTable(
        method=head["method"],
        channels=head["channels"],
        grid=GridSpec(gr, gc),
        weights=weights,
        timestamps=ts,
        lambdas=lam,
        features=feats,
    )
