"""Ideal-combustion statistical model.

The model pools every pixel of the reference frames (frames captured while
the excess air coefficient sat in the ideal band [1.2, 1.5]) into one
sample per channel and records the first two moments per channel plus the
cross-channel covariance matrices for the {RG, RB, GB, RGB} subsets.
All moments are population moments (denominator M*N, not M*N - 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _textfmt
from .errors import (
    CorruptModel,
    DimensionMismatch,
    EmptyReference,
    LambdaOutOfBand,
)
from .imaging import Channel, ChannelPlane, RgbImage, extract_channel

__all__ = [
    "ChannelStats",
    "CovMatrix",
    "IdealFlameModel",
    "channel_mean",
    "channel_std",
    "channel_cov",
    "fit_ideal_model",
    "save_model",
    "load_model",
    "IDEAL_BAND",
    "COV_SUBSETS",
]

#: Ideal-combustion band for the excess air coefficient.
IDEAL_BAND = (1.2, 1.5)

#: The channel subsets whose covariance matrices the model carries.
COV_SUBSETS: tuple[tuple[Channel, ...], ...] = (
    (Channel.R, Channel.G),
    (Channel.R, Channel.B),
    (Channel.G, Channel.B),
    (Channel.R, Channel.G, Channel.B),
)


@dataclass(frozen=True)
class ChannelStats:
    """Population mean and standard deviation of one channel's intensities."""

    mean: float
    std: float


@dataclass(frozen=True)
class CovMatrix:
    """Population covariance matrix over an ordered channel subset."""

    channels: tuple[Channel, ...]
    matrix: np.ndarray  # (d, d) float64

    def __post_init__(self):
        mat = np.ascontiguousarray(np.asarray(self.matrix, dtype=np.float64))
        d = len(self.channels)
        if mat.shape != (d, d):
            raise DimensionMismatch(
                f"covariance for {d} channels must be {d}x{d}, got {mat.shape}"
            )
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)


@dataclass(frozen=True)
class IdealFlameModel:
    """Per-channel moments and channel-subset covariances of the ideal flame."""

    stats: dict[Channel, ChannelStats]
    covs: dict[tuple[Channel, ...], CovMatrix]
    frame_count: int
    lambda_min: float
    lambda_max: float

    @property
    def is_degenerate(self) -> bool:
        """True when any channel has zero spread (density evaluation will refuse it)."""
        return any(s.std <= 0.0 for s in self.stats.values())

    def mean_vector(self, channels: tuple[Channel, ...]) -> np.ndarray:
        return np.array([self.stats[c].mean for c in channels])

    def cov_for(self, channels: tuple[Channel, ...]) -> CovMatrix:
        key = tuple(sorted(channels, key=lambda c: "RGB".index(c.value)))
        try:
            return self.covs[key]
        except KeyError:
            raise KeyError(f"no covariance stored for subset {channels}") from None


def channel_mean(plane: ChannelPlane) -> float:
    """Arithmetic mean of all plane intensities."""
    return float(np.mean(plane.values))


def channel_std(plane: ChannelPlane) -> float:
    """Population standard deviation of all plane intensities."""
    return float(np.std(plane.values))


def channel_cov(a: ChannelPlane, b: ChannelPlane) -> float:
    """Population cross-covariance of two planes of identical shape."""
    if a.values.shape != b.values.shape:
        raise DimensionMismatch(
            f"plane shapes differ: {a.values.shape} vs {b.values.shape}"
        )
    da = a.values - np.mean(a.values)
    db = b.values - np.mean(b.values)
    return float(np.mean(da * db))


def fit_ideal_model(
    frames: list[RgbImage], lambdas: list[float]
) -> IdealFlameModel:
    """Fit the ideal-flame model from reference frames captured in the ideal band.

    All pixels of all frames are pooled into a single sample per channel;
    moments and covariances are computed over that pooled sample.  Raises
    LambdaOutOfBand if any reference lambda lies outside [1.2, 1.5].
    """
    if len(frames) < 2:
        raise EmptyReference(
            f"need at least 2 reference frames, got {len(frames)}"
        )
    if len(lambdas) != len(frames):
        raise DimensionMismatch(
            f"{len(frames)} frames but {len(lambdas)} lambda values"
        )
    lo, hi = IDEAL_BAND
    for lam in lambdas:
        if not (lo <= lam <= hi):
            raise LambdaOutOfBand(
                f"reference lambda {lam} outside ideal band [{lo}, {hi}]"
            )
    shape = frames[0].pixels.shape
    for f in frames[1:]:
        if f.pixels.shape != shape:
            raise DimensionMismatch(
                f"reference frames differ in size: {shape} vs {f.pixels.shape}"
            )

    # Pool pixels: one long vector per channel across every frame.
    pooled: dict[Channel, np.ndarray] = {}
    for ch in Channel:
        planes = [extract_channel(f, ch).values.ravel() for f in frames]
        pooled[ch] = np.concatenate(planes)

    stats = {
        ch: ChannelStats(mean=float(np.mean(v)), std=float(np.std(v)))
        for ch, v in pooled.items()
    }

    centered = {
        ch: pooled[ch] - stats[ch].mean for ch in (Channel.R, Channel.G, Channel.B)
    }
    n = pooled[Channel.R].size
    covs = {}
    for subset in COV_SUBSETS:
        d = len(subset)
        mat = np.empty((d, d))
        for i, ci in enumerate(subset):
            for j, cj in enumerate(subset):
                if j < i:
                    mat[i, j] = mat[j, i]
                else:
                    mat[i, j] = float(np.dot(centered[ci], centered[cj]) / n)
        covs[subset] = CovMatrix(subset, mat)

    return IdealFlameModel(
        stats=stats,
        covs=covs,
        frame_count=len(frames),
        lambda_min=float(min(lambdas)),
        lambda_max=float(max(lambdas)),
    )


_FORMAT = "flamesense-model"
_VERSION = 1


def model_lines(model: IdealFlameModel) -> list[str]:
    """Serialize a model to its named-field text lines (no header/checksum)."""
    lines = [
        f"frames {model.frame_count}",
        f"lambda_min {_textfmt.fmt_float(model.lambda_min)}",
        f"lambda_max {_textfmt.fmt_float(model.lambda_max)}",
    ]
    for ch in Channel:
        s = model.stats[ch]
        lines.append(
            f"channel {ch.value} mean {_textfmt.fmt_float(s.mean)} "
            f"std {_textfmt.fmt_float(s.std)}"
        )
    for subset in COV_SUBSETS:
        label = "-".join(c.value for c in subset)
        entries = _textfmt.fmt_floats(model.covs[subset].matrix.ravel())
        lines.append(f"cov {label} {entries}")
    return lines


def model_from_lines(lines: list[str], origin: str = "model") -> IdealFlameModel:
    """Parse the text lines produced by :func:`model_lines`."""
    fields: dict[str, list[str]] = {}
    stats: dict[Channel, ChannelStats] = {}
    covs: dict[tuple[Channel, ...], CovMatrix] = {}
    try:
        for line in lines:
            parts = line.split()
            if parts[0] == "channel":
                ch = Channel(parts[1])
                stats[ch] = ChannelStats(
                    mean=float(parts[3]), std=float(parts[5])
                )
            elif parts[0] == "cov":
                subset = tuple(Channel(c) for c in parts[1].split("-"))
                d = len(subset)
                vals = np.array([float(x) for x in parts[2:]])
                covs[subset] = CovMatrix(subset, vals.reshape(d, d))
            else:
                fields[parts[0]] = parts[1:]
        model = IdealFlameModel(
            stats=stats,
            covs=covs,
            frame_count=int(fields["frames"][0]),
            lambda_min=float(fields["lambda_min"][0]),
            lambda_max=float(fields["lambda_max"][0]),
        )
    except (KeyError, IndexError, ValueError) as exc:
        raise CorruptModel(f"{origin}: malformed model field: {exc}") from exc
    if set(model.stats) != set(Channel) or set(model.covs) != set(COV_SUBSETS):
        raise CorruptModel(f"{origin}: model is missing channels or covariances")
    return model


def save_model(model: IdealFlameModel, path) -> None:
    """Write the model as versioned, checksummed text."""
    _textfmt.write_checksummed(path, _FORMAT, _VERSION, model_lines(model))


def load_model(path) -> IdealFlameModel:
    """Read a model written by :func:`save_model`; lossless round trip."""
    lines = _textfmt.read_checksummed(path, _FORMAT, _VERSION)
    return model_from_lines(lines, origin=str(path))
