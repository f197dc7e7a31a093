"""End-to-end predictor bundle: everything needed to map a frame to λ̂.

A bundle file carries the feature-method metadata (method, channels,
grid, mixture weights), the ideal-flame model, the feature standardizer,
and the trained network, as one checksummed versioned text file.  A
loaded bundle therefore predicts with zero external state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import flame_model as _fm
from ._textfmt import fmt_floats, read_checksummed, write_checksummed
from .ann import MlpModel, forward, mlp_from_lines, mlp_lines
from .dataset import (
    Standardizer,
    standardize_apply,
    standardizer_from_lines,
    standardizer_lines,
)
from .errors import CorruptModel, LengthMismatch
from .imaging import Channel, GridSpec, RgbImage, channels_label, parse_channels
from .similarity_features import FeatureMethod, GmmWeights, compute_features

__all__ = [
    "Predictor",
    "build_predictor",
    "predict_image",
    "save_predictor",
    "load_predictor",
]

_FORMAT = "flamesense-predictor"
_VERSION = 1


@dataclass(frozen=True)
class Predictor:
    """A trained soft sensor: feature recipe + standardizer + network."""

    method: str
    channels: tuple[Channel, ...]
    grid: GridSpec
    weights: GmmWeights | None
    ideal: _fm.IdealFlameModel
    standardizer: Standardizer
    network: MlpModel


def build_predictor(
    method: str,
    channels: tuple[Channel, ...],
    grid: GridSpec,
    weights: GmmWeights | None,
    ideal: _fm.IdealFlameModel,
    standardizer: Standardizer,
    network: MlpModel,
) -> Predictor:
    """Assemble a bundle, checking that the parts agree on dimensions."""
    if standardizer.mean.size != network.input_dim:
        raise LengthMismatch(
            f"standardizer is {standardizer.mean.size}-dimensional but the "
            f"network expects {network.input_dim} inputs"
        )
    return Predictor(
        method=method,
        channels=tuple(channels),
        grid=grid,
        weights=weights,
        ideal=ideal,
        standardizer=standardizer,
        network=network,
    )


def predict_image(pred: Predictor, img: RgbImage) -> float:
    """Extract features, standardize, and run the network on one frame."""
    fv = compute_features(
        img, pred.ideal, pred.method, pred.channels, pred.grid, pred.weights
    )
    if len(fv) != pred.standardizer.mean.size:
        raise LengthMismatch(
            f"frame produced {len(fv)} features, bundle expects "
            f"{pred.standardizer.mean.size}"
        )
    return forward(pred.network, standardize_apply(pred.standardizer, fv.values))


def _weights_line(weights: GmmWeights | None) -> str:
    if weights is None:
        return "weights -"
    return (
        f"weights {weights.swept.value} {weights.b} "
        + fmt_floats(weights.weights)
    )


def _parse_weights_line(line: str, channels: tuple[Channel, ...]) -> GmmWeights | None:
    parts = line.split()
    if parts == ["weights", "-"]:
        return None
    if len(parts) != 3 + len(channels):
        raise CorruptModel("malformed weights line")
    swept = Channel(parts[1])
    b = int(parts[2])
    values = tuple(float(t) for t in parts[3:])
    return GmmWeights(channels, values, b, swept)


def save_predictor(path, pred: Predictor) -> None:
    lines = [
        f"method {pred.method}",
        f"channels {channels_label(pred.channels)}",
        f"grid {pred.grid.grid_rows} {pred.grid.grid_cols}",
        _weights_line(pred.weights),
        "begin model",
        *_fm.model_lines(pred.ideal),
        "end model",
        "begin standardizer",
        *standardizer_lines(pred.standardizer),
        "end standardizer",
        "begin network",
        *mlp_lines(pred.network),
        "end network",
    ]
    write_checksummed(path, _FORMAT, _VERSION, lines)


def _split_sections(path, lines: list[str]):
    head: list[str] = []
    sections: dict[str, list[str]] = {}
    current: str | None = None
    for ln in lines:
        if ln.startswith("begin "):
            if current is not None:
                raise CorruptModel(f"{path}: nested section {ln!r}")
            current = ln.split(maxsplit=1)[1]
            sections[current] = []
        elif ln.startswith("end "):
            if current != ln.split(maxsplit=1)[1]:
                raise CorruptModel(f"{path}: mismatched section end {ln!r}")
            current = None
        elif current is None:
            head.append(ln)
        else:
            sections[current].append(ln)
    if current is not None:
        raise CorruptModel(f"{path}: unterminated section {current!r}")
    return head, sections


def load_predictor(path) -> Predictor:
    lines = read_checksummed(path, _FORMAT, _VERSION)
    head, sections = _split_sections(path, lines)
    fields = {}
    for ln in head:
        key, _, rest = ln.partition(" ")
        fields[key] = rest
    missing = {"method", "channels", "grid", "weights"} - set(fields)
    if missing or set(sections) != {"model", "standardizer", "network"}:
        raise CorruptModel(f"{path}: incomplete predictor bundle")
    if fields["method"] not in FeatureMethod.ALL:
        raise CorruptModel(f"{path}: unknown method {fields['method']!r}")
    try:
        channels = parse_channels(fields["channels"])
        rows, cols = (int(t) for t in fields["grid"].split())
        grid = GridSpec(rows, cols)
        weights = _parse_weights_line("weights " + fields["weights"], channels)
    except (ValueError, KeyError) as exc:
        raise CorruptModel(f"{path}: malformed bundle header: {exc}") from None
    return build_predictor(
        method=fields["method"],
        channels=channels,
        grid=grid,
        weights=weights,
        ideal=_fm.model_from_lines(sections["model"], origin=str(path)),
        standardizer=standardizer_from_lines(sections["standardizer"]),
        network=mlp_from_lines(sections["network"]),
    )
