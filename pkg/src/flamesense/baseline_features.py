"""Best-effort reconstructions of literature baseline feature sets.

These exist so the comparison harness can rank the similarity methods
against simpler global features (histograms, texture co-occurrence,
statistical moments, radiant-energy summaries, PCA projections).  Only
the feature counts are fixed by the sources being reconstructed; bin
ranges, quantization levels, offsets, and norms follow the documented
choices below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, InsufficientData, TooSmall
from .imaging import Channel, ChannelPlane, GridSpec, RgbImage, extract_channel, window_view

__all__ = [
    "BaselineId",
    "BASELINE_LENGTHS",
    "UNAVAILABLE_BASELINES",
    "stat_moments",
    "grad_magnitude_mean",
    "hue_hist",
    "blue_hist",
    "cooccurrence64",
    "res_features",
    "res_mean",
    "Pca2Basis",
    "pca2_fit",
    "pca2_apply",
    "compute_baseline",
]


class BaselineId:
    HUE_HIST = "HueHist86"
    COOC = "Cooc64"
    BLUE_HIST = "BlueHist255"
    PCA2 = "Pca2"
    RES_FRO_INF = "ResFroInf4"
    RES_MEAN = "ResMean1"
    MOMENTS4 = "Moments4"
    MOMENTS5_GRAD = "Moments5Grad"

    ALL = (
        HUE_HIST,
        COOC,
        BLUE_HIST,
        PCA2,
        RES_FRO_INF,
        RES_MEAN,
        MOMENTS4,
        MOMENTS5_GRAD,
    )


BASELINE_LENGTHS = {
    BaselineId.HUE_HIST: 86,
    BaselineId.COOC: 64,
    BaselineId.BLUE_HIST: 255,
    BaselineId.PCA2: 2,
    BaselineId.RES_FRO_INF: 4,
    BaselineId.RES_MEAN: 1,
    BaselineId.MOMENTS4: 4,
    BaselineId.MOMENTS5_GRAD: 5,
}

#: Flicker-style temporal baselines have no computable single-frame
#: definition; the harness reports them as unavailable rather than failing.
UNAVAILABLE_BASELINES = ("Flicker3", "Flicker5")

# Selected hue bins: quantized hue values 0..84 plus the single bin 230,
# 86 bins total.
_HUE_BINS = tuple(range(85)) + (230,)


def stat_moments(plane: ChannelPlane) -> tuple[float, float, float, float]:
    """(mean, std, kurtosis, skewness) with population normalization.

    Kurtosis is the raw fourth standardized moment (3 for a normal
    distribution).  A zero-spread plane returns zeros for std, kurtosis,
    and skewness by convention.
    """
    v = plane.values
    mu = float(np.mean(v))
    dev = v - mu
    var = float(np.mean(dev * dev))
    std = float(np.sqrt(var))
    if std == 0.0:
        return mu, 0.0, 0.0, 0.0
    skew = float(np.mean(dev**3)) / std**3
    kurt = float(np.mean(dev**4)) / std**4
    return mu, std, kurt, skew


def grad_magnitude_mean(plane: ChannelPlane) -> float:
    """Mean gradient magnitude over interior pixels, central differences."""
    v = plane.values
    if v.shape[0] < 3 or v.shape[1] < 3:
        raise TooSmall("central differences need at least a 3x3 plane")
    gx = (v[1:-1, 2:] - v[1:-1, :-2]) / 2.0
    gy = (v[2:, 1:-1] - v[:-2, 1:-1]) / 2.0
    return float(np.mean(np.sqrt(gx * gx + gy * gy)))


def _hue_quantized(img: RgbImage) -> np.ndarray:
    """Hue per pixel, quantized to integers 0..255 (gray pixels map to 0)."""
    px = img.pixels.astype(np.float64)
    r, g, b = px[:, :, 0], px[:, :, 1], px[:, :, 2]
    maxc = np.max(px, axis=2)
    minc = np.min(px, axis=2)
    delta = maxc - minc
    safe = np.where(delta == 0, 1.0, delta)

    hue = np.zeros_like(maxc)
    is_r = (maxc == r) & (delta > 0)
    is_g = (maxc == g) & (delta > 0) & ~is_r
    is_b = (delta > 0) & ~is_r & ~is_g
    hue[is_r] = np.mod((g - b)[is_r] / safe[is_r], 6.0)
    hue[is_g] = (b - r)[is_g] / safe[is_g] + 2.0
    hue[is_b] = (r - g)[is_b] / safe[is_b] + 4.0
    hue *= 60.0  # degrees in [0, 360)
    return np.rint(hue * 255.0 / 360.0).astype(np.int64)


def hue_hist(img: RgbImage) -> np.ndarray:
    """Normalized counts of quantized hue over the 86 selected bins."""
    q = _hue_quantized(img)
    counts = np.bincount(q.ravel(), minlength=256)
    total = q.size
    return counts[np.array(_HUE_BINS)] / total


def blue_hist(img: RgbImage) -> np.ndarray:
    """Normalized counts of blue values 1..255 (255 bins; value 0 excluded)."""
    b = img.pixels[:, :, 2]
    counts = np.bincount(b.ravel(), minlength=256)
    return counts[1:256] / b.size


def cooccurrence64(plane: ChannelPlane) -> np.ndarray:
    """Gray co-occurrence at offset (0, 1) over 8 levels, row-major 64 values."""
    v = plane.values
    if v.shape[0] < 2 or v.shape[1] < 2:
        raise TooSmall("co-occurrence needs at least a 2x2 plane")
    q = np.floor_divide(v, 32.0).astype(np.int64)
    q = np.clip(q, 0, 7)
    left = q[:, :-1].ravel()
    right = q[:, 1:].ravel()
    counts = np.bincount(left * 8 + right, minlength=64).astype(np.float64)
    return counts / left.size


def res_features(plane: ChannelPlane) -> tuple[float, float, float, float]:
    """(mean, frobenius, infinity, spectral) norms of the gray plane."""
    v = plane.values
    mean = float(np.mean(v))
    fro = float(np.sqrt(np.sum(v * v)))
    inf = float(np.max(np.sum(np.abs(v), axis=1)))
    return mean, fro, inf, spectral_norm(v)


def res_mean(plane: ChannelPlane) -> float:
    """Mean gray value (the classic radiant-energy scalar)."""
    return float(np.mean(plane.values))


def spectral_norm(a: np.ndarray, tol: float = 1e-8, max_iter: int = 10_000) -> float:
    """Largest singular value via power iteration on A^T A.

    Deterministic seeded start vector, with a reseeded restart in the
    (measure-zero) case that the start lands in the null space; converges
    to ``tol`` relative change in the singular-value estimate.
    """
    a = np.asarray(a, dtype=np.float64)
    if not np.any(a):
        return 0.0
    n = a.shape[1]
    for seed in range(3):
        v = np.random.default_rng(seed).standard_normal(n)
        v /= np.linalg.norm(v)
        sigma = 0.0
        for _ in range(max_iter):
            av = a @ v
            new_sigma = float(np.linalg.norm(av))
            if new_sigma == 0.0:
                break  # start vector was in the null space; reseed
            w = a.T @ av
            v = w / np.linalg.norm(w)
            if abs(new_sigma - sigma) <= tol * new_sigma:
                return new_sigma
            sigma = new_sigma
        else:
            return sigma
    return 0.0


_PCA_GRID = GridSpec(16, 16)


def _downsample256(values: np.ndarray) -> np.ndarray:
    """Window-mean downsample of a plane to a 256-entry vector."""
    if values.shape[0] % 16 or values.shape[1] % 16:
        raise GridMismatch(
            f"plane {values.shape} is not divisible by the 16x16 downsample grid"
        )
    return window_view(values, _PCA_GRID).mean(axis=(1, 2))


@dataclass(frozen=True)
class Pca2Basis:
    """Mean vector and top-2 principal directions of downsampled planes."""

    mean: np.ndarray  # (256,)
    components: np.ndarray  # (2, 256)


def pca2_fit(planes: list[ChannelPlane]) -> Pca2Basis:
    """Fit the 2-component projection basis from training gray planes."""
    if len(planes) < 3:
        raise InsufficientData(
            f"PCA basis needs at least 3 training planes, got {len(planes)}"
        )
    data = np.stack([_downsample256(p.values) for p in planes])
    mean = data.mean(axis=0)
    centered = data - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[0] == 0.0 or s[1] <= s[0] * 1e-12:
        raise InsufficientData(
            "training planes span fewer than 2 directions; no PCA basis"
        )
    return Pca2Basis(mean=mean, components=vt[:2].copy())


def pca2_apply(basis: Pca2Basis, plane: ChannelPlane) -> np.ndarray:
    """Project a plane onto the fitted 2-component basis."""
    vec = _downsample256(plane.values) - basis.mean
    return basis.components @ vec


def compute_baseline(
    img: RgbImage, baseline: str, pca_basis: Pca2Basis | None = None
) -> np.ndarray:
    """Compute one baseline feature vector for a frame."""
    gray = extract_channel(img, Channel.I)
    if baseline == BaselineId.HUE_HIST:
        return hue_hist(img)
    if baseline == BaselineId.COOC:
        return cooccurrence64(gray)
    if baseline == BaselineId.BLUE_HIST:
        return blue_hist(img)
    if baseline == BaselineId.PCA2:
        if pca_basis is None:
            raise InsufficientData("PCA baseline requires a fitted basis")
        return pca2_apply(pca_basis, gray)
    if baseline == BaselineId.RES_FRO_INF:
        return np.array(res_features(gray))
    if baseline == BaselineId.RES_MEAN:
        return np.array([res_mean(gray)])
    if baseline == BaselineId.MOMENTS4:
        return np.array(stat_moments(gray))
    if baseline == BaselineId.MOMENTS5_GRAD:
        return np.array(list(stat_moments(gray)) + [grad_magnitude_mean(gray)])
    raise ValueError(f"unknown baseline {baseline!r}")
