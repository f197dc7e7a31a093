"""Gaussian-similarity feature extraction.

Each frame is scored against the ideal-flame model window by window, using
one of four methods:

* sum of similarity -- per channel, sum the univariate normal density of
  every pixel in the window (one value per window per channel);
* Naive Bayes similarity -- multiply the channel densities per pixel and
  sum the products over the window (one value per window);
* multivariate normal similarity -- evaluate the joint normal density of
  the pixel's channel tuple under the subset covariance matrix, summed
  over the window;
* Gaussian-mixture similarity -- per pixel, a convex combination of the
  channel densities with weights drawn from an incremental grid, summed
  over the window.

All methods aggregate per-pixel densities by summation over the window, so
feature values are finite, non-negative, and additive over disjoint pixel
sets.  The gray channel is admitted only for sum-of-similarity; the other
methods treat it as dependent on R, G, B and reject it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateModel,
    IllegalChannel,
    SingularCovariance,
    WeightMismatch,
)
from .flame_model import IdealFlameModel
from .imaging import Channel, GridSpec, RgbImage, extract_channel, window_view

__all__ = [
    "FeatureMethod",
    "FeatureVector",
    "GmmWeights",
    "pdf_uni",
    "feat_sum_similarity",
    "feat_naive_bayes",
    "feat_mvn",
    "feat_gmm",
    "gmm_weight_grid",
    "select_gmm_weights",
    "compute_features",
    "feature_length",
]

#: Standard deviations at or below this are treated as degenerate.
SIGMA_FLOOR = 1e-9

#: Correlation-matrix determinants at or below this are treated as singular.
DET_FLOOR = 1e-12


class FeatureMethod:
    """String identifiers for the four similarity methods."""

    SUM_SIM = "SumSim"
    NAIVE_BAYES = "NaiveBayes"
    MVN = "MVN"
    GMM = "GMM"

    ALL = (SUM_SIM, NAIVE_BAYES, MVN, GMM)


@dataclass(frozen=True)
class FeatureVector:
    """Ordered per-window feature values for one frame.

    Sum-of-similarity vectors are channel-major: all windows of the first
    channel, then all windows of the next.  The other methods emit one
    value per window.
    """

    values: np.ndarray
    method: str
    channels: tuple[Channel, ...]
    grid: GridSpec
    model_ref: str = ""

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if not np.all(np.isfinite(vals)):
            raise ValueError("feature values must be finite")
        if np.any(vals < 0.0):
            raise ValueError("feature values must be non-negative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class GmmWeights:
    """One point of the incremental mixture-weight grid.

    ``weights[i]`` belongs to ``channels[i]``; the swept channel carries
    the incremented weight 0.05 + 0.1*b and the remaining channels share
    the complement equally.  Weights sum to exactly 1.0.
    """

    channels: tuple[Channel, ...]
    weights: tuple[float, ...]
    b: int
    swept: Channel

    def __post_init__(self):
        if len(self.channels) != len(self.weights):
            raise WeightMismatch("one weight per channel required")
        if any(w <= 0.0 for w in self.weights):
            raise WeightMismatch("mixture weights must be positive")
        if sum(self.weights) != 1.0:
            raise WeightMismatch("mixture weights must sum to exactly 1")

    def label(self) -> str:
        return "-".join(repr(w) for w in self.weights)


def _check_sigma(model: IdealFlameModel, channels) -> None:
    for ch in channels:
        if model.stats[ch].std <= SIGMA_FLOOR:
            raise DegenerateModel(
                f"channel {ch.value} has sigma <= {SIGMA_FLOOR}; "
                "refusing density evaluation"
            )


def _reject_gray(channels, method: str) -> None:
    if Channel.I in channels:
        raise IllegalChannel(
            f"gray channel is derived from R, G, B and is not allowed in {method}"
        )
    if not channels:
        raise IllegalChannel(f"{method} requires at least one channel")


def pdf_uni(x, mu: float, sigma: float):
    """Univariate normal density; works elementwise on arrays.

    Raises DegenerateModel when sigma is at or below the 1e-9 floor.
    """
    if sigma <= SIGMA_FLOOR:
        raise DegenerateModel(f"sigma {sigma} <= {SIGMA_FLOOR}")
    z = (np.asarray(x, dtype=np.float64) - mu) / sigma
    out = np.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))
    if np.ndim(x) == 0:
        return float(out)
    return out


def _window_sums(density: np.ndarray, spec: GridSpec) -> np.ndarray:
    """Sum a per-pixel density plane over each local window (row-major)."""
    return window_view(density, spec).sum(axis=(1, 2))


def feat_sum_similarity(
    img: RgbImage,
    model: IdealFlameModel,
    channels: tuple[Channel, ...],
    spec: GridSpec = GridSpec(),
) -> FeatureVector:
    """Sum of per-pixel channel densities per window, channel-major.

    For channel k and window t the feature is the sum over the window's
    pixels of the univariate normal density of the pixel intensity under
    (mu_k, sigma_k).  The output concatenates the per-window vectors in
    the given channel order, so its length is windows x channels.
    """
    if not channels:
        raise IllegalChannel("sum similarity requires at least one channel")
    _check_sigma(model, channels)
    parts = []
    for ch in channels:
        plane = extract_channel(img, ch).values
        s = model.stats[ch]
        parts.append(_window_sums(pdf_uni(plane, s.mean, s.std), spec))
    return FeatureVector(
        np.concatenate(parts), FeatureMethod.SUM_SIM, tuple(channels), spec
    )


def feat_naive_bayes(
    img: RgbImage,
    model: IdealFlameModel,
    channels: tuple[Channel, ...],
    spec: GridSpec = GridSpec(),
) -> FeatureVector:
    """Per-pixel product of channel densities, summed over each window.

    Channels are treated as independent: the pixel score is the product of
    its univariate channel densities, and the window feature aggregates the
    pixel scores by summation.  At most the three independent channels
    (R, G, B) may be combined.
    """
    _reject_gray(channels, "Naive Bayes similarity")
    if len(channels) > 3:
        raise IllegalChannel("Naive Bayes similarity admits at most 3 channels")
    _check_sigma(model, channels)
    product = None
    for ch in channels:
        plane = extract_channel(img, ch).values
        s = model.stats[ch]
        dens = pdf_uni(plane, s.mean, s.std)
        product = dens if product is None else product * dens
    return FeatureVector(
        _window_sums(product, spec), FeatureMethod.NAIVE_BAYES, tuple(channels), spec
    )


def feat_mvn(
    img: RgbImage,
    model: IdealFlameModel,
    channels: tuple[Channel, ...],
    spec: GridSpec = GridSpec(),
) -> FeatureVector:
    """Joint multivariate normal density of the pixel tuple, summed per window.

    Uses the model's covariance matrix for the requested 2- or 3-channel
    subset.  Raises SingularCovariance when the matrix cannot be inverted
    reliably (zero-variance channel, or correlation-matrix determinant at
    or below 1e-12).
    """
    _reject_gray(channels, "multivariate normal similarity")
    if len(channels) not in (2, 3):
        raise IllegalChannel(
            "multivariate normal similarity requires 2 or 3 channels"
        )
    cov = model.cov_for(tuple(channels))
    subset = cov.channels
    sigma = cov.matrix
    d = len(subset)

    diag = np.diag(sigma)
    if np.any(diag <= SIGMA_FLOOR**2):
        raise SingularCovariance("zero-variance channel in covariance matrix")
    # Scale to the correlation matrix so the singularity test is unit-free.
    scale = np.sqrt(diag)
    corr = sigma / np.outer(scale, scale)
    det_corr = float(np.linalg.det(corr))
    if det_corr <= DET_FLOOR:
        raise SingularCovariance(
            f"correlation determinant {det_corr:.3e} <= {DET_FLOOR}"
        )

    det = det_corr * float(np.prod(diag))
    inv = np.linalg.inv(sigma)
    mu = model.mean_vector(subset)

    planes = np.stack(
        [extract_channel(img, ch).values for ch in subset], axis=-1
    )  # (M, N, d)
    dev = planes - mu
    # Quadratic form per pixel: dev . inv . dev
    maha = np.einsum("mni,ij,mnj->mn", dev, inv, dev)
    norm = 1.0 / math.sqrt(det * (2.0 * math.pi) ** d)
    density = norm * np.exp(-0.5 * maha)
    return FeatureVector(
        _window_sums(density, spec), FeatureMethod.MVN, tuple(channels), spec
    )


def feat_gmm(
    img: RgbImage,
    model: IdealFlameModel,
    channels: tuple[Channel, ...],
    weights: GmmWeights,
    spec: GridSpec = GridSpec(),
) -> FeatureVector:
    """Weighted sum of channel densities per pixel, summed over each window.

    The weights must come from the incremental grid for exactly the
    requested channels; a WeightMismatch is raised otherwise.
    """
    _reject_gray(channels, "Gaussian-mixture similarity")
    if len(channels) not in (2, 3):
        raise IllegalChannel("Gaussian-mixture similarity requires 2 or 3 channels")
    if tuple(weights.channels) != tuple(channels):
        raise WeightMismatch(
            f"weights are for {[c.value for c in weights.channels]}, "
            f"requested {[c.value for c in channels]}"
        )
    _check_sigma(model, channels)
    mix = None
    for ch, w in zip(channels, weights.weights):
        plane = extract_channel(img, ch).values
        s = model.stats[ch]
        term = w * pdf_uni(plane, s.mean, s.std)
        mix = term if mix is None else mix + term
    return FeatureVector(
        _window_sums(mix, spec), FeatureMethod.GMM, tuple(channels), spec
    )


def gmm_weight_grid(channels: tuple[Channel, ...]) -> list[GmmWeights]:
    """Enumerate the incremental mixture-weight grid for 2 or 3 channels.

    For each grid index b in 0..9 the swept channel receives
    w = 0.05 + 0.1*b and the remaining channels share 1 - w equally; the
    swept role rotates over every channel in the subset.  Duplicate weight
    tuples are removed while preserving enumeration order.
    """
    k = len(channels)
    if k not in (2, 3):
        raise IllegalChannel("weight grid is defined for 2 or 3 channels")
    out: list[GmmWeights] = []
    seen: set[tuple[float, ...]] = set()
    for swept_pos, swept in enumerate(channels):
        for b in range(10):
            w1 = (1 + 2 * b) / 20  # exact rounding of 0.05 + 0.1*b
            # For two channels the closed form makes the mirrored pair
            # (b, 9-b) bit-identical, so duplicate removal is exact; with
            # three channels no duplicates can occur and the halved
            # remainder keeps the sum at exactly 1.0.
            rest = (19 - 2 * b) / 20 if k == 2 else (1.0 - w1) / 2.0
            weights = tuple(
                w1 if i == swept_pos else rest for i in range(k)
            )
            if weights in seen:
                continue
            seen.add(weights)
            out.append(GmmWeights(tuple(channels), weights, b, swept))
    return out


def select_gmm_weights(candidates, fit_fn):
    """Pick the grid point whose trained model validates best.

    ``fit_fn(candidate)`` must train a regression model on the candidate's
    features and return ``(validation_r, validation_mse)``.  The winner
    maximizes validation correlation; ties fall back to lower validation
    MSE, then to the lower grid index.  Training failures propagate.
    """
    candidates = list(candidates)
    if not candidates:
        raise WeightMismatch("no weight candidates to select from")
    best = None
    best_key = None
    for cand in candidates:
        r, mse = fit_fn(cand)
        key = (-r, mse, cand.b)
        if best_key is None or key < best_key:
            best, best_key = cand, key
    return best


def feature_length(method: str, channels, spec: GridSpec = GridSpec()) -> int:
    """Expected feature-vector length for a method/channel-set/grid combination."""
    windows = spec.window_count
    if method == FeatureMethod.SUM_SIM:
        return windows * len(channels)
    return windows


def compute_features(
    img: RgbImage,
    model: IdealFlameModel,
    method: str,
    channels: tuple[Channel, ...],
    spec: GridSpec = GridSpec(),
    weights: GmmWeights | None = None,
) -> FeatureVector:
    """Dispatch to the requested similarity method."""
    if method == FeatureMethod.SUM_SIM:
        return feat_sum_similarity(img, model, channels, spec)
    if method == FeatureMethod.NAIVE_BAYES:
        return feat_naive_bayes(img, model, channels, spec)
    if method == FeatureMethod.MVN:
        return feat_mvn(img, model, channels, spec)
    if method == FeatureMethod.GMM:
        if weights is None:
            raise WeightMismatch("Gaussian-mixture similarity requires weights")
        return feat_gmm(img, model, channels, weights, spec)
    raise ValueError(f"unknown feature method {method!r}")
