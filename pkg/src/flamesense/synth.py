"""Seeded synthetic flame rig.

Renders a glowing disk whose green-channel brightness is an increasing
linear function of λ, with dark spots appearing on the red/blue channels
as λ leaves the ideal band and optional additive pixel noise.  Because
the G mean is strictly monotone in λ by construction, the mapping is
invertible and a correct pipeline must regress it well — failures point
at bugs, not at an impossible task.

Everything derives from explicit integer seed streams: the λ profile and
static texture from the config seed, spot layout from (seed, λ), and
pixel noise from (seed, frame index).  Repeated generation is therefore
byte-identical.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .dataset import FrameIndex, LambdaLog, write_frame_index, write_lambda_log
from .errors import ConfigInvalid
from .imaging import RgbImage

__all__ = [
    "RigConfig",
    "lambda_profile",
    "render_frame",
    "generate_session",
    "reference_lambdas",
    "ideal_reference_frames",
]

# Seed-stream tags keeping the independent random draws decoupled.
_STREAM_PROFILE = 11
_STREAM_TEXTURE = 13
_STREAM_SPOTS = 17
_STREAM_NOISE = 19
_REFERENCE_FRAME_BASE = 1_000_000


@dataclass(frozen=True)
class RigConfig:
    """Synthetic acquisition settings mirroring the real rig's timing."""

    size: int = 128
    duration_s: float = 1000.0
    frame_rate: float = 2.0
    lambda_rate: float = 1.0
    lambda_range: tuple[float, float] = (0.8, 3.0)
    noise_sigma: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.size < 32 or self.size % 16:
            raise ConfigInvalid(
                f"image size must be >= 32 and divisible by 16, got {self.size}"
            )
        if self.duration_s <= 0:
            raise ConfigInvalid(f"session duration must be positive: {self.duration_s}")
        if self.frame_rate <= 0 or self.lambda_rate <= 0:
            raise ConfigInvalid("frame and lambda rates must be positive")
        lo, hi = self.lambda_range
        if not (0 < lo <= hi):
            raise ConfigInvalid(f"lambda range must be positive and ordered: {self.lambda_range}")
        if self.noise_sigma < 0:
            raise ConfigInvalid(f"noise sigma must be >= 0, got {self.noise_sigma}")


def lambda_profile(cfg: RigConfig):
    """λ(t): a smooth seeded Fourier series clipped into the rig's range."""
    lo, hi = cfg.lambda_range
    mid = (lo + hi) / 2.0
    half = (hi - lo) / 2.0
    rng = np.random.default_rng([cfg.seed, _STREAM_PROFILE])
    n_terms = 6
    freqs = rng.uniform(0.5, 4.0, n_terms) * (2.0 * np.pi / cfg.duration_s)
    phases = rng.uniform(0.0, 2.0 * np.pi, n_terms)
    amps = rng.uniform(0.5, 1.0, n_terms)
    if amps.sum() > 0:
        # Slight overshoot so the profile occasionally saturates the range.
        amps *= 1.15 * half / amps.sum()

    def fn(t):
        t = np.asarray(t, dtype=np.float64)
        wave = np.sum(
            amps * np.sin(np.multiply.outer(t, freqs) + phases), axis=-1
        )
        return np.clip(mid + wave, lo, hi)

    return fn


def _base_levels(lam: float) -> tuple[float, float, float]:
    r = 190.0 - 35.0 * min(abs(lam - 1.35), 3.0)
    g = 55.0 + 27.5 * lam
    b = 25.0 + 12.0 * lam
    return r, g, b


def _spot_count(lam: float) -> int:
    dist = max(0.0, 1.2 - lam, lam - 1.5)
    return int(round(6.0 * dist))


def render_frame(cfg: RigConfig, lam: float, frame_seed: int) -> RgbImage:
    """Render one frame at λ value ``lam``.

    ``frame_seed`` selects the pixel-noise stream only; frames with equal
    λ and zero noise are identical regardless of it.
    """
    lam = float(lam)
    n = cfg.size
    coords = (np.arange(n) - (n - 1) / 2.0) / n
    yy, xx = np.meshgrid(coords, coords, indexing="ij")

    radius = 0.48
    profile = np.maximum(0.0, 1.0 - (xx * xx + yy * yy) / (radius * radius))

    rng_tex = np.random.default_rng([cfg.seed, _STREAM_TEXTURE])
    texture = np.ones((n, n))
    for _ in range(3):
        fx, fy = rng_tex.uniform(0.8, 2.5, 2)
        phase = rng_tex.uniform(0.0, 2.0 * np.pi)
        texture += (0.25 / 3.0) * np.cos(2.0 * np.pi * (fx * xx + fy * yy) + phase)

    shape = profile * texture
    r_level, g_level, b_level = _base_levels(lam)
    planes = [r_level * shape, g_level * shape, b_level * shape]

    n_spots = _spot_count(lam)
    if n_spots:
        rng_spots = np.random.default_rng(
            [cfg.seed, _STREAM_SPOTS, int(np.float64(lam).view(np.uint64))]
        )
        for _ in range(n_spots):
            ang = rng_spots.uniform(0.0, 2.0 * np.pi)
            rad_pos = 0.75 * radius * np.sqrt(rng_spots.uniform())
            cx, cy = rad_pos * np.cos(ang), rad_pos * np.sin(ang)
            spot_r = rng_spots.uniform(0.04, 0.10)
            mask = (xx - cx) ** 2 + (yy - cy) ** 2 < spot_r * spot_r
            # Spots darken red/blue only, preserving the G-λ monotone link.
            planes[0] = np.where(mask, planes[0] * 0.3, planes[0])
            planes[2] = np.where(mask, planes[2] * 0.3, planes[2])

    stack = np.stack(planes, axis=-1)
    if cfg.noise_sigma > 0:
        rng_noise = np.random.default_rng([cfg.seed, _STREAM_NOISE, int(frame_seed)])
        stack = stack + rng_noise.normal(0.0, cfg.noise_sigma, stack.shape)
    return RgbImage(np.rint(np.clip(stack, 0.0, 255.0)).astype(np.uint8))


@dataclass(frozen=True)
class SessionPaths:
    """Locations of everything a generated session writes."""

    root: str
    frame_index: str
    lambda_log: str
    ground_truth: str
    frames_dir: str


def generate_session(
    cfg: RigConfig, out_dir: str | os.PathLike
) -> tuple[FrameIndex, LambdaLog, np.ndarray, SessionPaths]:
    """Write a full synthetic session and return its in-memory indices.

    Produces lossless PNG frames at the frame rate, a λ log at the λ
    rate spanning the whole session, and a per-frame ground-truth log.
    """
    out_dir = os.fspath(out_dir)
    frames_dir = os.path.join(out_dir, "frames")
    os.makedirs(frames_dir, exist_ok=True)

    fn = lambda_profile(cfg)
    n_frames = int(round(cfg.duration_s * cfg.frame_rate))
    if n_frames < 1:
        raise ConfigInvalid("session too short for a single frame")
    frame_ts = np.arange(n_frames) / cfg.frame_rate
    n_log = int(round(cfg.duration_s * cfg.lambda_rate)) + 1
    log_ts = np.arange(n_log) / cfg.lambda_rate

    truth = np.asarray(fn(frame_ts), dtype=np.float64)
    log = LambdaLog(log_ts, np.asarray(fn(log_ts), dtype=np.float64))

    paths = []
    for i, t in enumerate(frame_ts):
        img = render_frame(cfg, truth[i], i)
        rel = os.path.join("frames", f"frame_{i:05d}.png")
        Image.fromarray(img.pixels).save(os.path.join(out_dir, rel))
        paths.append(os.path.abspath(os.path.join(out_dir, rel)))
    frames = FrameIndex(frame_ts, tuple(paths))

    session = SessionPaths(
        root=out_dir,
        frame_index=os.path.join(out_dir, "frame_index.csv"),
        lambda_log=os.path.join(out_dir, "lambda_log.csv"),
        ground_truth=os.path.join(out_dir, "ground_truth.csv"),
        frames_dir=frames_dir,
    )
    write_frame_index(session.frame_index, frames)
    write_lambda_log(session.lambda_log, log)
    write_lambda_log(session.ground_truth, LambdaLog(frame_ts, truth))
    return frames, log, truth, session


def reference_lambdas(count: int = 22) -> np.ndarray:
    """λ values for reference frames: evenly spaced across [1.2, 1.5]."""
    if count < 1:
        raise ConfigInvalid(f"reference count must be >= 1, got {count}")
    if count == 1:
        return np.array([1.35])
    return np.linspace(1.2, 1.5, count)


def ideal_reference_frames(cfg: RigConfig, count: int = 22) -> list[RgbImage]:
    """Render reference frames at the ideal-band λ values."""
    return [
        render_frame(cfg, lam, _REFERENCE_FRAME_BASE + k)
        for k, lam in enumerate(reference_lambdas(count))
    ]
