"""Frame decoding, color-channel extraction, and local-window gridding.

A frame is decoded into an 8-bit RGB pixel grid, split into one of four
channel planes (red, green, blue, or the derived gray), and partitioned
into an exact grid of local windows over which similarity features are
aggregated.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, DimensionMismatch, GridMismatch, UnsupportedFormat

__all__ = [
    "Channel",
    "RgbImage",
    "ChannelPlane",
    "GridSpec",
    "Window",
    "decode_image",
    "extract_channel",
    "grid_windows",
    "parse_channels",
]


class Channel(Enum):
    """Color channel identifier; gray is derived from the other three."""

    R = "R"
    G = "G"
    B = "B"
    I = "I"


#: Integer per-mille weights of the BT.601 luma transform.  Evaluating the
#: gray plane as (299*R + 587*G + 114*B) / 1000 keeps the arithmetic exact
#: up to a single rounding, so a gray pixel with R == G == B maps to exactly
#: that value.
_LUMA_WEIGHTS = (299, 587, 114)


def parse_channels(text: str) -> tuple[Channel, ...]:
    """Parse a channel-set string such as ``"R-G-B"`` into Channel members."""
    parts = [p for p in text.replace(",", "-").split("-") if p]
    if not parts:
        raise ValueError(f"no channels in {text!r}")
    try:
        channels = tuple(Channel(p.upper()) for p in parts)
    except ValueError as exc:
        raise ValueError(f"unknown channel in {text!r}") from exc
    if len(set(channels)) != len(channels):
        raise ValueError(f"duplicate channel in {text!r}")
    return channels


def channels_label(channels: tuple[Channel, ...]) -> str:
    """Inverse of :func:`parse_channels` (``"R-G-B"`` style)."""
    return "-".join(c.value for c in channels)


@dataclass(frozen=True)
class RgbImage:
    """A decoded frame: row-major grid of 8-bit (r, g, b) pixels."""

    pixels: np.ndarray  # (M, N, 3) uint8

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise DimensionMismatch(f"expected (M, N, 3) pixel grid, got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise DimensionMismatch("image must have at least one pixel")
        if px.dtype != np.uint8:
            if np.any(px < 0) or np.any(px > 255):
                raise DimensionMismatch("channel values must lie in [0, 255]")
            px = px.astype(np.uint8)
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class ChannelPlane:
    """A single channel of a frame as real intensities in [0, 255]."""

    channel: Channel
    values: np.ndarray  # (M, N) float64

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise DimensionMismatch(f"expected 2-D plane, got shape {vals.shape}")
        if vals.shape[0] < 1 or vals.shape[1] < 1:
            raise DimensionMismatch("plane must have at least one pixel")
        if np.any(vals < 0.0) or np.any(vals > 255.0):
            raise DimensionMismatch("plane values must lie in [0, 255]")
        vals = np.ascontiguousarray(vals)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class GridSpec:
    """Partition of a plane into ``grid_rows`` x ``grid_cols`` local windows."""

    grid_rows: int = 16
    grid_cols: int = 16

    def __post_init__(self):
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise GridMismatch("grid must have at least one window per axis")

    @property
    def window_count(self) -> int:
        return self.grid_rows * self.grid_cols

    def window_shape(self, height: int, width: int) -> tuple[int, int]:
        """Window (rows, cols) for a plane of the given size; exact division required."""
        if height % self.grid_rows or width % self.grid_cols:
            raise GridMismatch(
                f"{self.grid_rows}x{self.grid_cols} grid does not divide "
                f"a {height}x{width} plane"
            )
        return height // self.grid_rows, width // self.grid_cols


@dataclass(frozen=True)
class Window:
    """One local window: 1-based row-major index and its pixel block."""

    index: int
    block: np.ndarray  # (m, n) float64, read-only view


def decode_image(data: bytes) -> RgbImage:
    """Decode encoded image bytes into an :class:`RgbImage`.

    Raises UnsupportedFormat if the container is not recognized and
    DecodeError if the file is recognized but malformed (e.g. truncated).
    """
    try:
        img = Image.open(io.BytesIO(data))
    except UnidentifiedImageError as exc:
        raise UnsupportedFormat("unrecognized image container") from exc
    except Exception as exc:
        raise DecodeError(f"could not open image: {exc}") from exc
    try:
        rgb = img.convert("RGB")
        arr = np.asarray(rgb, dtype=np.uint8)
    except Exception as exc:
        raise DecodeError(f"could not decode image data: {exc}") from exc
    return RgbImage(arr)


def load_image(path) -> RgbImage:
    """Read and decode an image file."""
    with open(path, "rb") as fh:
        return decode_image(fh.read())


def extract_channel(img: RgbImage, ch: Channel) -> ChannelPlane:
    """Extract one color plane; gray is the BT.601 luma, kept unrounded."""
    px = img.pixels
    if ch is Channel.I:
        wr, wg, wb = _LUMA_WEIGHTS
        planes = px.astype(np.float64)
        acc = wr * planes[:, :, 0] + wg * planes[:, :, 1] + wb * planes[:, :, 2]
        values = acc / 1000.0
    else:
        idx = {Channel.R: 0, Channel.G: 1, Channel.B: 2}[ch]
        values = px[:, :, idx].astype(np.float64)
    return ChannelPlane(ch, values)


def window_view(values: np.ndarray, spec: GridSpec) -> np.ndarray:
    """Reshape an (M, N) array to (windows, m, n) in row-major window order."""
    m, n = spec.window_shape(values.shape[0], values.shape[1])
    blocks = values.reshape(spec.grid_rows, m, spec.grid_cols, n)
    return blocks.transpose(0, 2, 1, 3).reshape(spec.window_count, m, n)


def grid_windows(plane: ChannelPlane, spec: GridSpec) -> list[Window]:
    """Partition a plane into its local windows, row-major, 1-based indices.

    The windows tile the plane exactly; a GridMismatch is raised when the
    grid does not divide the plane dimensions.
    """
    blocks = window_view(plane.values, spec)
    return [Window(index=t + 1, block=blocks[t]) for t in range(blocks.shape[0])]
