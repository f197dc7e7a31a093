"""Channel extraction and local-window gridding."""

import io

import numpy as np
import pytest
from PIL import Image

from flamesense.errors import DecodeError, DimensionMismatch, GridMismatch, UnsupportedFormat
from flamesense.imaging import (
    Channel,
    ChannelPlane,
    GridSpec,
    RgbImage,
    channels_label,
    decode_image,
    extract_channel,
    grid_windows,
    load_image,
    parse_channels,
    window_view,
)


def png_bytes(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, format="PNG")
    return buf.getvalue()


class TestDecode:
    def test_lossless_round_trip(self, rng):
        px = rng.integers(0, 256, size=(2, 2, 3), dtype=np.uint8)
        img = decode_image(png_bytes(px))
        assert np.array_equal(img.pixels, px)

    def test_truncated_file_is_a_decode_error(self, rng):
        px = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
        data = png_bytes(px)
        with pytest.raises(DecodeError):
            decode_image(data[: len(data) // 2])

    def test_unknown_container_rejected(self):
        with pytest.raises(UnsupportedFormat):
            decode_image(b"not an image at all")

    def test_load_image(self, tmp_path, rng):
        px = rng.integers(0, 256, size=(4, 6, 3), dtype=np.uint8)
        p = tmp_path / "f.png"
        p.write_bytes(png_bytes(px))
        assert np.array_equal(load_image(p).pixels, px)

    def test_missing_file_propagates(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_image(tmp_path / "absent.png")


class TestRgbImage:
    def test_shape_is_validated(self):
        with pytest.raises(DimensionMismatch):
            RgbImage(np.zeros((4, 4), dtype=np.uint8))

    def test_empty_rejected(self):
        with pytest.raises(DimensionMismatch):
            RgbImage(np.zeros((0, 4, 3), dtype=np.uint8))

    def test_dimensions(self, rng):
        img = RgbImage(rng.integers(0, 256, size=(6, 9, 3), dtype=np.uint8))
        assert (img.height, img.width) == (6, 9)


class TestExtractChannel:
    def test_component_copy(self):
        img = RgbImage(np.array([[[10, 20, 30]]], dtype=np.uint8))
        assert extract_channel(img, Channel.R).values[0, 0] == 10.0
        assert extract_channel(img, Channel.G).values[0, 0] == 20.0
        assert extract_channel(img, Channel.B).values[0, 0] == 30.0

    def test_gray_of_gray_pixel_is_the_pixel(self):
        img = RgbImage(np.full((3, 3, 3), 137, dtype=np.uint8))
        assert np.array_equal(extract_channel(img, Channel.I).values, np.full((3, 3), 137.0))

    def test_pure_red_luma(self):
        img = RgbImage(np.array([[[255, 0, 0]]], dtype=np.uint8))
        # 0.299 * 255, exact because the weights are thousandths
        assert extract_channel(img, Channel.I).values[0, 0] == 76.245

    def test_gray_plane_equals_red_plane_for_gray_images(self, rng):
        v = rng.integers(0, 256, size=(8, 8, 1), dtype=np.uint8)
        img = RgbImage(np.repeat(v, 3, axis=2))
        got_i = extract_channel(img, Channel.I).values
        got_r = extract_channel(img, Channel.R).values
        assert np.array_equal(got_i, got_r)

    def test_luma_stays_in_range(self, random_image):
        vals = extract_channel(random_image, Channel.I).values
        assert vals.dtype == np.float64
        assert vals.min() >= 0.0 and vals.max() <= 255.0

    def test_luma_matches_per_pixel_oracle(self, random_image):
        vals = extract_channel(random_image, Channel.I).values
        px = random_image.pixels
        for i in range(4):
            for j in range(4):
                r, g, b = (int(px[i, j, c]) for c in range(3))
                expect = (299 * r + 587 * g + 114 * b) / 1000.0
                assert vals[i, j] == pytest.approx(expect, abs=0.0)


class TestChannelParsing:
    def test_parse_and_label_round_trip(self):
        chans = parse_channels("R-G-B")
        assert chans == (Channel.R, Channel.G, Channel.B)
        assert channels_label(chans) == "R-G-B"

    def test_single_channel(self):
        assert parse_channels("I") == (Channel.I,)

    @pytest.mark.parametrize("bad", ["R-X", "", "R-R", "rgb"])
    def test_malformed_labels_rejected(self, bad):
        with pytest.raises(ValueError):
            parse_channels(bad)


class TestGrid:
    def test_full_frame_contract(self):
        # 1088 / 16 = 68 on both axes
        spec = GridSpec(16, 16)
        assert spec.window_count == 256
        assert spec.window_shape(1088, 1088) == (68, 68)

    def test_small_exact_division(self, rng):
        plane = ChannelPlane(Channel.R, rng.integers(0, 256, size=(32, 32)).astype(float))
        wins = grid_windows(plane, GridSpec(16, 16))
        assert len(wins) == 256
        assert all(w.block.shape == (2, 2) for w in wins)

    def test_non_divisible_dimensions_rejected(self, rng):
        plane = ChannelPlane(Channel.R, rng.integers(0, 256, size=(100, 100)).astype(float))
        with pytest.raises(GridMismatch):
            grid_windows(plane, GridSpec(16, 16))

    def test_degenerate_grid_rejected(self):
        with pytest.raises(GridMismatch):
            GridSpec(0, 16)

    def test_windows_are_row_major_and_one_based(self, rng):
        vals = rng.random((12, 8)) * 255
        plane = ChannelPlane(Channel.G, vals)
        spec = GridSpec(4, 2)
        wins = grid_windows(plane, spec)
        m, n = spec.window_shape(12, 8)
        assert wins[0].index == 1
        assert np.array_equal(wins[0].block, vals[:m, :n])
        # first window of the second window-row starts at plane row m
        second_row_first = wins[spec.grid_cols]
        assert np.array_equal(second_row_first.block, vals[m : 2 * m, :n])

    def test_tiling_preserves_the_pixel_multiset(self, rng):
        for _ in range(5):
            vals = rng.random((16, 24)) * 255
            blocks = window_view(vals, GridSpec(4, 6))
            assert np.array_equal(np.sort(blocks.ravel()), np.sort(vals.ravel()))

    def test_concatenating_windows_reconstructs_the_plane(self, rng):
        vals = rng.random((8, 8)) * 255
        spec = GridSpec(2, 2)
        blocks = window_view(vals, spec)
        top = np.hstack([blocks[0], blocks[1]])
        bottom = np.hstack([blocks[2], blocks[3]])
        assert np.array_equal(np.vstack([top, bottom]), vals)
