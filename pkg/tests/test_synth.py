"""Synthetic flame rig: determinism, the λ-G link, and session output."""

import numpy as np
import pytest

from flamesense.dataset import read_frame_index, read_lambda_log
from flamesense.errors import ConfigInvalid
from flamesense.flame_model import channel_mean
from flamesense.imaging import Channel, extract_channel, load_image
from flamesense.synth import (
    RigConfig,
    generate_session,
    ideal_reference_frames,
    lambda_profile,
    reference_lambdas,
    render_frame,
)

CFG = RigConfig(size=32, duration_s=5.0, noise_sigma=1.0, seed=3)


class TestRigConfig:
    @pytest.mark.parametrize("size", [16, 31, 33, 100])
    def test_rejects_bad_sizes(self, size):
        with pytest.raises(ConfigInvalid):
            RigConfig(size=size)

    def test_accepts_multiples_of_sixteen(self):
        for size in (32, 48, 128, 1088):
            assert RigConfig(size=size).size == size

    def test_rejects_nonpositive_rates_and_durations(self):
        with pytest.raises(ConfigInvalid):
            RigConfig(duration_s=0.0)
        with pytest.raises(ConfigInvalid):
            RigConfig(frame_rate=0.0)
        with pytest.raises(ConfigInvalid):
            RigConfig(lambda_rate=-1.0)

    def test_rejects_bad_lambda_range(self):
        with pytest.raises(ConfigInvalid):
            RigConfig(lambda_range=(3.0, 0.8))
        with pytest.raises(ConfigInvalid):
            RigConfig(lambda_range=(0.0, 2.0))

    def test_rejects_negative_noise(self):
        with pytest.raises(ConfigInvalid):
            RigConfig(noise_sigma=-0.1)


class TestLambdaProfile:
    def test_stays_inside_configured_range(self):
        cfg = RigConfig(duration_s=200.0, lambda_range=(0.9, 2.5))
        ts = np.linspace(0.0, 200.0, 2000)
        values = lambda_profile(cfg)(ts)
        assert values.min() >= 0.9
        assert values.max() <= 2.5

    def test_profile_actually_varies(self):
        values = lambda_profile(RigConfig(duration_s=500.0))(np.linspace(0, 500, 500))
        assert values.std() > 0.1

    def test_same_seed_same_profile(self):
        ts = np.linspace(0.0, 100.0, 50)
        a = lambda_profile(RigConfig(seed=4, duration_s=100.0))(ts)
        b = lambda_profile(RigConfig(seed=4, duration_s=100.0))(ts)
        assert np.array_equal(a, b)

    def test_scalar_query_matches_vector(self):
        fn = lambda_profile(RigConfig(seed=1))
        assert float(fn(12.5)) == fn(np.array([12.5]))[0]


class TestRenderFrame:
    def test_deterministic(self):
        a = render_frame(CFG, 1.4, 7)
        b = render_frame(CFG, 1.4, 7)
        assert np.array_equal(a.pixels, b.pixels)

    def test_noise_stream_follows_frame_seed(self):
        a = render_frame(CFG, 1.4, 7)
        b = render_frame(CFG, 1.4, 8)
        assert not np.array_equal(a.pixels, b.pixels)

    def test_zero_noise_ignores_frame_seed(self):
        quiet = RigConfig(size=32, noise_sigma=0.0, seed=3)
        a = render_frame(quiet, 1.4, 7)
        b = render_frame(quiet, 1.4, 8)
        assert np.array_equal(a.pixels, b.pixels)

    def test_green_mean_increases_with_lambda(self):
        # the invertible λ signal: G brightness must be strictly monotone
        quiet = RigConfig(size=64, noise_sigma=0.0, seed=3)
        lams = np.linspace(0.8, 3.0, 12)
        means = [
            channel_mean(extract_channel(render_frame(quiet, lam, 0), Channel.G))
            for lam in lams
        ]
        assert all(m2 > m1 for m1, m2 in zip(means, means[1:]))

    def test_spots_darken_red_outside_ideal_band(self):
        quiet = RigConfig(size=64, noise_sigma=0.0, seed=3)
        inside = render_frame(quiet, 1.35, 0)
        far = render_frame(quiet, 2.9, 0)
        # spot pixels: red drops sharply where green does not
        r_ratio = far.pixels[:, :, 0].astype(float) / np.maximum(
            inside.pixels[:, :, 0].astype(float), 1.0
        )
        assert (r_ratio < 0.5).sum() > 10

    def test_pixels_are_uint8(self):
        img = render_frame(CFG, 1.0, 0)
        assert img.pixels.dtype == np.uint8
        assert img.pixels.shape == (32, 32, 3)


class TestReferences:
    def test_single_reference_sits_at_band_center(self):
        assert np.array_equal(reference_lambdas(1), [1.35])

    def test_many_references_span_the_band(self):
        lams = reference_lambdas(22)
        assert len(lams) == 22
        assert lams[0] == 1.2
        assert lams[-1] == 1.5
        assert np.all(np.diff(lams) > 0)

    def test_rejects_zero_count(self):
        with pytest.raises(ConfigInvalid):
            reference_lambdas(0)

    def test_frames_match_count_and_are_deterministic(self):
        a = ideal_reference_frames(CFG, 5)
        b = ideal_reference_frames(CFG, 5)
        assert len(a) == 5
        for fa, fb in zip(a, b):
            assert np.array_equal(fa.pixels, fb.pixels)

    def test_reference_noise_differs_from_session_frames(self):
        # reference frames draw from a distinct noise stream
        ref = ideal_reference_frames(CFG, 1)[0]
        session_frame = render_frame(CFG, 1.35, 0)
        assert not np.array_equal(ref.pixels, session_frame.pixels)


class TestGenerateSession:
    def test_counts_and_span(self, tmp_path):
        frames, log, truth, session = generate_session(CFG, tmp_path / "s")
        assert len(frames.paths) == 10  # 5 s at 2 fps
        assert truth.shape == (10,)
        assert log.timestamps[0] == 0.0
        assert log.timestamps[-1] == pytest.approx(5.0)
        assert session.root == str(tmp_path / "s")

    def test_files_round_trip(self, tmp_path):
        frames, log, truth, session = generate_session(CFG, tmp_path / "s")
        again = read_frame_index(session.frame_index)
        assert again.paths == frames.paths
        assert np.array_equal(again.timestamps, frames.timestamps)
        log2 = read_lambda_log(session.lambda_log)
        assert np.array_equal(log2.lambdas, log.lambdas)
        gt = read_lambda_log(session.ground_truth)
        assert np.array_equal(gt.lambdas, truth)

    def test_frame_paths_are_absolute_and_loadable(self, tmp_path):
        frames, _, truth, _ = generate_session(CFG, tmp_path / "s")
        assert all(np.char.startswith(frames.paths, "/").tolist())
        img = load_image(frames.paths[3])
        oracle = render_frame(CFG, truth[3], 3)
        assert np.array_equal(img.pixels, oracle.pixels)

    def test_truth_follows_profile(self, tmp_path):
        frames, _, truth, _ = generate_session(CFG, tmp_path / "s")
        fn = lambda_profile(CFG)
        assert np.allclose(truth, fn(frames.timestamps), rtol=0, atol=0)

    def test_regeneration_is_byte_identical(self, tmp_path):
        generate_session(CFG, tmp_path / "a")
        generate_session(CFG, tmp_path / "b")
        for name in ("frame_index.csv", "lambda_log.csv", "ground_truth.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()
        for k in range(10):
            name = f"frames/frame_{k:05d}.png"
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()

    def test_too_short_session_rejected(self, tmp_path):
        tiny = RigConfig(size=32, duration_s=0.1, frame_rate=2.0)
        with pytest.raises(ConfigInvalid):
            generate_session(tiny, tmp_path / "s")
