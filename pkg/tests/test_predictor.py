"""Predictor bundle: assembly checks, single-frame prediction, persistence."""

import numpy as np
import pytest
from numpy.random import default_rng

from flamesense.ann import forward, init_weights
from flamesense.dataset import standardize_apply, standardize_fit
from flamesense.errors import CorruptModel, LengthMismatch
from flamesense.imaging import Channel, GridSpec
from flamesense.predictor import (
    build_predictor,
    load_predictor,
    predict_image,
    save_predictor,
)
from flamesense.similarity_features import (
    compute_features,
    gmm_weight_grid,
)
from flamesense.synth import RigConfig, render_frame

GRID = GridSpec(4, 4)
CHANNELS = (Channel.R, Channel.G)
DIM = 2 * 16  # two channels on a 4x4 grid


def make_predictor(small_model, method="SumSim", weights=None, seed=0):
    # GMM mixes the channels per window, so its vector is grid-sized
    dim = GRID.grid_rows * GRID.grid_cols if method == "GMM" else DIM
    rng = default_rng(seed)
    feats = rng.normal(loc=5.0, scale=2.0, size=(20, dim)) ** 2
    std = standardize_fit(feats)
    net = init_weights(dim, seed)
    return build_predictor(method, CHANNELS, GRID, weights, small_model, std, net)


class TestBuild:
    def test_assembles_matching_parts(self, small_model):
        pred = make_predictor(small_model)
        assert pred.method == "SumSim"
        assert pred.channels == CHANNELS
        assert pred.network.input_dim == DIM

    def test_rejects_dimension_disagreement(self, small_model):
        rng = default_rng(0)
        std = standardize_fit(rng.normal(size=(10, DIM)))
        net = init_weights(DIM + 1, 0)
        with pytest.raises(LengthMismatch):
            build_predictor("SumSim", CHANNELS, GRID, None, small_model, std, net)


class TestPredictImage:
    def test_matches_manual_pipeline(self, small_rig, small_model):
        pred = make_predictor(small_model)
        img = render_frame(small_rig, 1.3, 0)
        fv = compute_features(img, small_model, "SumSim", CHANNELS, GRID)
        expect = forward(pred.network, standardize_apply(pred.standardizer, fv.values))
        assert predict_image(pred, img) == expect

    def test_gmm_bundle_uses_stored_weights(self, small_rig, small_model):
        w = gmm_weight_grid(CHANNELS)[3]
        pred = make_predictor(small_model, method="GMM", weights=w)
        img = render_frame(small_rig, 1.4, 1)
        fv = compute_features(img, small_model, "GMM", CHANNELS, GRID, w)
        expect = forward(pred.network, standardize_apply(pred.standardizer, fv.values))
        assert predict_image(pred, img) == expect

    def test_deterministic(self, small_rig, small_model):
        pred = make_predictor(small_model)
        img = render_frame(small_rig, 1.25, 2)
        assert predict_image(pred, img) == predict_image(pred, img)


class TestPersistence:
    def test_round_trip_preserves_predictions(self, tmp_path, small_rig, small_model):
        pred = make_predictor(small_model)
        path = tmp_path / "bundle.txt"
        save_predictor(path, pred)
        again = load_predictor(path)
        assert again.method == pred.method
        assert again.channels == pred.channels
        assert again.grid == pred.grid
        assert again.weights is None
        assert np.array_equal(again.standardizer.mean, pred.standardizer.mean)
        assert np.array_equal(again.network.w1, pred.network.w1)
        img = render_frame(small_rig, 1.33, 5)
        assert predict_image(again, img) == predict_image(pred, img)

    def test_weights_line_round_trip(self, tmp_path, small_model):
        w = gmm_weight_grid(CHANNELS)[7]
        pred = make_predictor(small_model, method="GMM", weights=w)
        path = tmp_path / "bundle.txt"
        save_predictor(path, pred)
        again = load_predictor(path)
        assert again.weights == w

    def test_resave_is_byte_stable(self, tmp_path, small_model):
        pred = make_predictor(small_model)
        save_predictor(tmp_path / "a.txt", pred)
        save_predictor(tmp_path / "b.txt", load_predictor(tmp_path / "a.txt"))
        assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()

    def test_bit_flip_detected(self, tmp_path, small_model):
        path = tmp_path / "bundle.txt"
        save_predictor(path, make_predictor(small_model))
        text = path.read_text()
        path.write_text(text.replace("method SumSim", "method SumSam", 1))
        with pytest.raises(CorruptModel):
            load_predictor(path)

    def test_missing_section_detected(self, tmp_path, small_model):
        # drop the network section but keep the checksum honest
        from flamesense._textfmt import write_checksummed

        path = tmp_path / "bundle.txt"
        save_predictor(path, make_predictor(small_model))
        lines = path.read_text().splitlines()[1:-1]
        start = lines.index("begin network")
        end = lines.index("end network")
        write_checksummed(
            path, "flamesense-predictor", 1, lines[:start] + lines[end + 1 :]
        )
        with pytest.raises(CorruptModel, match="incomplete"):
            load_predictor(path)

    def test_truncated_file_detected(self, tmp_path, small_model):
        path = tmp_path / "bundle.txt"
        save_predictor(path, make_predictor(small_model))
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(CorruptModel):
            load_predictor(path)
