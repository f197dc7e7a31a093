"""End-to-end CLI pipeline on a tiny synthetic session, plus exit codes.

Everything runs in-process through ``main`` so coverage tools see it and
failures carry real tracebacks.
"""

import json
import os

import numpy as np
import pytest

from flamesense.cli import main
from flamesense.dataset import (
    FrameIndex,
    read_feature_table,
    write_frame_index,
)
from flamesense.flame_model import load_model
from flamesense.predictor import load_predictor

SYNTH_ARGS = [
    "--size", "32", "--duration-s", "30", "--noise-sigma", "1.0",
    "--seed", "5", "--reference-count", "6",
]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One synth -> fit-model -> extract -> train -> predict chain."""
    root = tmp_path_factory.mktemp("pipeline")
    sess = root / "sess"
    model_dir = root / "model"
    feat_dir = root / "features"
    train_dir = root / "trained"
    pred_dir = root / "pred"

    assert main(["synth", "--out", str(sess), *SYNTH_ARGS]) == 0
    assert main([
        "fit-model", "--references", str(sess / "references.csv"),
        "--out", str(model_dir),
    ]) == 0
    model = model_dir / "ideal_model.txt"
    assert main([
        "extract", "--model", str(model),
        "--frame-index", str(sess / "frame_index.csv"),
        "--lambda-log", str(sess / "lambda_log.csv"),
        "--method", "SumSim", "--channels", "R-G", "--grid", "4x4",
        "--out", str(feat_dir),
    ]) == 0
    table = feat_dir / "features_SumSim_R-G.txt"
    assert main([
        "train", "--features", str(table), "--model", str(model),
        "--trainer", "SCG", "--max-epochs", "40", "--seed", "0",
        "--out", str(train_dir),
    ]) == 0
    assert main([
        "predict", "--predictor", str(train_dir / "predictor.txt"),
        "--frame-index", str(sess / "frame_index.csv"),
        "--out", str(pred_dir),
    ]) == 0
    return {
        "root": root, "sess": sess, "model": model, "table": table,
        "train": train_dir, "pred": pred_dir,
    }


class TestPipeline:
    def test_session_files_exist(self, pipeline):
        sess = pipeline["sess"]
        for name in ("frame_index.csv", "lambda_log.csv", "ground_truth.csv",
                     "references.csv"):
            assert (sess / name).is_file()
        assert (sess / "frames" / "frame_00000.png").is_file()
        assert (sess / "references" / "ref_00.png").is_file()

    def test_fitted_model_sits_in_ideal_band(self, pipeline):
        model = load_model(pipeline["model"])
        assert model.frame_count == 6
        assert 1.2 <= model.lambda_min <= model.lambda_max <= 1.5

    def test_feature_table_shape(self, pipeline):
        table = read_feature_table(pipeline["table"])
        assert len(table) == 60  # 30 s at 2 fps, log spans every frame
        assert table.dim == 2 * 16  # R and G on a 4x4 grid
        assert table.method == "SumSim"
        assert table.channels == "R-G"

    def test_train_artifacts(self, pipeline):
        bundle = load_predictor(pipeline["train"] / "predictor.txt")
        assert bundle.method == "SumSim"
        report = json.loads((pipeline["train"] / "train_report.json").read_text())
        assert report["trainer"] == "SCG"
        assert report["best_epoch"] >= 0
        assert len(report["val_costs"]) == report["epochs_run"] + 1

    def test_predictions_csv(self, pipeline):
        lines = (pipeline["pred"] / "predictions.csv").read_text().splitlines()
        assert lines[0] == "timestamp_s,lambda_hat"
        assert len(lines) == 61
        values = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
        assert np.all(np.isfinite(values))
        assert np.array_equal(values[:, 0], np.arange(60) / 2.0)

    def test_predictions_track_truth_loosely(self, pipeline):
        # tiny net, tiny data: expect correlation, not precision
        truth = np.array([
            float(ln.split(",")[1])
            for ln in (pipeline["sess"] / "ground_truth.csv").read_text().splitlines()[1:]
        ])
        preds = np.array([
            float(ln.split(",")[1])
            for ln in (pipeline["pred"] / "predictions.csv").read_text().splitlines()[1:]
        ])
        assert np.corrcoef(truth, preds)[0, 1] > 0.5


class TestGmmSweep:
    def test_extract_writes_one_table_per_grid_point(self, pipeline, tmp_path):
        out = tmp_path / "gmm"
        assert main([
            "extract", "--model", str(pipeline["model"]),
            "--frame-index", str(pipeline["sess"] / "frame_index.csv"),
            "--lambda-log", str(pipeline["sess"] / "lambda_log.csv"),
            "--method", "GMM", "--channels", "R-G", "--grid", "4x4",
            "--out", str(out),
        ]) == 0
        names = sorted(p.name for p in out.iterdir())
        assert names == [f"features_GMM_R-G_w{i:02d}.txt" for i in range(10)]
        table = read_feature_table(out / "features_GMM_R-G_w03.txt")
        assert table.dim == 16  # mixture collapses channels per window
        assert table.weights  # label survives the round trip

    def test_single_weight_index(self, pipeline, tmp_path):
        out = tmp_path / "one"
        assert main([
            "extract", "--model", str(pipeline["model"]),
            "--frame-index", str(pipeline["sess"] / "frame_index.csv"),
            "--lambda-log", str(pipeline["sess"] / "lambda_log.csv"),
            "--method", "GMM", "--channels", "R-G", "--grid", "4x4",
            "--weights", "4", "--out", str(out),
        ]) == 0
        assert [p.name for p in out.iterdir()] == ["features_GMM_R-G_w04.txt"]

    def test_weight_index_out_of_grid(self, pipeline, tmp_path):
        code = main([
            "extract", "--model", str(pipeline["model"]),
            "--frame-index", str(pipeline["sess"] / "frame_index.csv"),
            "--lambda-log", str(pipeline["sess"] / "lambda_log.csv"),
            "--method", "GMM", "--channels", "R-G", "--grid", "4x4",
            "--weights", "10", "--out", str(tmp_path / "x"),
        ])
        assert code == 2


class TestEvaluate:
    def test_similarity_and_baseline_rows(self, pipeline, tmp_path, capsys):
        out = tmp_path / "eval"
        code = main([
            "evaluate", "--model", str(pipeline["model"]),
            "--frame-index", str(pipeline["sess"] / "frame_index.csv"),
            "--lambda-log", str(pipeline["sess"] / "lambda_log.csv"),
            "--grid", "4x4", "--runs", "2", "--max-epochs", "30",
            "--methods", "SumSim:R-G,Moments4,Flicker3",
            "--out", str(out),
        ])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "Flicker3: unavailable" in stdout
        report = (out / "report.csv").read_text().splitlines()
        methods = {ln.split(",")[0] for ln in report[1:]}
        assert methods == {"SumSim:R-G", "Moments4"}
        assert (out / "report.txt").is_file()
        assert (out / "overlay_SumSim-R-G_SCG.csv").is_file()

    def test_repeat_run_is_byte_identical(self, pipeline, tmp_path):
        args = [
            "evaluate", "--model", str(pipeline["model"]),
            "--frame-index", str(pipeline["sess"] / "frame_index.csv"),
            "--lambda-log", str(pipeline["sess"] / "lambda_log.csv"),
            "--grid", "4x4", "--runs", "2", "--max-epochs", "30",
            "--methods", "SumSim:R-G",
        ]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main([*args, "--out", str(a)]) == 0
        assert main([*args, "--out", str(b)]) == 0
        for name in ("report.csv", "report.txt", "overlay_SumSim-R-G_SCG.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()


class TestConfigFile:
    def test_config_drives_synth_and_paths_resolve_near_file(self, tmp_path):
        cfg_dir = tmp_path / "cfgs"
        cfg_dir.mkdir()
        cfg = cfg_dir / "run.json"
        cfg.write_text(json.dumps({
            "out": "sessrel", "size": 32, "duration_s": 5.0,
            "noise_sigma": 0.5, "seed": 9, "reference_count": 3,
        }))
        assert main(["synth", "--config", str(cfg)]) == 0
        assert (cfg_dir / "sessrel" / "frame_index.csv").is_file()

    def test_flag_overrides_config(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({
            "out": "sess", "size": 48, "duration_s": 5.0,
            "noise_sigma": 0.5, "seed": 9, "reference_count": 3,
        }))
        assert main(["synth", "--config", str(cfg), "--size", "32"]) == 0
        from PIL import Image

        with Image.open(tmp_path / "sess" / "frames" / "frame_00000.png") as img:
            assert img.size == (32, 32)

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"sizzle": 32}))
        assert main(["synth", "--config", str(cfg)]) == 2

    def test_invalid_json_rejected(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text("size = 32\n")
        assert main(["synth", "--config", str(cfg)]) == 2

    def test_wrong_value_type_rejected(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"size": "large"}))
        assert main(["synth", "--config", str(cfg)]) == 2


class TestExitCodes:
    def test_bad_grid_flag(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path), "--grid", "16by16"]) == 2

    def test_extract_rejects_baseline_methods(self, pipeline, tmp_path):
        code = main([
            "extract", "--model", str(pipeline["model"]),
            "--frame-index", str(pipeline["sess"] / "frame_index.csv"),
            "--lambda-log", str(pipeline["sess"] / "lambda_log.csv"),
            "--method", "Moments4", "--out", str(tmp_path / "x"),
        ])
        assert code == 2

    def test_train_without_features_is_config_error(self, pipeline, tmp_path):
        assert main([
            "train", "--model", str(pipeline["model"]), "--out", str(tmp_path),
        ]) == 2

    def test_missing_input_file_is_data_error(self, tmp_path):
        assert main([
            "fit-model", "--references", str(tmp_path / "nope.csv"),
            "--out", str(tmp_path),
        ]) == 3

    def test_corrupt_predictor_is_data_error(self, pipeline, tmp_path):
        bad = tmp_path / "predictor.txt"
        text = (pipeline["train"] / "predictor.txt").read_text()
        bad.write_text(text.replace("SumSim", "SumSam"))
        assert main([
            "predict", "--predictor", str(bad),
            "--frame-index", str(pipeline["sess"] / "frame_index.csv"),
            "--out", str(tmp_path / "p"),
        ]) == 3

    def test_unknown_subcommand_exits_via_argparse(self):
        with pytest.raises(SystemExit) as exc:
            main(["transmogrify"])
        assert exc.value.code == 2

    def test_synth_bad_size_is_config_error(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path / "s"), "--size", "33"]) == 2


class TestEmptyPredict:
    def test_header_only_output(self, pipeline, tmp_path):
        empty = tmp_path / "empty_index.csv"
        write_frame_index(empty, FrameIndex(np.empty(0), ()))
        out = tmp_path / "pred"
        assert main([
            "predict", "--predictor", str(pipeline["train"] / "predictor.txt"),
            "--frame-index", str(empty), "--out", str(out),
        ]) == 0
        assert (out / "predictions.csv").read_text() == "timestamp_s,lambda_hat\n"
