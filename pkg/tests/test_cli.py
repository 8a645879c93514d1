import json

import numpy as np
import pytest

from csae.checkpoint import load_checkpoint
from csae.data import read_csv_table, write_idx
from csae.main import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, build_parser, main
from csae.trainer import TrainReport
from csae.viz import read_pnm

from conftest import synthetic_raw


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """IDX files plus lambda=2 and lambda=10 checkpoints trained for one epoch."""
    root = tmp_path_factory.mktemp("cli")
    files = {
        "train_images": root / "train-images.gz",
        "train_labels": root / "train-labels.gz",
        "test_images": root / "test-images",
        "test_labels": root / "test-labels",
    }
    write_idx(files["train_images"], files["train_labels"], synthetic_raw(n=48, seed=0))
    write_idx(files["test_images"], files["test_labels"], synthetic_raw(n=18, seed=1))
    for latent_dim in (2, 10):
        checkpoint = root / f"model{latent_dim}.csae"
        code = main(
            [
                "train",
                "--images", str(files["train_images"]),
                "--labels", str(files["train_labels"]),
                "--lambda", str(latent_dim),
                "--epochs", "1",
                "--batch-size", "16",
                "--checkpoint", str(checkpoint),
                "--log-dir", str(root / "logs"),
            ]
        )
        assert code == EXIT_OK
        files[f"model{latent_dim}"] = checkpoint
    return files


def _run(tmp_path, *argv):
    log_dir = tmp_path / "logs"
    code = main(list(argv) + ["--log-dir", str(log_dir)])
    logs = sorted(log_dir.glob("log_*.txt"))
    return code, logs[-1].read_text() if logs else ""


def _metrics(log_text):
    records = [json.loads(line) for line in log_text.splitlines() if line.startswith("{")]
    return {r["metric"]: r["value"] for r in records}


@pytest.mark.unit
class TestUsage:
    def test_help(self):
        assert main(["--help"]) == EXIT_OK

    def test_missing_command(self):
        assert main([]) == EXIT_USAGE

    def test_unknown_method(self, workspace):
        code = main(
            [
                "classify-latent",
                "--images", str(workspace["train_images"]),
                "--labels", str(workspace["train_labels"]),
                "--method", "forest",
            ]
        )
        assert code == EXIT_USAGE

    def test_classify_needs_test_files(self, workspace):
        argv = [
            "classify-latent",
            "--images", str(workspace["train_images"]),
            "--labels", str(workspace["train_labels"]),
            "--checkpoint", str(workspace["model2"]),
            "--method", "knn",
        ]
        assert main(argv) == EXIT_USAGE

    def test_classify_needs_checkpoint_without_raw(self, workspace):
        argv = [
            "classify-latent",
            "--images", str(workspace["train_images"]),
            "--labels", str(workspace["train_labels"]),
            "--test-images", str(workspace["test_images"]),
            "--test-labels", str(workspace["test_labels"]),
            "--method", "knn",
        ]
        assert main(argv) == EXIT_USAGE

    def test_train_test_flags_go_together(self, workspace):
        argv = [
            "train",
            "--images", str(workspace["train_images"]),
            "--labels", str(workspace["train_labels"]),
            "--test-images", str(workspace["test_images"]),
        ]
        assert main(argv) == EXIT_USAGE

    def test_overlay_needs_labels(self, workspace):
        argv = ["viz-boundary", "--images", str(workspace["test_images"]), "--checkpoint", str(workspace["model2"]), "--overlay"]
        assert main(argv) == EXIT_USAGE

    def test_lambda_flag(self):
        args = build_parser().parse_args(["train", "--images", "a", "--labels", "b", "--lambda", "2"])
        assert args.latent_dim == 2
        assert args.update_mode == "joint"


@pytest.mark.unit
class TestRuntimeErrors:
    def test_missing_file(self, tmp_path):
        code, log = _run(tmp_path, "eval", "--images", str(tmp_path / "nope"), "--labels", str(tmp_path / "nope"),
                         "--checkpoint", str(tmp_path / "nope.csae"))
        assert code == EXIT_RUNTIME
        assert "[ERROR]" in log

    def test_corrupt_checkpoint(self, tmp_path, workspace):
        bad = tmp_path / "bad.csae"
        bad.write_bytes(b"NOPE" + bytes(20))
        code, log = _run(tmp_path, "eval", "--images", str(workspace["test_images"]),
                         "--labels", str(workspace["test_labels"]), "--checkpoint", str(bad))
        assert code == EXIT_RUNTIME
        assert "BadMagicError" in log

    def test_checkpoint_with_undecodable_name(self, tmp_path, workspace):
        data = bytearray(workspace["model2"].read_bytes())
        data[16] = 0xFF
        bad = tmp_path / "name.csae"
        bad.write_bytes(bytes(data))
        code, log = _run(tmp_path, "eval", "--images", str(workspace["test_images"]),
                         "--labels", str(workspace["test_labels"]), "--checkpoint", str(bad))
        assert code == EXIT_RUNTIME
        assert "[ERROR] FileFormatError" in log

    def test_boundary_needs_two_dimensional_latent(self, tmp_path, workspace):
        code, log = _run(tmp_path, "viz-boundary", "--images", str(workspace["test_images"]),
                         "--checkpoint", str(workspace["model10"]), "--out", str(tmp_path / "b.ppm"))
        assert code == EXIT_RUNTIME
        assert "LatentDimensionError" in log
        assert not (tmp_path / "b.ppm").exists()


@pytest.mark.unit
class TestCommands:
    def test_train_writes_checkpoint_and_report(self, tmp_path, workspace):
        checkpoint = tmp_path / "m.csae"
        code, log = _run(
            tmp_path, "train",
            "--images", str(workspace["train_images"]),
            "--labels", str(workspace["train_labels"]),
            "--test-images", str(workspace["test_images"]),
            "--test-labels", str(workspace["test_labels"]),
            "--lambda", "3", "--epochs", "2", "--batch-size", "16", "--update-mode", "head_only",
            "--checkpoint", str(checkpoint),
        )
        assert code == EXIT_OK
        model = load_checkpoint(checkpoint)
        assert (model.latent_dim, model.num_classes) == (3, 3)
        report = TrainReport.from_csv(tmp_path / "m_report.csv")
        assert len(report.epochs) == 2
        metrics = _metrics(log)
        assert metrics["best_epoch"] == report.best_epoch
        assert 0 <= metrics["test_accuracy"] <= 1
        assert "Parameters: encoder" in log

    def test_train_with_held_out_fraction(self, tmp_path, workspace):
        code, log = _run(
            tmp_path, "train",
            "--images", str(workspace["train_images"]),
            "--labels", str(workspace["train_labels"]),
            "--test-fraction", "0.25", "--subset", "30",
            "--lambda", "2", "--epochs", "1", "--batch-size", "16",
            "--checkpoint", str(tmp_path / "h.csae"),
        )
        assert code == EXIT_OK
        assert "Split 32 train / 4 validation / 12 test samples" in log
        assert "test_weighted_f1" in _metrics(log)

    def test_eval(self, tmp_path, workspace):
        code, log = _run(tmp_path, "eval", "--images", str(workspace["test_images"]),
                         "--labels", str(workspace["test_labels"]), "--checkpoint", str(workspace["model2"]))
        assert code == EXIT_OK
        assert set(_metrics(log)) == {"eval_accuracy", "eval_weighted_f1", "eval_recon_loss", "eval_cls_loss"}

    def test_extract_latent(self, tmp_path, workspace):
        out = tmp_path / "z.csv"
        code, _ = _run(tmp_path, "extract-latent", "--images", str(workspace["test_images"]),
                       "--labels", str(workspace["test_labels"]), "--checkpoint", str(workspace["model10"]),
                       "--out", str(out))
        assert code == EXIT_OK
        header, table = read_csv_table(out)
        assert header == [f"z{i}" for i in range(10)] + ["label"]
        assert table.shape == (18, 11)

    def test_extract_scatter(self, tmp_path, workspace):
        out = tmp_path / "s.csv"
        code, _ = _run(tmp_path, "extract-latent", "--images", str(workspace["test_images"]),
                       "--labels", str(workspace["test_labels"]), "--checkpoint", str(workspace["model2"]),
                       "--with-predictions", "--out", str(out))
        assert code == EXIT_OK
        header, _ = read_csv_table(out)
        assert header == ["x0", "x1", "true_label", "predicted_label"]

    @pytest.mark.parametrize("method,extra", [("knn", ["--k", "1"]), ("gnb", []), ("svm", ["--standardize-latent"])])
    def test_classify_latent(self, tmp_path, workspace, method, extra):
        code, log = _run(
            tmp_path, "classify-latent",
            "--images", str(workspace["train_images"]),
            "--labels", str(workspace["train_labels"]),
            "--test-images", str(workspace["test_images"]),
            "--test-labels", str(workspace["test_labels"]),
            "--checkpoint", str(workspace["model10"]),
            "--method", method, *extra,
        )
        assert code == EXIT_OK
        assert f"latent_{method}_accuracy" in _metrics(log)

    def test_classify_raw_pixels(self, tmp_path, workspace):
        code, log = _run(
            tmp_path, "classify-latent", "--raw",
            "--images", str(workspace["train_images"]),
            "--labels", str(workspace["train_labels"]),
            "--test-images", str(workspace["test_images"]),
            "--test-labels", str(workspace["test_labels"]),
            "--method", "knn",
        )
        assert code == EXIT_OK
        assert _metrics(log)["raw_knn_accuracy"] >= 0.9

    def test_viz_boundary(self, tmp_path, workspace):
        out = tmp_path / "b.ppm"
        code, _ = _run(tmp_path, "viz-boundary", "--images", str(workspace["test_images"]),
                       "--labels", str(workspace["test_labels"]), "--checkpoint", str(workspace["model2"]),
                       "--resolution", "30", "--overlay", "--out", str(out))
        assert code == EXIT_OK
        magic, pixels = read_pnm(out)
        assert magic == "P6"
        assert pixels.shape == (30, 30, 3)

    def test_viz_decoder_grid(self, tmp_path, workspace):
        out = tmp_path / "g.pgm"
        code, _ = _run(tmp_path, "viz-decoder-grid", "--images", str(workspace["test_images"]),
                       "--checkpoint", str(workspace["model2"]), "--points", "3", "--out", str(out))
        assert code == EXIT_OK
        magic, pixels = read_pnm(out)
        assert magic == "P5"
        assert pixels.shape == (84, 84)
        assert pixels.dtype == np.uint8

    def test_gradcheck(self, tmp_path):
        code, log = _run(tmp_path, "gradcheck", "--seeds", "1")
        assert code == EXIT_OK
        metrics = _metrics(log)
        assert metrics["gradcheck_failures"] == 0
        assert metrics["gradcheck_cases"] == 9


@pytest.mark.unit
def test_same_seed_gives_identical_artifacts(tmp_path, workspace):
    outputs = []
    for run in ("a", "b"):
        checkpoint = tmp_path / f"{run}.csae"
        boundary = tmp_path / f"{run}.ppm"
        assert _run(
            tmp_path, "train",
            "--images", str(workspace["train_images"]),
            "--labels", str(workspace["train_labels"]),
            "--lambda", "2", "--epochs", "1", "--batch-size", "16", "--seed", "5",
            "--checkpoint", str(checkpoint),
        )[0] == EXIT_OK
        assert _run(
            tmp_path, "viz-boundary",
            "--images", str(workspace["test_images"]),
            "--checkpoint", str(checkpoint),
            "--resolution", "25", "--out", str(boundary),
        )[0] == EXIT_OK
        outputs.append((checkpoint.read_bytes(), boundary.read_bytes()))
    assert outputs[0] == outputs[1]


@pytest.mark.unit
def test_svm_subsamples_only_on_request(tmp_path, workspace):
    argv = [
        "classify-latent",
        "--images", str(workspace["train_images"]),
        "--labels", str(workspace["train_labels"]),
        "--test-images", str(workspace["test_images"]),
        "--test-labels", str(workspace["test_labels"]),
        "--checkpoint", str(workspace["model2"]),
        "--method", "svm",
    ]
    assert build_parser().parse_args(argv).svm_max_samples is None

    code, log = _run(tmp_path / "full", *argv)
    assert code == EXIT_OK
    assert "subsampling" not in log

    code, log = _run(tmp_path / "bounded", *argv, "--svm-max-samples", "30")
    assert code == EXIT_OK
    assert "[WARNING] SVM: subsampling 30 of 48" in log
