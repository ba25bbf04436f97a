import os
import subprocess
import sys

import numpy as np
import pytest

from hbpn.cli import main, minmax_to_byte_range
from hbpn.imaging import load_image, make_synthetic_image, save_image
from hbpn.metrics import psnr_y

TINY = ["--set", "modules=2", "--set", "depth=1", "--set", "base_channels=2", "--set", "patch_size=8",
        "--set", "patch_stride=8", "--set", "batch_schedule=2x3", "--set", "checkpoint_interval=3"]


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    os.mkdir("hr")
    for i in range(3):
        save_image(make_synthetic_image(16, 24, seed=i), f"hr/im{i}.png")
    assert main(["prepare-data", "hr", "data", "--scales", "2"]) == 0
    return tmp_path


def trained(workspace):
    assert main(["train", "--dataset-root", "data", "--out-dir", "run", "--scale", "2", *TINY]) == 0
    return "run/final.ckpt"


class TestUsage:
    def test_help_lists_flags(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for flag in ("--config", "--set", "--seed", "--resume", "--scale"):
            assert flag in out

    def test_unknown_flag_is_usage_error(self):
        assert main(["train", "--bogus"]) == 1

    def test_no_subcommand(self):
        assert main([]) == 1

    def test_unknown_config_key(self, workspace):
        assert main(["train", "--dataset-root", "data", "--set", "speed=3"]) == 1

    def test_console_entry_point(self):
        done = subprocess.run([sys.executable, "-m", "hbpn.cli", "--help"], capture_output=True, text=True)
        assert done.returncode == 0 and "diagnose" in done.stdout


class TestSubcommands:
    def test_prepare_data_rerun(self, workspace, capsys):
        assert main(["prepare-data", "hr", "data", "--scales", "2"]) == 0
        assert "written 0" in capsys.readouterr().out

    def test_prepare_data_empty(self, tmp_path):
        os.mkdir(tmp_path / "empty")
        assert main(["prepare-data", str(tmp_path / "empty"), str(tmp_path / "o")]) == 2

    def test_train_prints_resolved_config(self, workspace, capsys):
        trained(workspace)
        out = capsys.readouterr().out
        assert "base_channels = 2" in out and "scale = 2" in out
        assert os.path.exists("run/loss.log")

    def test_seed_flag_drives_run(self, workspace):
        args = ["train", "--dataset-root", "data", "--scale", "2", *TINY]
        assert main(args + ["--out-dir", "a", "--seed", "5"]) == 0
        assert main(args + ["--out-dir", "b", "--seed", "5"]) == 0
        assert main(args + ["--out-dir", "c", "--seed", "6"]) == 0
        read = lambda d: open(f"{d}/loss.log").read()
        assert read("a") == read("b") != read("c")

    def test_train_missing_data(self, workspace):
        assert main(["train", "--dataset-root", "nowhere", *TINY]) == 2

    def test_train_non_finite(self, workspace):
        args = ["train", "--dataset-root", "data", "--out-dir", "r", "--scale", "2", *TINY, "--set", "lr=1e30",
                "--set", "batch_schedule=2x30"]
        with np.errstate(all="ignore"):
            assert main(args) == 3

    def test_eval_bicubic_and_checkpoint(self, workspace):
        ckpt = trained(workspace)
        assert main(["eval", "--dataset-root", "data", "--out-dir", "ev", "--scale", "2"]) == 0
        assert main(["eval", "--dataset-root", "data", "--out-dir", "ev", "--scale", "2", *TINY,
                     "--checkpoint", ckpt]) == 0
        assert os.path.exists("ev/report_final_x2.jsonl")

    def test_eval_architecture_mismatch(self, workspace, capsys):
        ckpt = trained(workspace)
        assert main(["eval", "--dataset-root", "data", "--scale", "2", "--checkpoint", ckpt]) == 1
        assert "architecture mismatch" in capsys.readouterr().err

    def test_infer(self, workspace, capsys):
        ckpt = trained(workspace)
        args = ["infer", ckpt, "data/LRx2/im0.png", "sr.png", "--scale", "2", "--ground-truth", "data/HR/im0.png"]
        assert main(args) == 0
        first = open("sr.png", "rb").read()
        assert load_image("sr.png").shape == (16, 24)
        printed = capsys.readouterr().out.split("psnr_y ")[1].split(" dB")[0]
        expected = psnr_y(load_image("sr.png"), load_image("data/HR/im0.png"), 2)
        assert printed == f"{expected:.4f}"
        assert main(args) == 0
        assert open("sr.png", "rb").read() == first

    def test_infer_scale_mismatch(self, workspace):
        ckpt = trained(workspace)
        assert main(["infer", ckpt, "data/LRx2/im0.png", "sr.png", "--scale", "4"]) == 1

    def test_infer_missing_input(self, workspace):
        ckpt = trained(workspace)
        assert main(["infer", ckpt, "missing.png", "sr.png", "--scale", "2"]) == 2

    def test_diagnose(self, workspace):
        ckpt = trained(workspace)
        assert main(["diagnose", ckpt, "data/LRx2/im0.png", "diag", "--scale", "2"]) == 0
        files = sorted(os.listdir("diag"))
        assert files == ["activation.txt", "coarse_1.png", "coarse_2.png", "prob_1.png", "prob_2.png",
                         "sr.png", "weight_1.png", "weight_2.png"]
        table = open("diag/activation.txt").read().splitlines()
        assert len(table) == 3
        w = load_image("diag/weight_1.png").to_bytes()
        assert w.min() == 0 and w.max() == 255

    def test_ablate(self, workspace, capsys):
        args = ["ablate", "head_kind", "WR", "Plain", "--dataset-root", "data", "--out-dir", "abl",
                "--scale", "2", *TINY]
        assert main(args) == 0
        table = open("abl/ablation_head_kind.txt").read()
        assert "WR model" in table and "Plain model" in table

    def test_ablate_bad_value(self, workspace):
        assert main(["ablate", "depth", "five", "--dataset-root", "data", *TINY]) == 1


class TestWeightMapNormalisation:
    def test_min_max(self):
        out = minmax_to_byte_range(np.array([[1.0, 2.0], [3.0, 5.0]]))
        np.testing.assert_allclose(out, [[0, 63.75], [127.5, 255]])

    def test_constant_map_is_zero(self):
        np.testing.assert_array_equal(minmax_to_byte_range(np.full((4, 4), 0.7)), 0)
