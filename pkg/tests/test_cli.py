"""Tests for the smdris command line."""

import pytest
import torch

from src.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, RESOLVED_CONFIG_NAME, main
from src.models.config_model import TrainConfig, resolve_train_config
from src.network.smdr import build_model
from src.services.checkpoint import save_checkpoint
from src.services.data_io import load_image, save_image


@pytest.fixture
def checkpoint_path(tmp_path):
    cfg = resolve_train_config("desk")
    return save_checkpoint(tmp_path / "model.pt", build_model(cfg.model), cfg)


def _run(*argv: str) -> int:
    return main(["--log-level", "WARNING", *argv])


class TestSynth:
    """synth command."""

    def test_reruns_are_byte_identical(self, tmp_path):
        for name in ("a", "b"):
            out = str(tmp_path / name)
            code = _run("synth", "--n", "2", "--size", "24", "--seed", "5", "--out", out)
            assert code == EXIT_OK
        for rel in ("raw/0000.png", "reference/0001.png", "manifest.json"):
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()

    def test_size_must_be_multiple_of_24(self, tmp_path, capsys):
        code = _run("synth", "--n", "1", "--size", "70", "--out", str(tmp_path / "s"))
        assert code == EXIT_USAGE
        assert "24" in capsys.readouterr().err
        assert not (tmp_path / "s").exists()


class TestTrain:
    """train command."""

    def test_print_config_paper_profile(self, capsys):
        code = _run("train", "--profile", "paper", "--print-config")
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "batch_size = 44" in out
        assert "crop = 256" in out
        assert "lr = 0.0002" in out
        assert "model.base_channels = 32" in out

    def test_precedence(self, tmp_path, capsys):
        config = tmp_path / "run.cfg"
        config.write_text("crop = 32\nseed = 3\n# comment\n", encoding="utf-8")
        code = _run(
            "train", "--config", str(config), "--set", "seed=4", "--seed", "9", "--print-config"
        )
        assert code == EXIT_OK
        resolved = TrainConfig.from_kv_text(capsys.readouterr().out)
        assert resolved.crop == 32
        assert resolved.seed == 9

    def test_unknown_flag_is_usage_error(self, tmp_path):
        code = _run("train", "--bogus", "--out", str(tmp_path / "run"))
        assert code == EXIT_USAGE
        assert not (tmp_path / "run").exists()

    def test_invalid_crop_is_usage_error(self, tmp_path, capsys):
        code = _run("train", "--set", "crop=50", "--out", str(tmp_path / "run"))
        assert code == EXIT_USAGE
        assert "multiple of 8" in capsys.readouterr().err
        assert not (tmp_path / "run").exists()

    def test_misspelled_set_key_is_usage_error(self, capsys):
        code = _run("train", "--set", "batchsize=8", "--print-config")
        assert code == EXIT_USAGE
        assert "batchsize" in capsys.readouterr().err

    def test_misspelled_config_file_key_is_usage_error(self, tmp_path):
        config = tmp_path / "typo.cfg"
        config.write_text("model.base_channel = 4\n", encoding="utf-8")
        code = _run("train", "--config", str(config), "--out", str(tmp_path / "run"))
        assert code == EXIT_USAGE
        assert not (tmp_path / "run").exists()

    def test_missing_config_file(self, tmp_path):
        assert _run("train", "--config", str(tmp_path / "none.cfg")) == EXIT_USAGE

    def test_short_run(self, tmp_path, synthetic_root):
        out = tmp_path / "run"
        code = _run(
            "train",
            "--data", str(synthetic_root),
            "--out", str(out),
            "--iters", "2",
            "--set", "crop=48",
            "--set", "batch_size=2",
        )
        assert code == EXIT_OK
        assert (out / "final.pt").is_file()
        resolved = TrainConfig.from_kv_text((out / RESOLVED_CONFIG_NAME).read_text())
        assert resolved.iterations == 2 and resolved.crop == 48

    def test_missing_data_is_runtime_error(self, tmp_path):
        code = _run("train", "--data", str(tmp_path / "nowhere"), "--out", str(tmp_path / "run"))
        assert code == EXIT_RUNTIME


class TestInfer:
    """infer command."""

    def test_keeps_original_dimensions(self, tmp_path, checkpoint_path):
        image = torch.rand(1, 3, 250, 250, generator=torch.Generator().manual_seed(0))
        save_image(image, tmp_path / "in.png")
        code = _run(
            "infer",
            "--checkpoint", str(checkpoint_path),
            "--input", str(tmp_path / "in.png"),
            "--output", str(tmp_path / "out"),
        )
        assert code == EXIT_OK
        assert load_image(tmp_path / "out" / "in.png").shape == (1, 3, 250, 250)

    def test_directory_input(self, tmp_path, checkpoint_path):
        for name in ("a", "b", "c"):
            save_image(torch.full((1, 3, 20, 30), 0.3), tmp_path / "batch" / f"{name}.png")
        code = _run(
            "infer",
            "--checkpoint", str(checkpoint_path),
            "--input", str(tmp_path / "batch"),
            "--output", str(tmp_path / "out"),
        )
        assert code == EXIT_OK
        assert sorted(p.name for p in (tmp_path / "out").iterdir()) == ["a.png", "b.png", "c.png"]

    def test_all_inputs_corrupt(self, tmp_path, checkpoint_path):
        (tmp_path / "batch").mkdir()
        (tmp_path / "batch" / "x.png").write_bytes(b"broken")
        code = _run(
            "infer",
            "--checkpoint", str(checkpoint_path),
            "--input", str(tmp_path / "batch"),
            "--output", str(tmp_path / "out"),
        )
        assert code == EXIT_RUNTIME

    def test_missing_checkpoint(self, tmp_path):
        save_image(torch.full((1, 3, 8, 8), 0.3), tmp_path / "in.png")
        code = _run(
            "infer",
            "--checkpoint", str(tmp_path / "none.pt"),
            "--input", str(tmp_path / "in.png"),
            "--output", str(tmp_path / "out"),
        )
        assert code == EXIT_USAGE


class TestEval:
    """eval command."""

    def test_paired_report(self, tmp_path, checkpoint_path, synthetic_root, capsys):
        out = tmp_path / "eval"
        code = _run(
            "eval",
            "--checkpoint", str(checkpoint_path),
            "--data", str(synthetic_root),
            "--out", str(out),
        )
        assert code == EXIT_OK
        assert (out / "metrics.csv").is_file()
        assert "psnr" in capsys.readouterr().out

    def test_unpaired_report(self, tmp_path, checkpoint_path, synthetic_root):
        out = tmp_path / "eval"
        code = _run(
            "eval",
            "--checkpoint", str(checkpoint_path),
            "--data", str(synthetic_root),
            "--unpaired",
            "--out", str(out),
        )
        assert code == EXIT_OK
        header = (out / "metrics.csv").read_text(encoding="utf-8").splitlines()[1]
        assert "psnr" not in header

    def test_missing_checkpoint(self, tmp_path, synthetic_root):
        code = _run(
            "eval",
            "--checkpoint", str(tmp_path / "none.pt"),
            "--data", str(synthetic_root),
            "--out", str(tmp_path / "eval"),
        )
        assert code == EXIT_RUNTIME


class TestAblateAndDescribe:
    """ablate argument checks and describe output."""

    def test_unknown_matrix(self):
        assert _run("ablate", "--matrix", "bogus") == EXIT_USAGE

    def test_describe_from_profile(self, capsys):
        assert _run("describe", "--size", "24") == EXIT_OK
        out = capsys.readouterr().out
        assert "FE_1" in out
        assert out.strip().splitlines()[-1].startswith("total")

    def test_describe_from_checkpoint(self, checkpoint_path, capsys):
        assert _run("describe", "--checkpoint", str(checkpoint_path)) == EXIT_OK
        assert "S_en_2D" in capsys.readouterr().out
