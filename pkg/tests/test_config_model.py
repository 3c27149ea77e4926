"""Tests for configuration models, key = value text and environment settings."""

from pathlib import Path

import pytest
from pydantic import ValidationError

from config.settings import CONFIG_DIR, get_settings
from src.models.config_model import (
    ModelConfig,
    TrainConfig,
    merge_overrides,
    parse_kv_text,
    resolve_train_config,
)


class TestModelConfig:
    """Test ModelConfig validation and hashing."""

    def test_defaults(self):
        cfg = ModelConfig()
        assert cfg.stages == 4
        assert cfg.widths == [16, 32, 64, 128]
        assert cfg.regia_factor == 6

    def test_channel_plan_overrides_base(self):
        cfg = ModelConfig(channel_plan=[8, 12, 24, 40])
        assert cfg.widths == [8, 12, 24, 40]

    @pytest.mark.parametrize("plan", [[8, 16, 32], [8, 0, 32, 64]])
    def test_invalid_channel_plan(self, plan):
        with pytest.raises(ValidationError):
            ModelConfig(channel_plan=plan)

    def test_odd_widths_need_hcafe_disabled(self):
        with pytest.raises(ValidationError) as exc_info:
            ModelConfig(base_channels=5)
        assert "HCAFE" in str(exc_info.value)
        assert ModelConfig(base_channels=5, enable_hcafe=False).widths == [5, 10, 20, 40]

    @pytest.mark.parametrize("stages", [0, 5])
    def test_stage_range(self, stages):
        with pytest.raises(ValidationError):
            ModelConfig(stages=stages)

    def test_hash_is_stable(self):
        assert ModelConfig().config_hash() == ModelConfig().config_hash()
        assert len(ModelConfig().config_hash()) == 64

    def test_explicit_default_plan_hashes_the_same(self):
        explicit = ModelConfig(channel_plan=[16, 32, 64, 128])
        assert explicit.config_hash() == ModelConfig().config_hash()

    def test_hash_tracks_every_field(self):
        base = ModelConfig().config_hash()
        assert ModelConfig(enable_regia=False).config_hash() != base
        assert ModelConfig(init_seed=1).config_hash() != base

    def test_diff(self):
        diff = ModelConfig().diff(ModelConfig(base_channels=8, stages=2))
        assert diff["base_channels"] == (16, 8)
        assert diff["stages"] == (4, 2)
        assert diff["channel_plan"] == ([16, 32, 64, 128], [8, 16, 32, 64])
        assert "regia_factor" not in diff


class TestTrainConfig:
    """Test TrainConfig validation."""

    def test_defaults(self):
        cfg = TrainConfig()
        assert cfg.lr == 2e-4
        assert (cfg.l1_weight, cfg.perceptual_weight, cfg.mse_weight) == (1.0, 0.2, 1.0)
        assert cfg.enable_l1 and cfg.enable_pre and cfg.enable_mse

    def test_crop_must_be_multiple_of_8(self):
        with pytest.raises(ValidationError) as exc_info:
            TrainConfig(crop=50)
        assert "multiple of 8" in str(exc_info.value)

    @pytest.mark.parametrize("field,value", [("lr", 0.0), ("batch_size", 0), ("log_every", 0)])
    def test_invalid_values(self, field, value):
        with pytest.raises(ValidationError):
            TrainConfig(**{field: value})

    def test_kv_text_round_trip(self):
        cfg = TrainConfig(
            model=ModelConfig(base_channels=8, enable_asisf_de=False),
            crop=48,
            seed=17,
            data_root=Path("data/train"),
            perceptual="vgg",
        )
        assert TrainConfig.from_kv_text(cfg.to_kv_text()) == cfg

    def test_kv_text_is_sorted_and_dotted(self):
        lines = TrainConfig().to_kv_text().splitlines()
        assert lines == sorted(lines)
        assert "model.base_channels = 16" in lines
        assert "data_root = null" in lines


class TestKvText:
    """Test key = value parsing."""

    def test_values_comments_and_nesting(self):
        text = """
        # a comment
        crop = 48          # trailing comment
        perceptual = vgg
        enable_pre = false
        model.channel_plan = [8, 16, 32, 64]
        """
        values = parse_kv_text(text)
        assert values == {
            "crop": 48,
            "perceptual": "vgg",
            "enable_pre": False,
            "model": {"channel_plan": [8, 16, 32, 64]},
        }

    def test_hash_inside_values_is_kept(self):
        text = 'data_root = "runs/#3"  # run three\nval_root = runs/#4\n# crop = 8\n'
        assert parse_kv_text(text) == {"data_root": "runs/#3", "val_root": "runs/#4"}

    def test_kv_text_round_trip_with_hash_in_path(self):
        cfg = TrainConfig(data_root=Path("runs/#3"))
        assert TrainConfig.from_kv_text(cfg.to_kv_text()).data_root == Path("runs/#3")

    @pytest.mark.parametrize("text", ["crop 48", " = 3"])
    def test_malformed_lines(self, text):
        with pytest.raises(ValueError):
            parse_kv_text(text)

    def test_merge_overrides(self):
        merged = merge_overrides({"model": {"stages": 4, "base_channels": 8}}, {"model.stages": 2})
        assert merged == {"model": {"stages": 2, "base_channels": 8}}


class TestResolve:
    """Profile, file and override precedence."""

    def test_profiles(self):
        desk = resolve_train_config("desk")
        paper = resolve_train_config("paper")
        assert (desk.batch_size, desk.crop, desk.model.base_channels) == (4, 64, 8)
        assert (paper.batch_size, paper.crop, paper.iterations) == (44, 256, 100000)
        assert paper.perceptual == "vgg"

    def test_precedence(self):
        cfg = resolve_train_config(
            "desk", config_text="crop = 32\nseed = 5\n", overrides={"seed": 9}
        )
        assert cfg.crop == 32
        assert cfg.seed == 9
        assert cfg.batch_size == 4

    @pytest.mark.parametrize(
        "overrides",
        [{"batchsize": 8}, {"model": {"base_channel": 4}}, {"model.widths": [8, 16, 32, 64]}],
    )
    def test_unknown_keys_are_rejected(self, overrides):
        with pytest.raises(ValidationError) as exc_info:
            resolve_train_config("desk", overrides=overrides)
        assert "Extra inputs are not permitted" in str(exc_info.value)

    def test_unknown_key_in_config_text(self):
        with pytest.raises(ValidationError):
            TrainConfig.from_kv_text("crop = 48\nmodel.stage = 2\n")

    def test_unknown_profile(self):
        with pytest.raises(ValueError):
            resolve_train_config("laptop")

    @pytest.mark.parametrize("name", ["desk.cfg", "paper.cfg"])
    def test_shipped_config_files(self, name):
        profile = name.split(".")[0]
        text = (CONFIG_DIR / name).read_text(encoding="utf-8")
        cfg = resolve_train_config(profile, config_text=text)
        assert cfg.model.stages == 4
        assert cfg.model.regia_factor == 6
        assert cfg.lr == {"desk": 1e-3, "paper": 2e-4}[profile]


class TestSettings:
    """Environment-driven settings."""

    @pytest.fixture(autouse=True)
    def fresh_settings(self):
        get_settings.cache_clear()
        yield
        get_settings.cache_clear()

    def test_environment_values(self, monkeypatch, tmp_path):
        monkeypatch.setenv("LOG_LEVEL", "debug")
        monkeypatch.setenv("OUTPUT_DIR", str(tmp_path / "out"))
        monkeypatch.setenv("SMDRIS_CACHE", str(tmp_path / "cache"))
        settings = get_settings()
        assert settings.log_level == "DEBUG"
        assert settings.output_dir == tmp_path / "out"
        assert settings.cache_dir == tmp_path / "cache"

    def test_defaults(self, monkeypatch):
        for name in ("LOG_LEVEL", "OUTPUT_DIR", "SMDRIS_CACHE"):
            monkeypatch.delenv(name, raising=False)
        settings = get_settings()
        assert settings.log_level == "INFO"
        assert settings.output_dir == Path("./output")

    def test_unknown_log_level(self, monkeypatch):
        monkeypatch.setenv("LOG_LEVEL", "chatty")
        with pytest.raises(ValidationError):
            get_settings()
