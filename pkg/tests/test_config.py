import pytest

from hbpn.config import TrainConfig, format_schedule, load_config, parse_config_text, parse_schedule
from hbpn.errors import ConfigError


class TestDefaults:
    def test_training_defaults(self):
        c = TrainConfig()
        assert (c.lr, c.beta1, c.weight_decay) == (1e-4, 0.9, 1e-4)
        assert c.batch_schedule == ((8, 500_000), (32, 500_000))
        assert c.total_steps == 1_000_000

    def test_schedule_arithmetic(self):
        assert TrainConfig(batch_schedule=((8, 10), (32, 10))).total_steps == 20


class TestValidation:
    @pytest.mark.parametrize("change", [
        {"scale": 3}, {"modules": 0}, {"depth": 0}, {"lr": 0.0}, {"loss": "huber"},
        {"head_kind": "concat"}, {"batch_schedule": ()}, {"batch_schedule": ((0, 5),)},
        {"patch_size": 36},
    ])
    def test_rejected(self, change):
        with pytest.raises(ConfigError):
            TrainConfig(**change)

    def test_patch_divisibility_uses_depth(self):
        TrainConfig(depth=4, scale=2, patch_size=32)
        with pytest.raises(ConfigError, match="divisible by 16"):
            TrainConfig(depth=4, scale=2, patch_size=24)


class TestParsing:
    def test_schedule_round_trip(self):
        assert parse_schedule("8x10, 32x20") == ((8, 10), (32, 20))
        assert format_schedule(((8, 10), (32, 20))) == "8x10,32x20"
        with pytest.raises(ValueError):
            parse_schedule("8-10")

    def test_config_text(self):
        text = "# comment\n\nscale = 2\nhead_kind=Plain\n"
        assert parse_config_text(text) == {"scale": "2", "head_kind": "Plain"}

    def test_duplicate_and_malformed(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("a = 1\na = 2")
        with pytest.raises(ConfigError):
            parse_config_text("just words")

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown"):
            TrainConfig.from_mapping({"learning_rate": "1"})

    def test_bad_value(self):
        with pytest.raises(ConfigError, match="scale"):
            TrainConfig.from_mapping({"scale": "two"})

    def test_overrides_beat_file(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("scale = 2\nlr = 0.001\naugment = false\nbatch_schedule = 4x3\n")
        c = load_config(path, {"lr": "0.01"})
        assert (c.scale, c.lr, c.augment, c.batch_schedule) == (2, 0.01, False, ((4, 3),))

    def test_text_round_trip(self, tmp_path):
        c = TrainConfig(scale=8, head_kind="Plain", model_seed=3, batch_schedule=((2, 5),))
        path = tmp_path / "c.cfg"
        path.write_text(c.to_text())
        assert load_config(path) == c

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.cfg")
