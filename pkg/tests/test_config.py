import yaml
import pytest

from specklemon.config import (
    ConfigError,
    HarnessConfig,
    config_from_dict,
    config_to_yaml,
    default_config_yaml,
)


class TestDefaults:
    def test_default_yaml_parses_to_defaults(self):
        cfg = config_from_dict(yaml.safe_load(default_config_yaml()))
        assert cfg == HarnessConfig()

    def test_defaults_pass_validation(self):
        assert HarnessConfig().validation_errors() == []

    def test_roundtrip_is_fixed_point(self):
        cfg = HarnessConfig()
        text1 = config_to_yaml(cfg)
        cfg2 = config_from_dict(yaml.safe_load(text1))
        text2 = config_to_yaml(cfg2)
        assert text1 == text2
        assert cfg2 == cfg


class TestValidation:
    def test_errors_collected_all_at_once(self):
        d = HarnessConfig().model_dump()
        d["optics"]["pitch_um"] = -1.0
        d["dataset"]["split_fraction"] = 1.5
        d["materials"] = d["materials"][:1]
        with pytest.raises(ConfigError) as exc_info:
            config_from_dict(d)
        errors = exc_info.value.errors
        assert len(errors) >= 3
        assert any("pitch" in e for e in errors)
        assert any("split_fraction" in e for e in errors)
        assert any("materials" in e for e in errors)

    def test_unknown_keys_rejected(self):
        d = HarnessConfig().model_dump()
        d["optics"]["wavelenght_um"] = 0.6
        with pytest.raises(ConfigError, match="wavelenght"):
            config_from_dict(d)

    def test_nyquist_violation_reported(self):
        d = HarnessConfig().model_dump()
        d["optics"]["pitch_um"] = 0.4
        with pytest.raises(ConfigError, match="Nyquist"):
            config_from_dict(d)

    def test_detector_box_compatibility(self):
        d = HarnessConfig().model_dump()
        d["preprocessing"]["box_factor"] = 8  # 1020 / 8 is not integral
        with pytest.raises(ConfigError, match="divisible"):
            config_from_dict(d)

    def test_duplicate_material_names(self):
        d = HarnessConfig().model_dump()
        d["materials"][1]["name"] = d["materials"][0]["name"]
        with pytest.raises(ConfigError, match="unique"):
            config_from_dict(d)

    def test_non_mapping_rejected(self):
        with pytest.raises(ConfigError, match="mapping"):
            config_from_dict([1, 2, 3])

    def test_empty_dict_is_default(self):
        assert config_from_dict({}) == HarnessConfig()
