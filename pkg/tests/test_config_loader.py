"""
Tests for the key=value configuration files
"""

import pytest

from api.models import ClusterConfig, InjectionMix, ModelMode
from core.exceptions import ConfigError, ConfigParseError, ConfigValidationError
from database.presets import get_preset_registry
from services.config_loader import config_from_metadata, format_config, parse_config


def write(tmp_path, text: str):
    path = tmp_path / "cluster.cfg"
    path.write_text(text, encoding="utf-8")
    return path


def test_empty_file_is_table2(tmp_path):
    assert parse_config(write(tmp_path, "")) == get_preset_registry().config("table2")
    assert parse_config(write(tmp_path, "")) == ClusterConfig()


def test_overrides_keep_other_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, "T_M_best_ms=5\nC=7\n"))
    assert cfg == ClusterConfig(C=7)


def test_comments_blanks_and_typed_values(tmp_path):
    text = "\n".join([
        "# correlated bundle failures",
        "",
        "C = 5",
        "N_F=2",
        "watchdog=true",
        "mode=availability",
        "injection_mix=bundle",
        "lambda_F_S_per_week=2.5",
    ])
    cfg = parse_config(write(tmp_path, text))
    assert cfg.C == 5 and cfg.N_F == 2
    assert cfg.watchdog is True
    assert cfg.mode is ModelMode.AVAILABILITY
    assert cfg.injection_mix is InjectionMix.BUNDLE
    assert cfg.lambda_F_S_per_week == 2.5


def test_even_cluster_size_is_a_validation_error(tmp_path):
    with pytest.raises(ConfigValidationError):
        parse_config(write(tmp_path, "C=4"))


def test_non_numeric_value_is_a_validation_error(tmp_path):
    with pytest.raises(ConfigValidationError):
        parse_config(write(tmp_path, "E_S=many"))


@pytest.mark.parametrize(
    "text, line_no",
    [
        ("C=5\nnot a pair\n", 2),
        ("# header\nC_total=5\n", 2),
        ("C=5\nE_S=10\nC=7\n", 3),
        ("=5\n", 1),
    ],
)
def test_parse_errors_carry_line_numbers(tmp_path, text, line_no):
    with pytest.raises(ConfigParseError) as excinfo:
        parse_config(write(tmp_path, text))
    assert excinfo.value.line_no == line_no
    assert f":{line_no}:" in str(excinfo.value)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "absent.cfg")


def test_format_config_reads_back(tmp_path):
    cfg = ClusterConfig(C=7, N_F=3, watchdog=True, lambda_F_H_per_month=1.0 / 7.0, lambda_F_Si_per_ms=0.01)
    assert parse_config(write(tmp_path, format_config(cfg))) == cfg
    assert "watchdog=true\n" in format_config(cfg)
    assert "lambda_F_Si_per_ms" not in format_config(ClusterConfig())


def test_config_from_metadata():
    cfg = ClusterConfig(C=5, E_S=10)
    metadata = {"study": "S1-cdf-by-cluster-size", "config.C": "5", "config.E_S": "10"}
    assert config_from_metadata(metadata) == cfg
    with pytest.raises(ConfigError):
        config_from_metadata({"study": "S1-cdf-by-cluster-size"})
