import pytest

from app.config import DEFAULTS, RunConfig
from service.errors import ConfigError


def test_defaults_are_valid():
    config = RunConfig.load(None)
    assert config.values == DEFAULTS
    assert len(config.scan_grid()) == DEFAULTS["scan.points"]
    assert config.tube_array().counts == (51, 51)


def test_header_round_trip():
    config = RunConfig.from_text("scan.points = 11\ntrap.partial_waves = s,p\nmc.N = 10,20\n")
    header = [f"# {line}" for line in ["toolkit_version = 1.0.0", "command = fisher-scan"] + config.to_lines()]
    restored = RunConfig.from_header(header + ["B_gauss,T"])
    assert restored == config
    assert restored["trap.partial_waves"] == ("s", "p")
    assert restored["mc.N"] == (10, 20)


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError) as excinfo:
        RunConfig.from_text("# комментарий\nscan.points = 5\nfoo.bar = 1\n")
    assert excinfo.value.key == "foo.bar"
    assert excinfo.value.line == 3


def test_empty_grid_is_rejected():
    with pytest.raises(ConfigError) as excinfo:
        RunConfig.from_text("\nscan.points = 0\n")
    assert excinfo.value.key == "scan.points"
    assert excinfo.value.line == 2


def test_malformed_value_is_rejected():
    with pytest.raises(ConfigError) as excinfo:
        RunConfig.from_text("scan.points = many\n")
    assert excinfo.value.key == "scan.points"


@pytest.mark.parametrize("text, key", [("resonance.Delta = 0\n", "resonance.Delta"), ("trap.d = -1\n", "trap.d")])
def test_model_invariants_are_checked(text, key):
    with pytest.raises(ConfigError) as excinfo:
        RunConfig.from_text(text)
    assert excinfo.value.key == key


def test_unsupported_partial_wave_is_a_config_error():
    with pytest.raises(ConfigError):
        RunConfig.from_text("trap.partial_waves = s,f\n")


def test_d_wave_requires_coefficients():
    with pytest.raises(ConfigError):
        RunConfig.from_text("trap.partial_waves = s,d\n")
    config = RunConfig.from_text("trap.partial_waves = s,d\ntrap.c2 = 0.3\ntrap.c3 = -0.2\ntrap.c4 = 0.5\n")
    assert config.d_wave() is not None


@pytest.mark.parametrize("text, expected", [("yes", True), ("off", False), ("TRUE", True)])
def test_boolean_values(text, expected):
    assert RunConfig.from_text(f"output.gnuplot = {text}\n")["output.gnuplot"] is expected


def test_optional_values():
    assert RunConfig.from_text("scan.h0 = none\n")["scan.h0"] is None
    assert RunConfig.from_text("scan.h0 = 1e-6\n")["scan.h0"] == 1e-6
    with pytest.raises(ConfigError):
        RunConfig.from_text("scan.h0 = -1\n")


def test_overrides_skip_missing_values():
    config = RunConfig.load(None).with_overrides({"mc.seed": 7, "output.dir": None})
    assert config["mc.seed"] == 7
    assert config["output.dir"] == DEFAULTS["output.dir"]
    with pytest.raises(ConfigError):
        config.with_overrides({"mc.unknown": 1})


def test_trap_width_in_nanometres():
    config = RunConfig.from_text("trap.d = 20\narray.abar_nm = 5.1\n")
    assert config.trap_width_nm() == pytest.approx(102.0)


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(str(tmp_path / "absent.conf"))
