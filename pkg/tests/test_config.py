
import numpy as np
import pytest

from freqhom.config import (
    build_experiment,
    config_hash,
    dump_config,
    load_config,
    parse_config,
    parse_delay_range,
    parse_float_list,
    preset_path,
    with_values,
)
from freqhom.errors import ConfigError
from freqhom.jsa import purity, write_jsa_csv
from freqhom.config import build_jsa_from_config

SMALL = """\
[grid]
center_wavelength_nm = 830
signal_points = 512
signal_span_nm = 93.6
idler_points = 64
idler_span_nm = 117

[phase_matching]
kind = separable
signal_fwhm_nm = 11.7
idler_fwhm_nm = 11.7

[coherent]
alpha = 0.05

[gain]
gamma = 0.01
"""


def test_defaults_filled():
    cfg = parse_config(SMALL)
    assert cfg["coherent"]["shape"] == "matched"
    assert cfg["scan"]["baseline_delay_um"] == 3000.0
    assert cfg["detection"]["detector_type"] == "threshold"
    assert cfg["scan"]["ratios"] == (0.4, 0.3, 0.2, 0.1)


def test_unknown_key_reports_position():
    text = SMALL.replace("alpha = 0.05", "alpha = 0.05\n  \nbogus = 3")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    line = text.splitlines().index("bogus = 3") + 1
    assert info.value.line == line and info.value.column == 1
    assert "bogus" in str(info.value) and f"line {line}" in str(info.value)


def test_missing_unit_suffix_hint():
    text = SMALL.replace("signal_fwhm_nm = 11.7", "signal_fwhm = 11.7")
    with pytest.raises(ConfigError, match="unit suffix.*signal_fwhm_nm"):
        parse_config(text)


def test_unknown_section():
    with pytest.raises(ConfigError, match=r"unknown section \[extra\]"):
        parse_config(SMALL + "\n[extra]\nx = 1\n")


def test_missing_required_key():
    with pytest.raises(ConfigError, match="gain.gamma"):
        parse_config(SMALL.replace("gamma = 0.01", "target_g2 = 0.04"))


def test_bad_value_points_at_value():
    text = SMALL.replace("gamma = 0.01", "gamma = lots")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.column == len("gamma = ") + 1


@pytest.mark.parametrize("edit, match", [
    (("alpha = 0.05", "alpha = 0.05\nt_fraction = 1.0"), "t_fraction"),
    (("kind = separable", "kind = sinc"), "pump"),
    (("[gain]", "[detection]\nherald_efficiency = 0\n[gain]"), "herald_efficiency"),
    (("kind = separable", "kind = tabulated"), "table_path"),
])
def test_consistency_checks(edit, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(SMALL.replace(*edit))


def test_hash_ignores_order_and_comments():
    blocks = SMALL.strip().split("\n\n")
    shuffled = "\n\n".join(reversed(blocks)) + "\n# trailing comment\n"
    assert config_hash(parse_config(SMALL)) == config_hash(parse_config(shuffled))
    # explicit defaults hash like omitted ones
    explicit = SMALL + "\n[scan]\nbaseline_delay_um = 3000\ndelays_um = -150:150:5\n"
    assert config_hash(parse_config(explicit)) == config_hash(parse_config(SMALL))
    assert config_hash(parse_config(SMALL.replace("0.05", "0.06"))) != config_hash(parse_config(SMALL))


def test_dump_round_trip():
    cfg = parse_config(SMALL)
    again = parse_config(dump_config(cfg))
    assert again.values == cfg.values
    assert config_hash(again) == config_hash(cfg)


def test_delay_range_parsing():
    assert np.allclose(parse_delay_range("-10:10:5"), [-10, -5, 0, 5, 10])
    assert len(parse_delay_range("0:1:0.1")) == 11
    for bad in ("5:-5:1", "0:0:1", "0:1", "0:1:0"):
        with pytest.raises(ValueError):
            parse_delay_range(bad)
    assert parse_float_list(" 0.1, 0.2 ,") == (0.1, 0.2)
    with pytest.raises(ValueError):
        parse_float_list(" , ")


def test_build_experiment_small():
    exp = build_experiment(parse_config(SMALL))
    assert exp.spec.alpha == 0.05 and exp.spec.gamma == 0.01
    assert not exp.gamma_calibrated and not exp.alpha_balanced
    assert purity(exp.spec.schmidt) == pytest.approx(1.0, abs=1e-9)
    assert exp.spec.baseline_delay == pytest.approx(3e-3)


def test_balanced_and_calibrated():
    cfg = parse_config(SMALL.replace("alpha = 0.05", "alpha = balanced").replace("gamma = 0.01", "gamma = calibrate"))
    exp = build_experiment(cfg)
    assert exp.gamma_calibrated and exp.alpha_balanced
    assert exp.heralded_g2 == pytest.approx(0.043, abs=1e-9)
    assert exp.spec.alpha == pytest.approx(exp.spec.gamma, rel=0.05)


def test_tabulated_csv_round_trip(tmp_path):
    cfg = parse_config(SMALL)
    jsa = build_jsa_from_config(cfg)
    write_jsa_csv(jsa, tmp_path / "jsa.csv", part="abs")
    text = SMALL.replace("kind = separable", "kind = tabulated\ntable_path = jsa.csv")
    (tmp_path / "t.cfg").write_text(text)
    tab = load_config(tmp_path / "t.cfg")
    exp = build_experiment(tab)
    assert purity(exp.spec.schmidt) == pytest.approx(1.0, abs=1e-6)
    # the hash follows the table contents, not its location
    (tmp_path / "sub").mkdir()
    (tmp_path / "sub" / "jsa.csv").write_bytes((tmp_path / "jsa.csv").read_bytes())
    (tmp_path / "sub" / "t.cfg").write_text(text)
    assert config_hash(load_config(tmp_path / "sub" / "t.cfg")) == config_hash(tab)


def test_with_values_override():
    cfg = with_values(parse_config(SMALL), coherent={"t_fraction": 0.3})
    assert cfg["coherent"]["t_fraction"] == 0.3
    assert parse_config(SMALL)["coherent"]["t_fraction"] == 0.5


@pytest.mark.parametrize("name", ["ideal", "paper", "induced"])
def test_presets_parse(name):
    cfg = load_config(preset_path(name))
    assert cfg["grid"]["center_wavelength_nm"] == 830
    assert cfg["detection"]["detector_type"] == "threshold"


def test_induced_preset_differs_only_in_pi_shift():
    a = load_config(preset_path("paper")).values
    b = load_config(preset_path("induced")).values
    diffs = [(s, k) for s in a for k in a[s] if a[s][k] != b[s][k]]
    assert diffs == [("coherent", "pi_shift")]


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset_path("nope")
    with pytest.raises(ConfigError):
        load_config("/nonexistent/x.cfg")
