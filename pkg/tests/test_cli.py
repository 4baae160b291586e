import json
import subprocess
import sys

import pytest

from freqhom.cli import main

SMALL = """\
[grid]
center_wavelength_nm = 830
signal_points = 2048
signal_span_nm = 117
idler_points = 64
idler_span_nm = 117

[phase_matching]
kind = separable
signal_fwhm_nm = 11.7
idler_fwhm_nm = 11.7

[coherent]
alpha = 0.05

[gain]
gamma = 0.02

[scan]
delays_um = -150:150:15
baseline_delay_um = 1500
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return str(p)


def run(*argv):
    return main([str(a) for a in argv])


def test_hom_scan_outputs(cfg_file, tmp_path, capsys):
    out = tmp_path / "hom"
    assert run("hom-scan", cfg_file, "--out", out) == 0
    assert "visibility" in capsys.readouterr().out
    metrics = json.loads((out / "metrics.json").read_text())
    for key in ("visibility", "enhancement_ratio", "baseline", "extremum", "classical_limit",
                "beyond_classical_limit", "config_hash", "gamma", "alpha", "purity", "schmidt_number"):
        assert key in metrics
    assert metrics["visibility"] > 0.8 and metrics["beyond_classical_limit"] is True
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["schema_version"] == 1 and manifest["command"] == "hom-scan"
    assert manifest["config_hash"] == metrics["config_hash"]
    assert set(manifest["outputs"]) == {"scan.csv", "metrics.json", "plot.gp", "manifest.json"}
    lines = (out / "scan.csv").read_text().splitlines()
    assert lines[0] == "delay_um,coincidence,herald,normalized_coincidence"
    assert len(lines) == 1 + 21
    assert "plot 'scan.csv'" in (out / "plot.gp").read_text()


def test_csv_is_reproducible_across_runs_and_threads(cfg_file, tmp_path, monkeypatch):
    outs = []
    for k, threads in enumerate((1, 1, 3)):
        out = tmp_path / f"r{k}"
        assert run("hom-scan", cfg_file, "--out", out, "--threads", threads) == 0
        outs.append(out)
    monkeypatch.setenv("QSIM_THREADS", "2")
    assert run("hom-scan", cfg_file, "--out", tmp_path / "env") == 0
    outs.append(tmp_path / "env")
    ref = (outs[0] / "scan.csv").read_bytes()
    assert all((o / "scan.csv").read_bytes() == ref for o in outs[1:])
    m = [json.loads((o / "metrics.json").read_text()) for o in outs]
    assert all(x == m[0] for x in m[1:])


def test_induced_reports_ratio(cfg_file, tmp_path):
    assert run("induced", cfg_file, "--out", tmp_path) == 0
    m = json.loads((tmp_path / "metrics.json").read_text())
    assert 1.5 < m["enhancement_ratio"] < 2.05


def test_mix_half_matches_hom_zero_delay(cfg_file, tmp_path):
    assert run("mix-scan", cfg_file, "--out", tmp_path / "mix", "--ratios", "0.5") == 0
    assert run("hom-scan", cfg_file, "--out", tmp_path / "hom", "--delays=-150:150:150") == 0
    mix = json.loads((tmp_path / "mix" / "metrics.json").read_text())
    hom = json.loads((tmp_path / "hom" / "metrics.json").read_text())
    assert abs(mix["visibility"][0] - hom["visibility"]) < 1e-9
    header = (tmp_path / "mix" / "scan.csv").read_text().splitlines()[0]
    assert header.endswith("baseline,visibility,t_effective")


@pytest.mark.parametrize("argv", [
    ["hom-scan", "{cfg}", "--delays", ""],
    ["hom-scan", "{cfg}", "--delays", "10:-10:5"],
    ["mix-scan", "{cfg}", "--ratios", "0"],
    ["mix-scan", "{cfg}", "--ratios", "0.3,1"],
    ["mix-scan", "{cfg}", "--ratios", ""],
    ["hom-scan", "{cfg}", "--threads", "0"],
    ["hom-scan", "/nonexistent.cfg"],
    ["nosuchcommand", "{cfg}"],
    ["hom-scan"],
])
def test_usage_errors_exit_2(cfg_file, tmp_path, argv, capsys):
    argv = [a.replace("{cfg}", cfg_file) for a in argv]
    try:
        rc = run(*argv, "--out", tmp_path) if len(argv) > 1 and argv[0] != "nosuchcommand" else run(*argv)
    except SystemExit as exc:
        rc = exc.code
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_bad_config_exit_2_with_line(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    text = SMALL.replace("[gain]", "[gain]\nfoo = 1")
    p.write_text(text)
    assert run("schmidt", p, "--out", tmp_path) == 2
    line = text.splitlines().index("foo = 1") + 1
    assert f"line {line}, column 1" in capsys.readouterr().err


def test_bad_env_threads(cfg_file, tmp_path, monkeypatch):
    monkeypatch.setenv("QSIM_THREADS", "many")
    assert run("hom-scan", cfg_file, "--out", tmp_path) == 2


def test_zero_gain_is_numeric_failure(tmp_path, capsys):
    p = tmp_path / "g0.cfg"
    p.write_text(SMALL.replace("gamma = 0.02", "gamma = 0"))
    assert run("hom-scan", p, "--out", tmp_path) == 3
    assert "numeric failure" in capsys.readouterr().err


def test_plateau_missing_is_numeric_failure(cfg_file, tmp_path):
    assert run("hom-scan", cfg_file, "--out", tmp_path, "--delays=-10:10:5") == 3


def test_schmidt_paper_preset(tmp_path):
    assert run("schmidt", "paper", "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "schmidt.json").read_text())
    assert round(rep["purity"], 2) == 0.91
    assert round(rep["schmidt_number"], 2) == 1.10
    for name in ("jsi.csv", "signal_mode0.csv", "idler_mode0.csv", "manifest.json"):
        assert (tmp_path / name).exists()


def test_orthogonality(cfg_file, tmp_path):
    assert run("orthogonality", cfg_file, "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "orthogonality.json").read_text())
    assert rep["max_off_diagonal"] < 1e-10
    assert rep["modes"][:2] == ["heralded", "coherent"]
    assert "coherent_delay40um" in rep["heralded_overlaps"]
    rows = (tmp_path / "overlaps.csv").read_text().splitlines()
    assert len(rows) == 1 + len(rep["modes"])


def test_verify_exit_codes(capsys):
    assert run("verify") == 0
    assert "16/16 checks passed" in capsys.readouterr().out
    assert run("verify", "--perturb-unitary", "1e-3") == 1
    assert "FAIL" in capsys.readouterr().out


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "freqhom", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("freqhom ")
    r = subprocess.run([sys.executable, "-m", "freqhom"], capture_output=True, text=True)
    assert r.returncode == 2
