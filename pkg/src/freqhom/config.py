"""Experiment configuration files.

Configs are INI-style documents (read with :mod:`configparser`) with the
sections ``[grid] [pump] [phase_matching] [coherent] [gain] [detection]
[scan]``.  Every dimensioned key carries its unit in the name (``_nm``,
``_fs``, ``_fs2``, ``_um``, ``_deg``); a key written without its suffix is
rejected like any other unknown key.  Example::

    [grid]
    center_wavelength_nm = 830
    signal_points = 512
    signal_span_nm = 140

    [phase_matching]
    kind = separable
    signal_fwhm_nm = 11.7
    ...
"""
from __future__ import annotations

import configparser
import hashlib
import json
import math
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .interference import (
    CoherentRecipe,
    DetectionModel,
    ExperimentSpec,
    balanced_alpha,
    calibrate_gamma,
    heralded_g2,
)
from .jsa import (
    PhaseMatchingModel,
    PumpModel,
    SchmidtDecomposition,
    build_jsa,
    read_jsi_text,
    read_matrix_csv,
    schmidt_decompose,
    separable_jsa,
)
from .spectral import (
    FrequencyGrid,
    bandwidth_to_omega,
    gaussian_mode,
    make_grid,
    wavelength_to_omega,
)

FS = 1e-15
FS2 = 1e-30
UM = 1e-6

_REQUIRED = object()
UNIT_SUFFIXES = ("_nm", "_fs", "_fs2", "_um", "_deg")

# section -> key -> (kind, default).  kinds: int, float, bool, str, choice:<a|b>,
# gain ("calibrate" or float), alpha ("balanced" or float), floats (comma list),
# range ("start:stop:step").
SCHEMA = {
    "grid": {
        "center_wavelength_nm": ("float", _REQUIRED),
        "signal_points": ("int", _REQUIRED),
        "signal_span_nm": ("float", _REQUIRED),
        "idler_points": ("int", 0),
        "idler_span_nm": ("float", 0.0),
    },
    "pump": {
        "center_wavelength_nm": ("float", 0.0),
        "duration_fs": ("float", 0.0),
        "chirp_fs2": ("float", 0.0),
    },
    "phase_matching": {
        "kind": ("choice:gaussian-approx|sinc|tabulated|separable", _REQUIRED),
        "width_nm": ("float", 0.0),
        "tilt_deg": ("float", 45.0),
        "signal_fwhm_nm": ("float", 0.0),
        "idler_fwhm_nm": ("float", 0.0),
        "table_path": ("str", ""),
        "schmidt_modes": ("int", 0),
    },
    "coherent": {
        "shape": ("choice:matched|gaussian", "matched"),
        "fwhm_nm": ("float", 0.0),
        "center_wavelength_nm": ("float", 0.0),
        "chirp_fs2": ("float", 0.0),
        "pi_shift": ("bool", True),
        "t_fraction": ("float", 0.5),
        "delay_multiplier": ("float", 1.0),
        "distinguishable": ("bool", False),
        "shaper_resolution_nm": ("float", 0.0),
        "alpha": ("alpha", _REQUIRED),
        "alpha_balance": ("float", 1.0),
    },
    "gain": {
        "gamma": ("gain", _REQUIRED),
        "target_g2": ("float", 0.043),
        "max_total_photons": ("int", 4),
        "coherent_order": ("int", 2),
        "cross_schmidt_second_order": ("bool", True),
    },
    "detection": {
        "herald_efficiency": ("float", 1.0),
        "long_arm_efficiency": ("float", 1.0),
        "short_arm_efficiency": ("float", 1.0),
        "detector_type": ("choice:threshold", "threshold"),
    },
    "scan": {
        "delays_um": ("range", "-150:150:5"),
        "ratios": ("floats", "0.4,0.3,0.2,0.1"),
        "baseline_delay_um": ("float", 3000.0),
        "plateau_tol": ("float", 1e-3),
        "orthogonality_delays_um": ("floats", "40"),
    },
}

_SECTION_RE = re.compile(r"^\s*\[([^\]]*)\]")
_KEY_RE = re.compile(r"^(\s*)([^=:\s][^=:]*?)\s*[=:]\s*(.*)$")


@dataclass(frozen=True)
class Location:
    line: int
    key_column: int
    value_column: int


def _locate(text: str) -> dict:
    """Map (section, key) -> Location by a line scan (configparser keeps no positions)."""
    where = {}
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip()[0] in "#;":
            continue
        m = _SECTION_RE.match(raw)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = Location(n, raw.index("[") + 1, 0)
            continue
        m = _KEY_RE.match(raw)
        if m and section is not None and not raw[0].isspace():
            key = m.group(2).strip().lower()
            where[(section, key)] = Location(n, len(m.group(1)) + 1, raw.index(m.group(3)) + 1 if m.group(3) else len(raw) + 1)
    return where


def parse_delay_range(text: str) -> np.ndarray:
    """``"start:stop:step"`` in micrometres, stop included when it falls on the lattice."""
    parts = [p.strip() for p in str(text).split(":")]
    if len(parts) != 3:
        raise ValueError(f"delay range must be start:stop:step, got {text!r}")
    start, stop, step = (float(p) for p in parts)
    if not step > 0:
        raise ValueError("delay step must be positive")
    if stop < start:
        raise ValueError(f"empty delay range {text!r}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    axis = start + step * np.arange(n)
    if len(axis) < 2:
        raise ValueError(f"delay range {text!r} has fewer than two points")
    return axis


def parse_float_list(text: str) -> tuple:
    items = [p.strip() for p in str(text).split(",") if p.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(float(p) for p in items)


def _convert(kind: str, raw: str):
    raw = raw.strip()
    if kind == "int":
        return int(raw)
    if kind == "float":
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError("value must be finite")
        return v
    if kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind == "str":
        return raw
    if kind.startswith("choice:"):
        options = kind.split(":", 1)[1].split("|")
        if raw not in options:
            raise ValueError(f"expected one of {options}, got {raw!r}")
        return raw
    if kind == "gain":
        return "calibrate" if raw == "calibrate" else float(raw)
    if kind == "alpha":
        return "balanced" if raw == "balanced" else float(raw)
    if kind == "floats":
        return parse_float_list(raw)
    if kind == "range":
        parse_delay_range(raw)
        start, stop, step = (float(x) for x in raw.split(":"))
        return f"{start!r}:{stop!r}:{step!r}"
    raise AssertionError(kind)


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed config: ``values[section][key]`` with every schema key filled in."""

    values: dict
    base_dir: str = "."
    source: str = "<string>"

    def __getitem__(self, section):
        return self.values[section]

    def canonical(self) -> dict:
        out = {s: dict(sorted(v.items())) for s, v in sorted(self.values.items())}
        table = out["phase_matching"]["table_path"]
        if table:
            # hash the table contents, not where it happens to live
            out["phase_matching"]["table_path"] = _file_digest(self.resolve(table))
        return out

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p


def _file_digest(path: Path) -> str:
    try:
        return "sha256:" + hashlib.sha256(path.read_bytes()).hexdigest()
    except OSError as exc:
        raise ConfigError(f"cannot read table {path}: {exc}") from exc


def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 of the canonical JSON form; independent of key and section order."""
    blob = json.dumps(cfg.canonical(), sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def parse_config(text: str, base_dir: str = ".", source: str = "<string>") -> ExperimentConfig:
    where = _locate(text)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno) from exc
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno) from exc
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("content before the first [section] header", exc.lineno, 1) from exc
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"cannot parse {source}", line, 1) from exc

    for section in parser.sections():
        if section not in SCHEMA:
            loc = where.get((section, None))
            raise ConfigError(f"unknown section [{section}]", loc and loc.line, loc and loc.key_column)

    values = {}
    for section, keys in SCHEMA.items():
        given = dict(parser.items(section)) if parser.has_section(section) else {}
        for key in given:
            if key not in keys:
                loc = where.get((section, key))
                hint = ""
                stems = [k for k in keys if k.startswith(key + "_") and k.endswith(UNIT_SUFFIXES)]
                if stems:
                    hint = f"; dimensioned values need a unit suffix, e.g. {stems[0]}"
                raise ConfigError(f"unknown key {key!r} in [{section}]{hint}",
                                  loc and loc.line, loc and loc.key_column)
        out = {}
        for key, (kind, default) in keys.items():
            if key in given:
                try:
                    out[key] = _convert(kind, given[key])
                except ValueError as exc:
                    loc = where.get((section, key))
                    raise ConfigError(f"bad value for {section}.{key}: {exc}",
                                      loc and loc.line, loc and loc.value_column) from None
            elif default is _REQUIRED:
                loc = where.get((section, None))
                raise ConfigError(f"missing required key {section}.{key}", loc and loc.line)
            else:
                out[key] = _convert(kind, default) if isinstance(default, str) else default
        values[section] = out
    _check_consistency(values, where)
    return ExperimentConfig(values, str(base_dir), source)


def _check_consistency(v: dict, where: dict) -> None:
    def fail(section, key, msg):
        loc = where.get((section, key)) or where.get((section, None))
        raise ConfigError(msg, loc and loc.line, loc and loc.key_column)

    g, pm, pump = v["grid"], v["phase_matching"], v["pump"]
    if g["signal_points"] < 8:
        fail("grid", "signal_points", "signal_points must be at least 8")
    if pm["kind"] in ("gaussian-approx", "sinc", "separable", "tabulated"):
        if g["idler_points"] < 2 or not g["idler_span_nm"] > 0:
            fail("grid", "idler_points", "idler_points and idler_span_nm are required")
    if pm["kind"] in ("gaussian-approx", "sinc"):
        if not (pump["center_wavelength_nm"] > 0 and pump["duration_fs"] > 0):
            fail("pump", None, "analytic phase matching needs pump center_wavelength_nm and duration_fs")
        if not pm["width_nm"] > 0:
            fail("phase_matching", "width_nm", "width_nm must be positive")
    if pm["kind"] == "separable" and not (pm["signal_fwhm_nm"] > 0 and pm["idler_fwhm_nm"] > 0):
        fail("phase_matching", "kind", "separable JSA needs signal_fwhm_nm and idler_fwhm_nm")
    if pm["kind"] == "tabulated" and not pm["table_path"]:
        fail("phase_matching", "table_path", "tabulated JSA needs table_path")
    c = v["coherent"]
    if c["shape"] == "gaussian" and not c["fwhm_nm"] > 0:
        fail("coherent", "fwhm_nm", "gaussian coherent shape needs fwhm_nm")
    if not 0.0 < c["t_fraction"] < 1.0:
        fail("coherent", "t_fraction", "t_fraction must lie strictly inside (0, 1)")
    if not c["alpha_balance"] > 0:
        fail("coherent", "alpha_balance", "alpha_balance must be positive")
    for key in ("herald_efficiency", "long_arm_efficiency", "short_arm_efficiency"):
        if not 0.0 < v["detection"][key] <= 1.0:
            fail("detection", key, f"{key} must lie in (0, 1]")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path.parent), str(path))


def with_values(cfg: ExperimentConfig, **sections) -> ExperimentConfig:
    """Copy of ``cfg`` with ``section={key: value}`` overrides (no re-validation)."""
    values = {s: dict(v) for s, v in cfg.values.items()}
    for s, upd in sections.items():
        values[s].update(upd)
    return replace(cfg, values=values)


# --- building the physics objects --------------------------------------------


def signal_center(cfg: ExperimentConfig) -> float:
    return wavelength_to_omega(cfg["grid"]["center_wavelength_nm"] * 1e-9)


def build_grids(cfg: ExperimentConfig) -> tuple[FrequencyGrid, FrequencyGrid]:
    g = cfg["grid"]
    lam = g["center_wavelength_nm"] * 1e-9
    w0 = wavelength_to_omega(lam)
    sg = make_grid(w0, bandwidth_to_omega(g["signal_span_nm"] * 1e-9, lam), g["signal_points"])
    ig = make_grid(w0, bandwidth_to_omega(g["idler_span_nm"] * 1e-9, lam), g["idler_points"])
    return sg, ig


def build_jsa_from_config(cfg: ExperimentConfig):
    pm, g = cfg["phase_matching"], cfg["grid"]
    lam = g["center_wavelength_nm"] * 1e-9
    w0 = wavelength_to_omega(lam)
    kind = pm["kind"]
    if kind == "tabulated" and cfg.resolve(pm["table_path"]).suffix.lower() == ".csv":
        sg, ig, table = read_matrix_csv(cfg.resolve(pm["table_path"]))
    else:
        sg, ig = build_grids(cfg)
    if kind == "separable":
        sig = gaussian_mode(sg, w0, bandwidth_to_omega(pm["signal_fwhm_nm"] * 1e-9, lam))
        idl = gaussian_mode(ig, w0, bandwidth_to_omega(pm["idler_fwhm_nm"] * 1e-9, lam))
        return separable_jsa(sig, idl)
    if kind == "tabulated":
        path = cfg.resolve(pm["table_path"])
        if path.suffix.lower() != ".csv":
            try:
                table = read_jsi_text(path, sg, ig)
            except OSError as exc:
                raise ConfigError(f"cannot read table {path}: {exc}") from exc
        model = PhaseMatchingModel("tabulated", table=table)
        return build_jsa(PumpModel(2 * w0, 1.0), model, sg, ig)
    pump = pump_from_config(cfg)
    model = PhaseMatchingModel(kind, bandwidth_to_omega(pm["width_nm"] * 1e-9, lam),
                               math.radians(pm["tilt_deg"]), signal_center=w0, idler_center=w0)
    return build_jsa(pump, model, sg, ig)


def pump_from_config(cfg: ExperimentConfig) -> PumpModel:
    p = cfg["pump"]
    wp = wavelength_to_omega(p["center_wavelength_nm"] * 1e-9)
    base = PumpModel.transform_limited(wp, p["duration_fs"] * FS)
    return replace(base, chirp=p["chirp_fs2"] * FS2)


def schmidt_from_config(cfg: ExperimentConfig) -> SchmidtDecomposition:
    n = cfg["phase_matching"]["schmidt_modes"] or None
    return schmidt_decompose(build_jsa_from_config(cfg), n_kept=n)


def coherent_recipe(cfg: ExperimentConfig) -> CoherentRecipe:
    c = cfg["coherent"]
    lam = cfg["grid"]["center_wavelength_nm"] * 1e-9
    center = wavelength_to_omega(c["center_wavelength_nm"] * 1e-9) if c["center_wavelength_nm"] else None
    fwhm = bandwidth_to_omega(c["fwhm_nm"] * 1e-9, lam) if c["fwhm_nm"] else None
    res = bandwidth_to_omega(c["shaper_resolution_nm"] * 1e-9, lam) if c["shaper_resolution_nm"] else None
    return CoherentRecipe(
        shape=c["shape"], center_omega=center, fwhm=fwhm, chirp=c["chirp_fs2"] * FS2,
        pi_shift=c["pi_shift"], t_fraction=c["t_fraction"], delay_multiplier=c["delay_multiplier"],
        distinguishable=c["distinguishable"], shaper_resolution=res,
    )


@dataclass(frozen=True, eq=False)
class Experiment:
    """A ready-to-run spec plus provenance of the calibrated numbers."""

    config: ExperimentConfig
    spec: ExperimentSpec
    gamma_calibrated: bool
    alpha_balanced: bool
    heralded_g2: float | None = None
    notes: dict = field(default_factory=dict)


def build_experiment(cfg: ExperimentConfig, schmidt: SchmidtDecomposition | None = None) -> Experiment:
    """Turn a config into an :class:`ExperimentSpec`, calibrating gamma/alpha when asked."""
    d = schmidt if schmidt is not None else schmidt_from_config(cfg)
    gain, det, sc = cfg["gain"], cfg["detection"], cfg["scan"]
    spec = ExperimentSpec(
        schmidt=d,
        alpha=0.0,
        gamma=0.0 if gain["gamma"] == "calibrate" else gain["gamma"],
        coherent=coherent_recipe(cfg),
        detection=DetectionModel(det["herald_efficiency"], det["long_arm_efficiency"],
                                 det["short_arm_efficiency"], det["detector_type"]),
        max_total_photons=gain["max_total_photons"],
        coherent_order=gain["coherent_order"],
        cross_schmidt_second_order=gain["cross_schmidt_second_order"],
        baseline_delay=sc["baseline_delay_um"] * UM,
        plateau_tol=sc["plateau_tol"],
    )
    calibrated = gain["gamma"] == "calibrate"
    if calibrated:
        spec = replace(spec, gamma=calibrate_gamma(spec, gain["target_g2"]))
    balanced = cfg["coherent"]["alpha"] == "balanced"
    if balanced:
        alpha = balanced_alpha(spec) * math.sqrt(cfg["coherent"]["alpha_balance"])
    else:
        alpha = cfg["coherent"]["alpha"]
    spec = replace(spec, alpha=alpha)
    g2 = heralded_g2(spec) if spec.gamma != 0 else None
    return Experiment(cfg, spec, calibrated, balanced, g2)


def dump_config(cfg: ExperimentConfig) -> str:
    """Render back to INI text (sections and keys sorted)."""
    lines = []
    for section, vals in sorted(cfg.values.items()):
        lines.append(f"[{section}]")
        for key, val in sorted(vals.items()):
            if isinstance(val, bool):
                val = "true" if val else "false"
            elif isinstance(val, tuple):
                val = ",".join(repr(x) for x in val)
            lines.append(f"{key} = {val}")
        lines.append("")
    return "\n".join(lines)


def preset_path(name: str) -> Path:
    """Path of a bundled preset (``ideal``, ``paper`` or ``induced``)."""
    p = Path(__file__).parent / "presets" / (name if name.endswith(".cfg") else name + ".cfg")
    if not p.exists():
        raise ConfigError(f"no bundled preset named {name!r}")
    return p


def asdict_spec(spec: ExperimentSpec) -> dict:
    """Small JSON-friendly summary of a spec (the Schmidt data is summarized, not dumped)."""
    return {
        "alpha": complex(spec.alpha).real if complex(spec.alpha).imag == 0 else str(spec.alpha),
        "gamma": spec.gamma,
        "schmidt_modes": int(spec.schmidt.n_kept),
        "coherent": {k: v for k, v in asdict(spec.coherent).items()},
        "detection": asdict(spec.detection),
        "max_total_photons": spec.max_total_photons,
    }
