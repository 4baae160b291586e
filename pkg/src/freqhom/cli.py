"""Command-line driver: ``freqhom <command> CONFIG [--out DIR]``.

CONFIG is a path to a ``.cfg`` file or the name of a bundled preset
(``ideal``, ``paper``, ``induced``).  Exit codes: 0 success, 1 failed
verification, 2 usage or configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ExperimentConfig,
    build_experiment,
    build_jsa_from_config,
    config_hash,
    load_config,
    parse_delay_range,
    parse_float_list,
    preset_path,
)
from .errors import ConfigError, DegenerateSplit, FreqHomError, InvalidArgument
from .interference import (
    classical_limit,
    coherent_mode,
    hom_scan,
    induced_emission_scan,
    mix_scan,
)
from .jsa import purity, schmidt_decompose, schmidt_number, write_jsa_csv
from .spectral import overlap_matrix, write_mode_csv

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
SCHEMA_VERSION = 1


class UsageError(Exception):
    pass


def _num(x):
    """JSON-safe number rounded to 12 significant digits."""
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.12g}")


def _load(name: str) -> ExperimentConfig:
    p = Path(name)
    if not p.exists() and not p.suffix:
        p = preset_path(name)
    return load_config(p)


def _threads(arg) -> int:
    if arg is not None:
        n = arg
    else:
        env = os.environ.get("QSIM_THREADS")
        try:
            n = int(env) if env else 1
        except ValueError:
            raise UsageError(f"QSIM_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise UsageError("thread count must be at least 1")
    return n


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.12g}" for v in row])


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _manifest(out: Path, cfg: ExperimentConfig, command: str, outputs) -> None:
    _write_json(out / "manifest.json", {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config_source": cfg.source,
        "config_hash": config_hash(cfg),
        "tool_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "outputs": sorted(outputs),
    })


def _gnuplot(path: Path, title: str, xlabel: str, ycol: int, ylabel: str) -> None:
    path.write_text(
        "# gnuplot script; run with: gnuplot -p " + path.name + "\n"
        "set datafile separator ','\n"
        f"set title '{title}'\n"
        f"set xlabel '{xlabel}'\n"
        f"set ylabel '{ylabel}'\n"
        "set key off\n"
        f"plot 'scan.csv' using 1:{ycol} skip 1 with linespoints pt 7\n"
    )


def _experiment_metrics(exp) -> dict:
    d = exp.spec.schmidt
    return {
        "gamma": _num(exp.spec.gamma),
        "alpha": _num(abs(exp.spec.alpha)),
        "heralded_g2": _num(exp.heralded_g2),
        "purity": _num(purity(d)),
        "schmidt_number": _num(schmidt_number(d)),
        "schmidt_modes_kept": int(d.n_kept),
        "gamma_calibrated": exp.gamma_calibrated,
        "alpha_balanced": exp.alpha_balanced,
    }


def _delay_command(args, cfg, induced: bool) -> list:
    axis = parse_delay_range(cfg["scan"]["delays_um"] if args.delays is None else args.delays)
    exp = build_experiment(cfg)
    threads = _threads(args.threads)
    scan = (induced_emission_scan if induced else hom_scan)(exp.spec, axis, threads=threads)
    out = Path(args.out)
    _write_csv(out / "scan.csv", ["delay_um", "coincidence", "herald", "normalized_coincidence"],
               zip(scan.axis, scan.coincidence_probability, scan.herald_probability,
                   scan.normalized_coincidence))
    m = scan.metrics
    metrics = {
        "visibility": _num(m["visibility"]),
        "enhancement_ratio": _num(m["enhancement_ratio"]),
        "baseline": _num(m["baseline"]),
        "extremum": _num(m["extremum"]),
        "classical_limit": _num(m["classical_limit"]),
        "beyond_classical_limit": bool(m["beyond_classical_limit"]),
        "plateau_points": int(np.sum(scan.extra["plateau"])),
        "config_hash": config_hash(cfg),
    }
    metrics.update(_experiment_metrics(exp))
    _write_json(out / "metrics.json", metrics)
    title = "Induced emission" if induced else "Frequency-bin HOM dip"
    _gnuplot(out / "plot.gp", title, "delay (um)", 4, "normalized three-fold coincidence")
    key = "enhancement_ratio" if induced else "visibility"
    print(f"{key} = {metrics[key]:.6g}  (classical limit {classical_limit():g})")
    return ["scan.csv", "metrics.json", "plot.gp"]


def cmd_hom_scan(args, cfg):
    return _delay_command(args, cfg, induced=False)


def cmd_induced(args, cfg):
    return _delay_command(args, cfg, induced=True)


def cmd_mix_scan(args, cfg):
    try:
        ratios = cfg["scan"]["ratios"] if args.ratios is None else parse_float_list(args.ratios)
    except ValueError as exc:
        raise UsageError(f"bad --ratios: {exc}") from None
    for t in ratios:
        if not 0.0 < t < 1.0:
            raise UsageError(f"split ratio {t} must lie strictly inside (0, 1)")
    ratios = sorted(ratios)
    exp = build_experiment(cfg)
    scan = mix_scan(exp.spec, ratios, threads=_threads(args.threads))
    base = scan.extra["baseline"]
    vis = scan.extra["visibility"]
    out = Path(args.out)
    _write_csv(out / "scan.csv",
               ["t_fraction", "coincidence", "herald", "normalized_coincidence", "baseline", "visibility",
                "t_effective"],
               zip(scan.axis, scan.coincidence_probability, scan.herald_probability,
                   scan.coincidence_probability / base, base, vis, scan.extra["t_effective"]))
    metrics = {
        "visibility": [_num(v) for v in vis],
        "t_fraction": [_num(t) for t in scan.axis],
        "enhancement_ratio": None,
        "classical_limit": _num(classical_limit()),
        "config_hash": config_hash(cfg),
    }
    metrics.update(_experiment_metrics(exp))
    _write_json(out / "metrics.json", metrics)
    _gnuplot(out / "plot.gp", "Programmable two-mode mixing", "short-bin share t", 6, "visibility")
    for t, v in zip(scan.axis, vis):
        print(f"t = {t:.3g}: visibility = {v:.6g}")
    return ["scan.csv", "metrics.json", "plot.gp"]


def cmd_schmidt(args, cfg):
    n = cfg["phase_matching"]["schmidt_modes"] or None
    jsa = build_jsa_from_config(cfg)
    d = schmidt_decompose(jsa, n_kept=n)
    out = Path(args.out)
    r = d.coefficients
    report = {
        "coefficients": [_num(x) for x in r[: max(d.n_kept, 8)]],
        "n_kept": int(d.n_kept),
        "purity": _num(purity(d)),
        "schmidt_number": _num(schmidt_number(d)),
        "truncation_remainder": _num(d.truncation_remainder),
        "clipped_fraction": _num(jsa.clipped_fraction),
        "config_hash": config_hash(cfg),
    }
    _write_json(out / "schmidt.json", report)
    write_jsa_csv(jsa, out / "jsi.csv", "intensity")
    write_mode_csv(d.signal_modes[0], out / "signal_mode0.csv")
    write_mode_csv(d.idler_modes[0], out / "idler_mode0.csv")
    print(f"purity = {report['purity']:.6g}  K = {report['schmidt_number']:.6g}  modes kept = {d.n_kept}")
    return ["schmidt.json", "jsi.csv", "signal_mode0.csv", "idler_mode0.csv"]


def cmd_orthogonality(args, cfg):
    exp = build_experiment(cfg)
    spec = exp.spec
    names, modes = ["heralded"], [spec.schmidt.signal_modes[0]]
    names.append("coherent")
    modes.append(coherent_mode(spec, 0.0))
    for t in cfg["scan"]["ratios"]:
        if not 0.0 < t < 1.0:
            continue
        s = replace(spec, coherent=replace(spec.coherent, t_fraction=t))
        names.append(f"coherent_t{t:g}")
        modes.append(coherent_mode(s, 0.0))
    n_zero = len(names)
    for d_um in cfg["scan"]["orthogonality_delays_um"]:
        names.append(f"coherent_delay{d_um:g}um")
        modes.append(coherent_mode(spec, d_um * 1e-6))
    ov = overlap_matrix(modes)
    mags = np.abs(ov.entries)
    out = Path(args.out)
    with open(out / "overlaps.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode"] + names)
        for nm, row in zip(names, mags):
            w.writerow([nm] + [f"{v:.12g}" for v in row])
    heralded_row = mags[0]
    report = {
        "modes": names,
        "max_off_diagonal": _num(max(heralded_row[1:n_zero], default=0.0)),
        "heralded_overlaps": {nm: _num(v) for nm, v in zip(names[1:], heralded_row[1:])},
        "config_hash": config_hash(cfg),
    }
    _write_json(out / "orthogonality.json", report)
    for nm, v in report["heralded_overlaps"].items():
        print(f"|<heralded|{nm}>| = {v:.3e}")
    return ["overlaps.csv", "orthogonality.json"]


def cmd_verify(args):
    from .verify import format_table, run_checks

    results = run_checks(perturb_unitary=args.perturb_unitary)
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY_FAILED


COMMANDS = {
    "hom-scan": (cmd_hom_scan, "HOM dip versus delay"),
    "induced": (cmd_induced, "induced-emission scan (pi step removed)"),
    "mix-scan": (cmd_mix_scan, "zero-delay visibility versus split ratio"),
    "schmidt": (cmd_schmidt, "Schmidt decomposition report of the configured JSA"),
    "orthogonality": (cmd_orthogonality, "overlaps of coherent-mode recipes with the heralded mode"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="freqhom", description="Frequency-bin HOM interference simulator.")
    p.add_argument("--version", action="version", version=f"freqhom {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_fn, helptext) in COMMANDS.items():
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config", help="config file or bundled preset name")
        sp.add_argument("--out", default=".", help="output directory (created if missing)")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads for scan points (default: $QSIM_THREADS or 1)")
        if name in ("hom-scan", "induced"):
            sp.add_argument("--delays", help='delay range "start:stop:step" in micrometres')
        if name == "mix-scan":
            sp.add_argument("--ratios", help='comma-separated split ratios, e.g. "0.4,0.3,0.2,0.1"')
    vp = sub.add_parser("verify", help="run the invariant suite")
    vp.add_argument("--perturb-unitary", type=float, default=0.0, help=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args)
        cfg = _load(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        fn = COMMANDS[args.command][0]
        outputs = fn(args, cfg)
        _manifest(out, cfg, args.command, outputs + ["manifest.json"])
        return EXIT_OK
    except (UsageError, ConfigError, DegenerateSplit) as exc:
        print(f"freqhom: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        if isinstance(exc, FreqHomError) and not isinstance(exc, InvalidArgument):
            print(f"freqhom: numeric failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"freqhom: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FreqHomError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"freqhom: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
