#!/usr/bin/env python3
"""Run every scan behind the figures and collect the outputs in one directory.

Each subdirectory holds scan.csv, metrics.json, manifest.json and a gnuplot
script (``gnuplot -p plot.gp`` inside it draws the curve).
"""
import argparse
import json
import sys
from pathlib import Path

from freqhom.cli import main as cli

RUNS = [
    ("hom_dip_paper", ["hom-scan", "paper"]),
    ("hom_dip_ideal", ["hom-scan", "ideal"]),
    ("induced_paper", ["induced", "induced"]),
    ("induced_ideal", ["induced", "ideal"]),
    ("mixing_paper", ["mix-scan", "paper"]),
    ("mixing_ideal", ["mix-scan", "ideal"]),
    ("schmidt_paper", ["schmidt", "paper"]),
    ("orthogonality_paper", ["orthogonality", "paper"]),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="figures", help="output directory")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    root = Path(args.out)
    summary = {}
    for name, argv in RUNS:
        out = root / name
        print(f"== {name}")
        rc = cli(argv + ["--out", str(out), "--threads", str(args.threads)])
        if rc != 0:
            print(f"{name} failed with exit code {rc}", file=sys.stderr)
            return rc
        for fn in ("metrics.json", "schmidt.json", "orthogonality.json"):
            if (out / fn).exists():
                summary[name] = json.loads((out / fn).read_text())
    (root / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"wrote {root / 'summary.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
