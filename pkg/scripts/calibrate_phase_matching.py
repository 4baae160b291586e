#!/usr/bin/env python3
"""Fit the Gaussian phase-matching width and ridge tilt for a target source.

Given a transform-limited pump, find the phase-matching width (nm) and
tilt (deg) so the JSA has the requested purity and its leading signal
Schmidt mode has the requested intensity FWHM.  The result is checked by
a numerical Schmidt decomposition and printed in config-file form.
"""
import argparse
import math

from freqhom.jsa import (
    PhaseMatchingModel,
    PumpModel,
    build_jsa,
    calibrate_gaussian_phase_matching,
    purity,
    schmidt_decompose,
    schmidt_number,
)
from freqhom.spectral import (
    bandwidth_to_omega,
    intensity_fwhm,
    make_grid,
    omega_to_bandwidth,
    wavelength_to_omega,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pump-nm", type=float, default=415.0, help="pump center wavelength")
    ap.add_argument("--pump-fs", type=float, default=60.0, help="pump intensity FWHM duration")
    ap.add_argument("--signal-nm", type=float, default=830.0, help="degenerate signal wavelength")
    ap.add_argument("--purity", type=float, default=1 / 1.1, help="target purity")
    ap.add_argument("--fwhm-nm", type=float, default=11.7, help="target FWHM of the leading signal mode")
    ap.add_argument("--points", type=int, default=1024, help="grid points for the numerical check")
    args = ap.parse_args()

    lam = args.signal_nm * 1e-9
    w0 = wavelength_to_omega(lam)
    fwhm = bandwidth_to_omega(args.fwhm_nm * 1e-9, lam)
    pump = PumpModel.transform_limited(wavelength_to_omega(args.pump_nm * 1e-9), args.pump_fs * 1e-15)
    width, tilt = calibrate_gaussian_phase_matching(pump, args.purity, fwhm)

    pm = PhaseMatchingModel("gaussian-approx", width, tilt, signal_center=w0, idler_center=w0)
    grid_s = make_grid(w0, 12 * fwhm, args.points)
    grid_i = make_grid(w0, 20 * fwhm, max(256, args.points // 4))
    d = schmidt_decompose(build_jsa(pump, pm, grid_s, grid_i))
    mode_nm = omega_to_bandwidth(intensity_fwhm(d.signal_modes[0]), lam) * 1e9

    print("[phase_matching]")
    print("kind = gaussian-approx")
    print(f"width_nm = {omega_to_bandwidth(width, lam) * 1e9:.9f}")
    print(f"tilt_deg = {math.degrees(tilt):.9f}")
    print()
    print(f"# check: purity {purity(d):.6f}, K {schmidt_number(d):.6f}, "
          f"leading mode FWHM {mode_nm:.4f} nm, {d.n_kept} modes kept")


if __name__ == "__main__":
    main()
