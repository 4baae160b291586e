"""Spectral mode functions on a uniform angular-frequency grid.

All spectra live on a :class:`FrequencyGrid` in rad/s.  Wavelength inputs are
converted at the boundary with :func:`wavelength_to_omega` and
:func:`bandwidth_to_omega`.  Inner products are Riemann sums weighted by the
grid step, so a normalized mode satisfies ``sum(|a|**2) * step == 1``.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.ndimage import gaussian_filter1d

from .errors import (
    DegenerateMask,
    DegenerateSplit,
    DependentModes,
    IncompatibleGrids,
    InvalidArgument,
    ResolutionError,
)

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


def wavelength_to_omega(wavelength):
    """Vacuum wavelength (m) to angular frequency (rad/s)."""
    return 2.0 * math.pi * C_LIGHT / wavelength


def bandwidth_to_omega(bandwidth, center_wavelength):
    """Convert a (small) wavelength bandwidth in m to an angular-frequency width."""
    return 2.0 * math.pi * C_LIGHT * bandwidth / center_wavelength**2


def omega_to_bandwidth(width, center_wavelength):
    return width * center_wavelength**2 / (2.0 * math.pi * C_LIGHT)


@dataclass(frozen=True)
class FrequencyGrid:
    omega_start: float
    omega_step: float
    n_points: int

    def __post_init__(self):
        if not self.omega_step > 0:
            raise InvalidArgument(f"omega_step must be positive, got {self.omega_step}")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise InvalidArgument(f"n_points must be an integer >= 2, got {self.n_points}")

    @property
    def omega(self) -> np.ndarray:
        return self.omega_start + self.omega_step * np.arange(self.n_points)

    @property
    def omega_stop(self) -> float:
        return self.omega_start + self.omega_step * (self.n_points - 1)

    @property
    def center(self) -> float:
        return self.omega_start + 0.5 * self.omega_step * (self.n_points - 1)

    def contains(self, omega: float) -> bool:
        return self.omega_start <= omega <= self.omega_stop


def make_grid(center_omega: float, span: float, n_points: int = 4097) -> FrequencyGrid:
    """Uniform grid whose first and last points sit at ``center -/+ span/2``."""
    if not span > 0:
        raise InvalidArgument(f"span must be positive, got {span}")
    if int(n_points) != n_points or n_points < 2:
        raise InvalidArgument(f"n_points must be an integer >= 2, got {n_points}")
    step = span / (n_points - 1)
    return FrequencyGrid(center_omega - 0.5 * span, step, int(n_points))


def _check_same_grid(a: FrequencyGrid, b: FrequencyGrid):
    if a != b:
        raise IncompatibleGrids(f"modes live on different grids: {a} vs {b}")


@dataclass(frozen=True, eq=False)
class SpectralMode:
    """Complex spectral amplitude sampled on ``grid``.

    ``transmitted_fraction`` is the energy fraction that survived the last
    mask application (1 for modes that were never masked).
    """

    grid: FrequencyGrid
    amplitude: np.ndarray
    transmitted_fraction: float = 1.0

    def __post_init__(self):
        amp = np.array(self.amplitude, dtype=complex)
        if amp.shape != (self.grid.n_points,):
            raise InvalidArgument(
                f"amplitude has shape {amp.shape}, grid expects ({self.grid.n_points},)"
            )
        amp.setflags(write=False)
        object.__setattr__(self, "amplitude", amp)

    @property
    def omega(self) -> np.ndarray:
        return self.grid.omega

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def norm(self) -> float:
        return math.sqrt(float(np.sum(self.intensity)) * self.grid.omega_step)

    def normalize(self) -> "SpectralMode":
        return normalize(self)


def normalize(mode: SpectralMode) -> SpectralMode:
    n = mode.norm()
    if n == 0.0 or not np.isfinite(n):
        raise DegenerateMask("cannot normalize a mode with zero norm")
    return SpectralMode(mode.grid, mode.amplitude / n, mode.transmitted_fraction)


def inner_product(a: SpectralMode, b: SpectralMode) -> complex:
    """<a|b> = sum(conj(a) * b) * step."""
    _check_same_grid(a.grid, b.grid)
    return complex(np.vdot(a.amplitude, b.amplitude) * a.grid.omega_step)


def gaussian_mode(grid: FrequencyGrid, center: float, fwhm: float, chirp: float = 0.0) -> SpectralMode:
    """Normalized Gaussian whose spectral *intensity* has full width ``fwhm``.

    ``chirp`` is the group-delay dispersion in s^2 and enters as the phase
    ``chirp * (omega - center)**2 / 2``.
    """
    if not fwhm > 0:
        raise InvalidArgument(f"fwhm must be positive, got {fwhm}")
    if not grid.contains(center):
        raise ResolutionError(f"center {center:.6g} rad/s lies outside the grid")
    if fwhm <= 4.0 * grid.omega_step:
        raise ResolutionError(
            f"fwhm {fwhm:.4g} rad/s is not resolved by step {grid.omega_step:.4g} rad/s"
        )
    x = grid.omega - center
    amp = np.exp(-2.0 * math.log(2.0) * x**2 / fwhm**2)
    if chirp:
        amp = amp * np.exp(0.5j * chirp * x**2)
    return normalize(SpectralMode(grid, amp))


def intensity_fwhm(mode: SpectralMode) -> float:
    """Full width at half maximum of |a|^2, linearly interpolated between samples."""
    inten = mode.intensity
    w = mode.omega
    peak = int(np.argmax(inten))
    half = 0.5 * inten[peak]
    above = np.nonzero(inten >= half)[0]
    lo, hi = above[0], above[-1]
    if lo == 0 or hi == len(w) - 1:
        raise ResolutionError("half-maximum points not inside the grid")

    def cross(i0, i1):
        y0, y1 = inten[i0], inten[i1]
        return w[i0] + (half - y0) * (w[i1] - w[i0]) / (y1 - y0)

    return cross(hi, hi + 1) - cross(lo - 1, lo)


@dataclass(frozen=True, eq=False)
class ShaperMask:
    grid: FrequencyGrid
    amplitude_transmission: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        t = np.array(self.amplitude_transmission, dtype=float)
        p = np.array(self.phase, dtype=float)
        n = self.grid.n_points
        if t.shape != (n,) or p.shape != (n,):
            raise InvalidArgument("mask vectors must match the grid length")
        if np.any(t < 0.0) or np.any(t > 1.0):
            raise InvalidArgument("amplitude transmission must lie in [0, 1]")
        t.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "amplitude_transmission", t)
        object.__setattr__(self, "phase", p)

    @classmethod
    def all_pass(cls, grid: FrequencyGrid) -> "ShaperMask":
        return cls(grid, np.ones(grid.n_points), np.zeros(grid.n_points))

    @classmethod
    def phase_step(cls, grid: FrequencyGrid, cut_omega: float, step: float = math.pi) -> "ShaperMask":
        """Flat amplitude, phase ``step`` on samples with omega >= cut."""
        return cls(grid, np.ones(grid.n_points), np.where(grid.omega >= cut_omega, step, 0.0))

    @classmethod
    def chirp(cls, grid: FrequencyGrid, center: float, gdd: float) -> "ShaperMask":
        x = grid.omega - center
        return cls(grid, np.ones(grid.n_points), 0.5 * gdd * x**2)

    @classmethod
    def gaussian_broadening(cls, grid: FrequencyGrid, center: float, fwhm_in: float,
                            fwhm_out: float, clip_fwhms: float = 2.0) -> "ShaperMask":
        """Inverted-Gaussian amplitude mask turning a ``fwhm_in`` Gaussian into ``fwhm_out``.

        The mask rises away from ``center`` and saturates at full transmission
        beyond ``clip_fwhms * fwhm_out``, where the input is already negligible.
        """
        if not fwhm_out > fwhm_in > 0:
            raise InvalidArgument("broadening mask needs fwhm_out > fwhm_in > 0")
        k = 2.0 * math.log(2.0) * (1.0 / fwhm_in**2 - 1.0 / fwhm_out**2)
        x = np.minimum(np.abs(grid.omega - center), clip_fwhms * fwhm_out)
        t = np.exp(k * (x**2 - (clip_fwhms * fwhm_out) ** 2))
        return cls(grid, t, np.zeros(grid.n_points))


def apply_mask(mode: SpectralMode, mask: ShaperMask, resolution: float | None = None) -> SpectralMode:
    """Multiply by ``T * exp(i * phase)`` and renormalize.

    ``resolution`` (rad/s FWHM) optionally blurs the complex transfer function
    to mimic a finite shaper resolution; by default the mask is ideal.
    """
    _check_same_grid(mode.grid, mask.grid)
    transfer = mask.amplitude_transmission * np.exp(1j * mask.phase)
    if resolution:
        sigma = resolution * FWHM_TO_SIGMA / mode.grid.omega_step
        transfer = gaussian_filter1d(transfer.real, sigma, mode="nearest") + 1j * gaussian_filter1d(
            transfer.imag, sigma, mode="nearest"
        )
    out = mode.amplitude * transfer
    energy_in = mode.norm() ** 2
    energy_out = float(np.sum(np.abs(out) ** 2)) * mode.grid.omega_step
    if energy_out <= 1e-300 * max(energy_in, 1e-300) or energy_out == 0.0:
        raise DegenerateMask("mask removes all of the mode's energy")
    fraction = energy_out / energy_in
    return SpectralMode(mode.grid, out / math.sqrt(energy_out), fraction)


def side_energies(mode: SpectralMode, cut_omega: float) -> tuple[float, float]:
    """(energy below cut, energy at or above cut) of |a|^2."""
    hi = mode.grid.omega >= cut_omega
    inten = mode.intensity * mode.grid.omega_step
    return float(np.sum(inten[~hi])), float(np.sum(inten[hi]))


def cut_for_fraction(mode: SpectralMode, low_fraction: float) -> float:
    """Cut frequency (midway between samples) whose low side holds ``low_fraction`` of the energy.

    The boundary whose realized fraction is closest to the target is chosen;
    use :func:`side_energies` to read the realized split.
    """
    if not 0.0 < low_fraction < 1.0:
        raise InvalidArgument(f"low_fraction must be in (0, 1), got {low_fraction}")
    inten = mode.intensity
    cum = np.cumsum(inten) / np.sum(inten)
    # boundary k sits between samples k-1 and k; low side energy = cum[k-1]
    k = int(np.argmin(np.abs(cum[:-1] - low_fraction))) + 1
    w = mode.grid.omega
    return 0.5 * (w[k - 1] + w[k])


def spectral_median(mode: SpectralMode) -> float:
    return cut_for_fraction(mode, 0.5)


def _split_weights(base: SpectralMode, cut_omega: float, hi_weight: float, lo_weight: float) -> np.ndarray:
    if not base.grid.contains(cut_omega):
        raise DegenerateSplit(f"cut {cut_omega:.6g} rad/s lies outside the grid")
    e_lo, e_hi = side_energies(base, cut_omega)
    if e_lo <= 1e-300 or e_hi <= 1e-300:
        raise DegenerateSplit("cut leaves one side of the spectrum without energy")
    hi = base.grid.omega >= cut_omega
    return np.where(hi, hi_weight / math.sqrt(e_hi), lo_weight / math.sqrt(e_lo))


def pi_step_mode(base: SpectralMode, cut_omega: float, t_fraction: float) -> SpectralMode:
    """Reweight ``base`` to carry ``t_fraction`` above the cut and a pi-shifted ``1 - t_fraction`` below.

    The result is orthogonal to :func:`complementary_mode` with the same
    arguments regardless of where the cut sits.
    """
    if not 0.0 < t_fraction < 1.0:
        raise DegenerateSplit(f"t_fraction must lie strictly inside (0, 1), got {t_fraction}")
    w = _split_weights(base, cut_omega, math.sqrt(t_fraction), -math.sqrt(1.0 - t_fraction))
    return normalize(SpectralMode(base.grid, base.amplitude * w))


def complementary_mode(base: SpectralMode, cut_omega: float, t_fraction: float) -> SpectralMode:
    """``base`` reweighted to ``1 - t_fraction`` above the cut and ``t_fraction`` below, no phase step."""
    if not 0.0 < t_fraction < 1.0:
        raise DegenerateSplit(f"t_fraction must lie strictly inside (0, 1), got {t_fraction}")
    w = _split_weights(base, cut_omega, math.sqrt(1.0 - t_fraction), math.sqrt(t_fraction))
    return normalize(SpectralMode(base.grid, base.amplitude * w))


def delay_mode(mode: SpectralMode, path_delay: float, multiplier: float = 1.0) -> SpectralMode:
    """Apply a path delay (m): amplitude * exp(i * omega * multiplier * path_delay / c)."""
    if path_delay == 0.0:
        return mode
    tau = multiplier * path_delay / C_LIGHT
    return SpectralMode(mode.grid, mode.amplitude * np.exp(1j * mode.grid.omega * tau),
                        mode.transmitted_fraction)


def _orthonormalize(modes: Sequence[SpectralMode], tol: float):
    """Modified Gram-Schmidt with one re-orthogonalization pass.

    Returns the orthonormal vectors and, per input, either the residual norm
    or ``None`` when it fell below ``tol``.
    """
    if not modes:
        return [], []
    grid = modes[0].grid
    for m in modes[1:]:
        _check_same_grid(grid, m.grid)
    dw = grid.omega_step
    basis: list[np.ndarray] = []
    residuals = []
    for m in modes:
        v = np.array(m.amplitude, dtype=complex)
        scale = math.sqrt(float(np.vdot(v, v).real) * dw)
        for _ in range(2):
            for q in basis:
                v = v - q * (np.vdot(q, v) * dw)
        r = math.sqrt(float(np.vdot(v, v).real) * dw)
        if scale == 0.0 or r < tol * max(scale, 1.0):
            residuals.append(None)
            continue
        basis.append(v / r)
        residuals.append(r)
    return [SpectralMode(grid, v) for v in basis], residuals


def gram_schmidt(modes: Sequence[SpectralMode], tol: float = 1e-10) -> list[SpectralMode]:
    """Orthonormalize ``modes`` in order; the first output is parallel to the first input."""
    out, residuals = _orthonormalize(modes, tol)
    for i, r in enumerate(residuals):
        if r is None:
            raise DependentModes(f"mode {i} is linearly dependent on the preceding modes")
    return out


def orthonormal_span(modes: Sequence[SpectralMode], tol: float = 1e-9):
    """Like :func:`gram_schmidt` but skips dependent inputs.

    Returns ``(basis, kept)`` where ``kept[i]`` is the index of the input that
    produced ``basis[i]``.
    """
    out, residuals = _orthonormalize(modes, tol)
    kept = [i for i, r in enumerate(residuals) if r is not None]
    return out, kept


@dataclass(frozen=True, eq=False)
class OverlapMatrix:
    entries: np.ndarray

    def max_off_diagonal(self) -> float:
        k = self.entries.shape[0]
        if k < 2:
            return 0.0
        off = self.entries[~np.eye(k, dtype=bool)]
        return float(np.max(np.abs(off)))

    def deviation_from_identity(self) -> float:
        return float(np.max(np.abs(self.entries - np.eye(self.entries.shape[0]))))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.entries - self.entries.conj().T)) <= tol)


def overlap_matrix(modes: Sequence[SpectralMode]) -> OverlapMatrix:
    if not modes:
        return OverlapMatrix(np.zeros((0, 0), dtype=complex))
    grid = modes[0].grid
    for m in modes[1:]:
        _check_same_grid(grid, m.grid)
    a = np.stack([m.amplitude for m in modes])
    entries = (a.conj() @ a.T) * grid.omega_step
    # enforce exact Hermitian symmetry of the computed matrix
    entries = 0.5 * (entries + entries.conj().T)
    return OverlapMatrix(entries)


def write_mode_csv(mode: SpectralMode, path) -> None:
    """Write omega_rad_per_s, re_amplitude, im_amplitude with 12 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega_rad_per_s", "re_amplitude", "im_amplitude"])
        for om, a in zip(mode.omega, mode.amplitude):
            w.writerow([f"{om:.12g}", f"{a.real:.12g}", f"{a.imag:.12g}"])


def read_mode_csv(path) -> SpectralMode:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    om = data[:, 0]
    if len(om) < 2:
        raise InvalidArgument("mode CSV needs at least two rows")
    step = (om[-1] - om[0]) / (len(om) - 1)
    # 12 significant digits leave about 1e-11 relative rounding on each frequency
    if np.max(np.abs(np.diff(om) - step)) > 1e-6 * abs(step) + 2e-11 * np.max(np.abs(om)):
        warnings.warn("mode CSV frequencies are not uniformly spaced; treating them as uniform")
    return SpectralMode(FrequencyGrid(float(om[0]), float(step), len(om)), data[:, 1] + 1j * data[:, 2])
