"""Joint spectral amplitudes of SPDC and their Schmidt decomposition.

The JSA is the product of a pump envelope f(ws + wi) and a phase-matching
function theta(ws, wi).  Matrices are stored with signal frequency along
rows and idler frequency along columns.  Before the SVD the amplitude is
multiplied by sqrt(dws * dwi), which makes the singular vectors (divided by
sqrt of their grid step) orthonormal under :func:`freqhom.spectral.inner_product`.
"""
from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import EmptyJSA, InvalidArgument, InvalidBasis, NumericError
from .spectral import (
    FrequencyGrid,
    SpectralMode,
    _check_same_grid,
    inner_product,
    overlap_matrix,
)

LN2 = math.log(2.0)
# sinc(z) = sin(pi z)/(pi z); |sinc|^2 drops to 1/2 at z = 0.442946
_SINC_HALF = 0.4429462
CLIP_WARN_FRACTION = 1e-6


@dataclass(frozen=True)
class PumpModel:
    center_omega: float
    fwhm: float
    chirp: float = 0.0

    def __post_init__(self):
        if not self.fwhm > 0:
            raise InvalidArgument("pump fwhm must be positive")

    @classmethod
    def transform_limited(cls, center_omega: float, duration: float) -> "PumpModel":
        """Gaussian pulse with intensity FWHM ``duration`` (s): dw * dt = 4 ln 2."""
        return cls(center_omega, 4.0 * LN2 / duration, 0.0)

    def envelope(self, detuning: np.ndarray) -> np.ndarray:
        amp = np.exp(-2.0 * LN2 * detuning**2 / self.fwhm**2)
        if self.chirp:
            amp = amp * np.exp(0.5j * self.chirp * detuning**2)
        return amp


class PhaseMatchingKind(str, enum.Enum):
    GAUSSIAN = "gaussian-approx"
    SINC = "sinc"
    TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class PhaseMatchingModel:
    """Phase-matching function.

    For analytic kinds the function depends on the coordinate across the
    phase-matching ridge, ``u = -sin(tilt) * xs + cos(tilt) * xi``, where
    ``xs, xi`` are detunings from ``signal_center``/``idler_center`` (default:
    half the pump frequency each).  ``width`` is the intensity FWHM along u.
    Tabulated tables hold |JSI| by default (``table_is_intensity``); an
    optional ``phase_table`` supplies the JSA phase in radians.
    """

    kind: PhaseMatchingKind = PhaseMatchingKind.GAUSSIAN
    width: float = 0.0
    tilt_angle: float = math.pi / 4
    table: np.ndarray | None = None
    phase_table: np.ndarray | None = None
    table_is_intensity: bool = True
    signal_center: float | None = None
    idler_center: float | None = None

    def __post_init__(self):
        kind = PhaseMatchingKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is PhaseMatchingKind.TABULATED:
            if self.table is None:
                raise InvalidArgument("tabulated phase matching requires a table")
        elif not self.width > 0:
            raise InvalidArgument("phase-matching width must be positive")

    def evaluate(self, xs: np.ndarray, xi: np.ndarray) -> np.ndarray:
        u = -math.sin(self.tilt_angle) * xs + math.cos(self.tilt_angle) * xi
        if self.kind is PhaseMatchingKind.GAUSSIAN:
            return np.exp(-2.0 * LN2 * u**2 / self.width**2)
        return np.sinc(2.0 * _SINC_HALF * u / self.width)


@dataclass(frozen=True, eq=False)
class JointSpectralAmplitude:
    signal_grid: FrequencyGrid
    idler_grid: FrequencyGrid
    amplitude: np.ndarray
    clipped_fraction: float = 0.0

    def __post_init__(self):
        a = np.array(self.amplitude, dtype=complex)
        if a.shape != (self.signal_grid.n_points, self.idler_grid.n_points):
            raise InvalidArgument("JSA matrix shape does not match its grids")
        a.setflags(write=False)
        object.__setattr__(self, "amplitude", a)

    @property
    def weight(self) -> float:
        return math.sqrt(self.signal_grid.omega_step * self.idler_grid.omega_step)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitude)) * self.weight

    def normalize(self) -> "JointSpectralAmplitude":
        n = self.norm()
        if n == 0.0 or not np.isfinite(n):
            raise EmptyJSA("joint spectral amplitude vanishes everywhere")
        return JointSpectralAmplitude(self.signal_grid, self.idler_grid, self.amplitude / n,
                                      self.clipped_fraction)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2


def _centers(pump: PumpModel, pm: PhaseMatchingModel):
    ws0 = pm.signal_center if pm.signal_center is not None else 0.5 * pump.center_omega
    wi0 = pm.idler_center if pm.idler_center is not None else 0.5 * pump.center_omega
    return ws0, wi0


def _analytic(pump, pm, ws, wi):
    ws0, wi0 = _centers(pump, pm)
    xs = (ws - ws0)[:, None]
    xi = (wi - wi0)[None, :]
    return pump.envelope(xs + xi + ws0 + wi0 - pump.center_omega) * pm.evaluate(xs, xi)


def _clipped_fraction(pump, pm, signal_grid, idler_grid, n=257):
    """Energy share of the analytic JSA lying outside the grid window.

    Estimated on a window three times wider than the grid, sampled at ``n``
    points per axis.
    """
    def wide(g):
        half = 1.5 * (g.omega_stop - g.omega_start)
        return np.linspace(g.center - half, g.center + half, n)

    ws, wi = wide(signal_grid), wide(idler_grid)
    inten = np.abs(_analytic(pump, pm, ws, wi)) ** 2
    total = inten.sum()
    if total == 0.0:
        return 0.0
    inside_s = (ws >= signal_grid.omega_start) & (ws <= signal_grid.omega_stop)
    inside_i = (wi >= idler_grid.omega_start) & (wi <= idler_grid.omega_stop)
    inside = inten[np.ix_(inside_s, inside_i)].sum()
    return float(max(0.0, 1.0 - inside / total))


def build_jsa(pump: PumpModel, pm: PhaseMatchingModel, signal_grid: FrequencyGrid,
              idler_grid: FrequencyGrid) -> JointSpectralAmplitude:
    """Sample theta(ws, wi) * f(ws + wi) on the grids and normalize."""
    if pm.kind is PhaseMatchingKind.TABULATED:
        table = np.asarray(pm.table)
        if table.shape != (signal_grid.n_points, idler_grid.n_points):
            raise InvalidArgument(
                f"table shape {table.shape} does not match grids "
                f"({signal_grid.n_points}, {idler_grid.n_points})"
            )
        if pm.table_is_intensity:
            if np.any(np.asarray(table).real < 0):
                raise InvalidArgument("JSI table has negative entries")
            amp = np.sqrt(np.abs(table)).astype(complex)
        else:
            amp = table.astype(complex)
        if pm.phase_table is not None:
            amp = amp * np.exp(1j * np.asarray(pm.phase_table, dtype=float))
        clipped = 0.0
    else:
        amp = _analytic(pump, pm, signal_grid.omega, idler_grid.omega)
        clipped = _clipped_fraction(pump, pm, signal_grid, idler_grid)
        if clipped > CLIP_WARN_FRACTION:
            warnings.warn(f"grid window clips {clipped:.2e} of the JSA energy", RuntimeWarning)
    jsa = JointSpectralAmplitude(signal_grid, idler_grid, amp, clipped)
    if not np.any(np.abs(jsa.amplitude) > 0):
        raise EmptyJSA("pump and phase-matching supports do not overlap on the grids")
    return jsa.normalize()


def separable_jsa(signal: SpectralMode, idler: SpectralMode) -> JointSpectralAmplitude:
    """Rank-one JSA from two marginal modes."""
    return JointSpectralAmplitude(
        signal.grid, idler.grid, np.outer(signal.amplitude, idler.amplitude)
    ).normalize()


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    """Schmidt coefficients (all of them, descending) and the kept mode pairs."""

    coefficients: np.ndarray
    signal_modes: tuple
    idler_modes: tuple
    n_kept: int
    truncation_remainder: float

    def reconstruct(self) -> np.ndarray:
        s = np.stack([m.amplitude for m in self.signal_modes], axis=1)
        i = np.stack([m.amplitude for m in self.idler_modes], axis=0)
        return (s * self.coefficients[: self.n_kept]) @ i

    @property
    def kept_coefficients(self) -> np.ndarray:
        return self.coefficients[: self.n_kept]


def _select_count(r: np.ndarray, n_kept, threshold, cumulative, max_modes) -> int:
    if n_kept is None and threshold is None:
        cum = np.cumsum(r**2) / np.sum(r**2)
        count = int(np.searchsorted(cum, cumulative) + 1)
        return max(1, min(count, max_modes, len(r)))
    if n_kept is not None and n_kept < 1:
        raise InvalidArgument("n_kept must be >= 1")
    count = n_kept or 1
    if threshold is not None:
        count = max(count, int(np.sum(r >= threshold)))
    return min(count, len(r))


def schmidt_decompose(jsa: JointSpectralAmplitude, n_kept: int | None = None,
                      threshold: float | None = None, cumulative: float = 0.9999,
                      max_modes: int = 8) -> SchmidtDecomposition:
    """SVD of the grid-weighted JSA.

    With ``n_kept`` and ``threshold`` both unset, modes are kept until their
    cumulative weight reaches ``cumulative`` (capped at ``max_modes``);
    otherwise ``max(n_kept, #{r_n >= threshold})`` modes are kept.
    """
    w = jsa.weight
    m = jsa.amplitude * w
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        finite = bool(np.all(np.isfinite(m)))
        raise NumericError(f"SVD did not converge (finite entries: {finite}, "
                           f"shape {m.shape}): {exc}") from exc
    total = math.sqrt(float(np.sum(s**2)))
    if total == 0.0:
        raise EmptyJSA("JSA has zero norm")
    s = s / total
    k = _select_count(s, n_kept, threshold, cumulative, max_modes)
    ds = math.sqrt(jsa.signal_grid.omega_step)
    di = math.sqrt(jsa.idler_grid.omega_step)
    sig, idl = [], []
    for n in range(k):
        us = u[:, n]
        # fix the gauge: largest signal sample real and positive
        j = int(np.argmax(np.abs(us)))
        ph = us[j] / abs(us[j])
        sig.append(SpectralMode(jsa.signal_grid, us / ph / ds))
        idl.append(SpectralMode(jsa.idler_grid, vh[n, :] * ph / di))
    remainder = math.sqrt(float(np.sum(s[k:] ** 2)))
    return SchmidtDecomposition(s, tuple(sig), tuple(idl), k, remainder)


def purity(d: SchmidtDecomposition) -> float:
    p = d.coefficients**2
    return float(np.sum(p**2) / np.sum(p) ** 2)


def schmidt_number(d: SchmidtDecomposition) -> float:
    return 1.0 / purity(d)


@dataclass(frozen=True, eq=False)
class ModeProjection:
    coefficients: np.ndarray
    remainder_coefficient: float
    remainder_mode: SpectralMode | None

    def total_weight(self) -> float:
        return float(np.sum(np.abs(self.coefficients) ** 2) + self.remainder_coefficient**2)


def project_onto(mode: SpectralMode, basis: Sequence[SpectralMode], tol: float = 1e-8,
                 remainder_floor: float = 1e-12) -> ModeProjection:
    """Expand ``mode`` over an orthonormal ``basis`` plus one normalized remainder."""
    if basis:
        dev = overlap_matrix(list(basis)).deviation_from_identity()
        if dev > tol:
            raise InvalidBasis(f"basis is not orthonormal (deviation {dev:.2e})")
        for b in basis:
            _check_same_grid(mode.grid, b.grid)
    c = np.array([inner_product(b, mode) for b in basis], dtype=complex)
    resid = np.array(mode.amplitude, dtype=complex)
    for cj, b in zip(c, basis):
        resid = resid - cj * b.amplitude
    ce = math.sqrt(float(np.vdot(resid, resid).real) * mode.grid.omega_step)
    if ce <= remainder_floor:
        return ModeProjection(c, 0.0, None)
    return ModeProjection(c, ce, SpectralMode(mode.grid, resid / ce))


def project_mode(d: SchmidtDecomposition, n: int, basis: Sequence[SpectralMode],
                 tol: float = 1e-8) -> ModeProjection:
    """Coefficients of the n-th signal Schmidt mode over ``basis`` plus its remainder."""
    if not 0 <= n < d.n_kept:
        raise InvalidArgument(f"Schmidt index {n} outside kept range [0, {d.n_kept})")
    return project_onto(d.signal_modes[n], basis, tol)


def gaussian_quadratic_form(pump: PumpModel, pm: PhaseMatchingModel):
    """(p, q, r) with JSA = exp(-(p xs^2 + q xi^2 + 2 r xs xi)) for an unchirped Gaussian model."""
    a = 2.0 * LN2 / pump.fwhm**2
    b = 2.0 * LN2 / pm.width**2
    sn, cs = math.sin(pm.tilt_angle), math.cos(pm.tilt_angle)
    return a + b * sn**2, a + b * cs**2, a - b * sn * cs


def calibrate_gaussian_phase_matching(pump: PumpModel, target_purity: float,
                                      signal_fwhm: float, anticorrelated: bool = True):
    """Width and tilt of a Gaussian phase-matching ridge giving ``target_purity``.

    ``signal_fwhm`` fixes the intensity FWHM of the leading signal Schmidt
    mode.  Returns ``(width, tilt_angle)``.  For the quadratic form
    (p, q, r) the purity is sqrt(1 - r^2/(p q)) and the leading mode is
    exp(-purity * p * xs^2).
    """
    if not 0.0 < target_purity <= 1.0:
        raise InvalidArgument("target purity must be in (0, 1]")
    a = 2.0 * LN2 / pump.fwhm**2
    p = 2.0 * LN2 / (target_purity * signal_fwhm**2)
    if p <= a:
        raise InvalidArgument("signal bandwidth too wide for this pump bandwidth")

    def terms(theta):
        b = (p - a) / math.sin(theta) ** 2
        q = a + b * math.cos(theta) ** 2
        r = a - b * math.sin(theta) * math.cos(theta)
        return b, q, r

    def f(theta):
        _, q, r = terms(theta)
        return math.sqrt(max(0.0, 1.0 - r * r / (p * q))) - target_purity

    thetas = np.linspace(1e-3, math.pi / 2 - 1e-6, 2001)
    vals = np.array([f(t) for t in thetas])
    roots = []
    for k in np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]:
        roots.append(brentq(f, thetas[k], thetas[k + 1], xtol=1e-14))
    if not roots:
        raise InvalidArgument("no phase-matching tilt reaches the requested purity")
    pick = [t for t in roots if (terms(t)[2] >= 0) == anticorrelated] or roots
    theta = pick[-1] if anticorrelated else pick[0]
    b, _, _ = terms(theta)
    return math.sqrt(2.0 * LN2 / b), theta


def write_jsa_csv(jsa: JointSpectralAmplitude, path, part: str = "abs") -> None:
    """Matrix CSV: first row idler frequencies, first column signal frequencies.

    ``part`` selects ``abs``, ``re``, ``im`` or ``intensity``.
    """
    pick = {
        "abs": np.abs(jsa.amplitude),
        "re": jsa.amplitude.real,
        "im": jsa.amplitude.imag,
        "intensity": jsa.intensity,
    }[part]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega_s\\omega_i"] + [f"{x:.12g}" for x in jsa.idler_grid.omega])
        for ws, row in zip(jsa.signal_grid.omega, pick):
            w.writerow([f"{ws:.12g}"] + [f"{x:.12g}" for x in row])


def read_matrix_csv(path):
    """Read a matrix CSV written by :func:`write_jsa_csv`; returns (signal_grid, idler_grid, matrix)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    wi = np.array([float(x) for x in rows[0][1:]])
    ws = np.array([float(r[0]) for r in rows[1:]])
    mat = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    return _grid_from(ws), _grid_from(wi), mat


def read_jsi_text(path, signal_grid: FrequencyGrid, idler_grid: FrequencyGrid) -> np.ndarray:
    """Plain whitespace-separated JSI matrix (signal rows, idler columns)."""
    mat = np.loadtxt(path, ndmin=2)
    if mat.shape != (signal_grid.n_points, idler_grid.n_points):
        raise InvalidArgument(f"JSI text matrix has shape {mat.shape}, grids need "
                              f"({signal_grid.n_points}, {idler_grid.n_points})")
    return mat


def _grid_from(om: np.ndarray) -> FrequencyGrid:
    if len(om) < 2:
        raise InvalidArgument("need at least two grid frequencies")
    return FrequencyGrid(float(om[0]), float((om[-1] - om[0]) / (len(om) - 1)), len(om))
