"""Heralded three-fold coincidences between frequency bins.

One experiment point: a weak coherent state on the shaped mode g1 passes a
crystal that also emits SPDC pairs, one two-mode squeezer per Schmidt mode.
Signal-side modes are expanded over an orthonormal set {g1, g2, e1, ...},
rewritten in a basis adapted to the long/short wavelength bins, and measured
with threshold detectors (herald on all idler modes, one detector per bin).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import CannotNormalize, DegenerateSplit, InvalidArgument, ResolutionError, UndefinedG2
from .fock import (
    BIN_LONG,
    BIN_SHORT,
    ModeRegistry,
    MultimodeFockState,
    SqueezerSpec,
    apply_squeezer,
    build_bin_unitary,
    change_basis,
    weak_coherent,
)
from .jsa import SchmidtDecomposition, project_onto
from .spectral import (
    C_LIGHT,
    SpectralMode,
    ShaperMask,
    apply_mask,
    cut_for_fraction,
    delay_mode,
    gaussian_mode,
    inner_product,
    orthonormal_span,
    pi_step_mode,
    side_energies,
)

CLASSICAL_LIMIT = 0.5


@dataclass(frozen=True)
class DetectionModel:
    herald_efficiency: float = 1.0
    long_arm_efficiency: float = 1.0
    short_arm_efficiency: float = 1.0
    detector_type: str = "threshold"

    def __post_init__(self):
        for name in ("herald_efficiency", "long_arm_efficiency", "short_arm_efficiency"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise InvalidArgument(f"{name} must lie in (0, 1], got {v}")
        if self.detector_type != "threshold":
            raise InvalidArgument(f"unsupported detector type {self.detector_type!r}")

    def scaled(self, factor: float) -> "DetectionModel":
        return replace(self, herald_efficiency=self.herald_efficiency * factor,
                       long_arm_efficiency=self.long_arm_efficiency * factor,
                       short_arm_efficiency=self.short_arm_efficiency * factor)


@dataclass(frozen=True)
class CoherentRecipe:
    """How the coherent mode g1 is shaped.

    ``shape="matched"`` starts from the heralded photon's own mode;
    ``"gaussian"`` from a Gaussian of ``fwhm`` (rad/s) at ``center_omega``.
    ``t_fraction`` is the share g1 puts into the short-wavelength bin; the cut
    is placed where the heralded mode holds the same share in the long bin.
    ``distinguishable`` puts the coherent light in an orthogonal polarization.
    """

    shape: str = "matched"
    center_omega: float | None = None
    fwhm: float | None = None
    chirp: float = 0.0
    pi_shift: bool = True
    t_fraction: float = 0.5
    delay_multiplier: float = 1.0
    distinguishable: bool = False
    shaper_resolution: float | None = None

    def __post_init__(self):
        if self.shape not in ("matched", "gaussian"):
            raise InvalidArgument(f"unknown coherent shape {self.shape!r}")
        if self.shape == "gaussian" and not (self.fwhm and self.fwhm > 0):
            raise InvalidArgument("gaussian coherent shape needs a positive fwhm")


@dataclass(frozen=True)
class ExperimentSpec:
    schmidt: SchmidtDecomposition
    alpha: complex
    gamma: float
    coherent: CoherentRecipe = field(default_factory=CoherentRecipe)
    detection: DetectionModel = field(default_factory=DetectionModel)
    cut_omega: float | None = None
    max_total_photons: int = 4
    coherent_order: int = 2
    cross_schmidt_second_order: bool = True
    baseline_delay: float = 3e-3
    plateau_tol: float = 1e-3


class PointResult(NamedTuple):
    coincidence: float
    herald: float


@dataclass(frozen=True, eq=False)
class PreparedPoint:
    """Everything computed for one delay, kept for diagnostics and tests."""

    state: MultimodeFockState          # final state in the bin basis
    generated_state: MultimodeFockState
    basis_labels: tuple
    basis_modes: tuple
    idler_labels: tuple
    bin_of: dict
    coherent_mode: SpectralMode
    cut_omega: float
    t_effective: float


def _heralded_mode(spec: ExperimentSpec) -> SpectralMode:
    return spec.schmidt.signal_modes[0]


def resolve_cut(spec: ExperimentSpec) -> tuple[float, float]:
    """(cut frequency, realized long-bin share of the heralded mode)."""
    psi0 = _heralded_mode(spec)
    t = spec.coherent.t_fraction
    if not 0.0 < t < 1.0:
        raise DegenerateSplit(f"t_fraction must lie strictly inside (0, 1), got {t}")
    cut = spec.cut_omega if spec.cut_omega is not None else cut_for_fraction(psi0, t)
    e_lo, e_hi = side_energies(psi0, cut)
    if e_lo <= 1e-14 or e_hi <= 1e-14:
        raise DegenerateSplit("cut leaves one bin of the heralded mode empty")
    return cut, e_lo / (e_lo + e_hi)


def coherent_mode(spec: ExperimentSpec, delay: float = 0.0) -> SpectralMode:
    """Shaped (and delayed) coherent mode g1."""
    rec = spec.coherent
    psi0 = _heralded_mode(spec)
    cut, t_eff = resolve_cut(spec)
    if rec.shape == "matched":
        base = psi0
        if rec.chirp:
            center = rec.center_omega if rec.center_omega is not None else psi0.grid.center
            base = apply_mask(base, ShaperMask.chirp(base.grid, center, rec.chirp), rec.shaper_resolution)
    else:
        center = rec.center_omega if rec.center_omega is not None else psi0.grid.center
        base = gaussian_mode(psi0.grid, center, rec.fwhm, rec.chirp)
    g1 = pi_step_mode(base, cut, t_eff) if rec.pi_shift else base
    return delay_mode(g1, delay, rec.delay_multiplier)


def _click(n: int, eta: float) -> float:
    return 1.0 - (1.0 - eta) ** n if n else 0.0


def prepare_point(spec: ExperimentSpec, delay: float) -> PreparedPoint:
    d = spec.schmidt
    cut, t_eff = resolve_cut(spec)
    g1 = coherent_mode(spec, delay)
    schmidt_modes = list(d.signal_modes)
    n_modes = d.n_kept

    if spec.coherent.distinguishable:
        sig_basis, kept = orthonormal_span(schmidt_modes)
        sig_labels = ["g2"] + [f"e{k}" for k in range(1, len(sig_basis))]
        coh_labels, coh_modes = ["g1"], [g1]
    else:
        sig_basis, kept = orthonormal_span([g1] + schmidt_modes)
        names = ["g1", "g2"] + [f"e{k}" for k in range(1, n_modes)]
        sig_labels = [names[i] for i in kept]
        coh_labels, coh_modes = [], []
    idler_labels = [f"i{n}" for n in range(n_modes)]
    labels = tuple(coh_labels + sig_labels + idler_labels)
    if "g1" not in labels:
        raise InvalidArgument("coherent mode vanished from the basis")
    reg = ModeRegistry(labels)

    state = weak_coherent(reg, "g1", spec.alpha, spec.coherent_order, spec.max_total_photons)
    start = state
    squeezers = []
    for n in range(n_modes):
        proj = project_onto(schmidt_modes[n], sig_basis)
        if proj.remainder_coefficient > 1e-8:
            raise InvalidArgument(f"Schmidt mode {n} not spanned by the signal basis")
        proj = replace(proj, remainder_coefficient=0.0, remainder_mode=None)
        squeezers.append(SqueezerSpec(spec.gamma * float(d.coefficients[n]), n, proj,
                                      tuple(sig_labels), idler_labels[n]))
    if spec.cross_schmidt_second_order:
        for sq in squeezers:
            state = apply_squeezer(state, sq)
    else:
        # each Schmidt squeezer acts on the coherent state alone; no g_n g_m products
        acc = start
        for sq in squeezers:
            acc = acc + (apply_squeezer(start, sq) - start)
        state = acc
    generated = state

    bin_of = {}
    blocks = [(sig_labels, sig_basis, "")]
    if coh_labels:
        blocks.append((coh_labels, coh_modes, "V"))
    for labs, modes, prefix in blocks:
        bb = build_bin_unitary(modes, cut, labs, prefix=prefix)
        state = change_basis(state.with_modes(bb.complement_labels), bb.basis_change)
        bin_of.update(bb.bin_of)
    return PreparedPoint(state, generated, tuple(sig_labels), tuple(sig_basis), tuple(idler_labels),
                         bin_of, g1, cut, t_eff)


def detection_probabilities(state: MultimodeFockState, bin_of: dict, idler_labels: Sequence,
                            detection: DetectionModel) -> PointResult:
    reg = state.registry
    h_idx = [reg.index(x) for x in idler_labels]
    l_idx = [reg.index(x) for x, b in bin_of.items() if b == BIN_LONG]
    s_idx = [reg.index(x) for x, b in bin_of.items() if b == BIN_SHORT]
    total = state.norm_squared()
    coinc = herald = 0.0
    for occ, amp in state.terms.items():
        w = abs(amp) ** 2
        ph = _click(sum(occ[i] for i in h_idx), detection.herald_efficiency)
        if ph == 0.0:
            continue
        herald += w * ph
        pl = _click(sum(occ[i] for i in l_idx), detection.long_arm_efficiency)
        ps = _click(sum(occ[i] for i in s_idx), detection.short_arm_efficiency)
        coinc += w * ph * pl * ps
    return PointResult(min(1.0, coinc / total), min(1.0, herald / total))


def run_point(spec: ExperimentSpec, delay: float) -> PointResult:
    """Three-fold coincidence and herald probability per pulse at a path delay (m)."""
    p = prepare_point(spec, delay)
    return detection_probabilities(p.state, p.bin_of, p.idler_labels, spec.detection)


@dataclass(frozen=True, eq=False)
class ScanResult:
    axis: np.ndarray
    coincidence_probability: np.ndarray
    herald_probability: np.ndarray
    metrics: dict
    axis_name: str = "delay_um"
    extra: dict = field(default_factory=dict)

    @property
    def normalized_coincidence(self) -> np.ndarray:
        b = self.metrics.get("baseline") or 0.0
        return self.coincidence_probability / b if b > 0 else np.full_like(self.coincidence_probability, np.nan)


def _check_axis(values) -> np.ndarray:
    a = np.asarray(values, dtype=float)
    if a.ndim != 1 or len(a) == 0:
        raise InvalidArgument("scan axis must be a non-empty list")
    if len(a) > 1:
        d = np.diff(a)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise InvalidArgument("scan axis must be strictly monotone")
    return a


def _map(fn, items, threads: int):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def envelope_overlap(spec: ExperimentSpec, delay: float) -> float:
    """|<|g1|, |g1| delayed>|: temporal overlap of the coherent pulse envelope with its undelayed copy."""
    g0 = coherent_mode(spec, 0.0)
    env = SpectralMode(g0.grid, np.abs(g0.amplitude))
    return abs(inner_product(env, delay_mode(env, delay, spec.coherent.delay_multiplier)))


def plateau_mask(spec: ExperimentSpec, delays: Sequence[float]) -> np.ndarray:
    """Delays whose envelope overlap is below ``plateau_tol``.

    Sharp pi steps give g1 temporal tails decaying only as 1/delay, so the
    spectral-mode overlap with the photon is not used here.
    """
    return np.array([envelope_overlap(spec, d) < spec.plateau_tol for d in delays], dtype=bool)


def far_baseline(spec: ExperimentSpec, threads: int = 1) -> float:
    """Mean coincidence at +/- ``baseline_delay``.

    Photons sharing a bin still interfere through their bin-restricted
    overlaps, which fall off only as 1/delay behind a sharp bin edge, so the
    in-scan plateau drifts at the percent level; the far points remove that.
    """
    bd = spec.baseline_delay
    step = spec.schmidt.signal_modes[0].grid.omega_step
    if bd * spec.coherent.delay_multiplier / C_LIGHT * step > math.pi / 2:
        raise ResolutionError(f"baseline delay {bd:.3g} m aliases on a grid with step {step:.3g} rad/s")
    pts = _map(lambda d: run_point(spec, d).coincidence, [bd, -bd], threads)
    return 0.5 * (pts[0] + pts[1])


def _delay_scan(spec: ExperimentSpec, delays, threads: int, peak: bool) -> ScanResult:
    axis = _check_axis(delays)
    meters = axis * 1e-6
    plateau = plateau_mask(spec, meters)
    if not np.any(plateau):
        raise CannotNormalize("no delay lies on the far-delay plateau; extend the scan range")
    results = _map(lambda d: run_point(spec, d), list(meters), threads)
    coinc = np.array([r.coincidence for r in results])
    herald = np.array([r.herald for r in results])
    baseline = far_baseline(spec, threads)
    if baseline <= 0.0:
        raise CannotNormalize("far-delay coincidence probability is zero")
    lo, hi = float(np.min(coinc)), float(np.max(coinc))
    vis = (baseline - lo) / baseline
    metrics = {
        "visibility": vis,
        "enhancement_ratio": hi / baseline,
        "baseline": baseline,
        "plateau_baseline": float(np.mean(coinc[plateau])),
        "extremum": hi if peak else lo,
        "classical_limit": CLASSICAL_LIMIT,
        "beyond_classical_limit": bool(vis > CLASSICAL_LIMIT),
    }
    return ScanResult(axis, coinc, herald, metrics, "delay_um", {"plateau": plateau})


def hom_scan(spec: ExperimentSpec, delays_um: Sequence[float], threads: int = 1) -> ScanResult:
    """Coincidence dip versus delay (micrometres); visibility against the far-delay plateau."""
    return _delay_scan(spec, delays_um, threads, peak=False)


def induced_emission_scan(spec: ExperimentSpec, delays_um: Sequence[float], threads: int = 1) -> ScanResult:
    """Delay scan without the pi step; the coincidence peak measures induced emission."""
    spec = replace(spec, coherent=replace(spec.coherent, pi_shift=False))
    return _delay_scan(spec, delays_um, threads, peak=True)


def mix_scan(spec: ExperimentSpec, t_fractions: Sequence[float], threads: int = 1) -> ScanResult:
    """Zero-delay visibility for each split ratio t (short-bin share of g1)."""
    axis = _check_axis(t_fractions)
    for t in axis:
        if not 0.0 < t < 1.0:
            raise DegenerateSplit(f"t_fraction must lie strictly inside (0, 1), got {t}")

    def one(t):
        s = replace(spec, coherent=replace(spec.coherent, t_fraction=float(t)))
        return run_point(s, 0.0), far_baseline(s), resolve_cut(s)[1]

    rows = _map(one, list(axis), threads)
    coinc = np.array([r[0].coincidence for r in rows])
    herald = np.array([r[0].herald for r in rows])
    base = np.array([r[1] for r in rows])
    if np.any(base <= 0.0):
        raise CannotNormalize("baseline coincidence probability is zero")
    vis = (base - coinc) / base
    metrics = {
        "visibility": float(vis[0]) if len(vis) == 1 else None,
        "enhancement_ratio": None,
        "baseline": float(np.mean(base)),
        "extremum": float(np.min(coinc)),
        "classical_limit": CLASSICAL_LIMIT,
    }
    extra = {"visibility": vis, "baseline": base, "t_effective": np.array([r[2] for r in rows])}
    return ScanResult(axis, coinc, herald, metrics, "t_fraction", extra)


def ideal_mix_visibility(t):
    """Two-photon HOM visibility of a t:(1-t) splitter."""
    t = np.asarray(t, dtype=float)
    return 2 * t * (1 - t) / (t**2 + (1 - t) ** 2)


def heralded_g2(spec: ExperimentSpec) -> float:
    """Herald-conditioned g2 = <n(n-1)>/<n>^2 of the signal field for the pair source alone."""
    p = prepare_point(replace(spec, alpha=0.0), 0.0)
    st = p.generated_state
    reg = st.registry
    h_idx = [reg.index(x) for x in p.idler_labels]
    s_idx = [reg.index(x) for x in reg.labels if x not in p.idler_labels]
    eta = spec.detection.herald_efficiency
    w_tot = n1 = n2 = 0.0
    for occ, amp in st.terms.items():
        w = abs(amp) ** 2 * _click(sum(occ[i] for i in h_idx), eta)
        if w == 0.0:
            continue
        ns = sum(occ[i] for i in s_idx)
        w_tot += w
        n1 += w * ns
        n2 += w * ns * (ns - 1)
    if w_tot == 0.0 or n1 == 0.0:
        raise UndefinedG2("herald probability is zero")
    return (n2 / w_tot) / (n1 / w_tot) ** 2


def calibrate_gamma(spec: ExperimentSpec, target_g2: float = 0.043, lo: float = 1e-4,
                    hi: float = 0.45) -> float:
    """Global gain giving the requested heralded g2."""
    f = lambda g: heralded_g2(replace(spec, gamma=g)) - target_g2
    if f(lo) > 0 or f(hi) < 0:
        raise InvalidArgument(f"target g2 {target_g2} not reachable for gain in [{lo}, {hi}]")
    return brentq(f, lo, hi, xtol=1e-12, rtol=1e-12)


def signal_mean_photons(spec: ExperimentSpec) -> float:
    """Mean signal photon number of the pair source alone (alpha = 0)."""
    p = prepare_point(replace(spec, alpha=0.0), 0.0)
    st = p.generated_state
    return st.mean_number([x for x in st.registry.labels if x not in p.idler_labels])


def balanced_alpha(spec: ExperimentSpec) -> float:
    """Coherent amplitude whose mean photon number equals the pair source's signal photon number."""
    return math.sqrt(signal_mean_photons(spec))


def classical_limit(spec: ExperimentSpec | None = None) -> float:
    return CLASSICAL_LIMIT
