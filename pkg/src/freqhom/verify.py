"""Built-in invariant checks, run by ``freqhom verify``.

Each check builds its own small problem, measures one number and compares
it with a tolerance.  ``perturb_unitary`` adds a deliberate error to the bin
unitary so the unitarity-related checks can be seen to fail.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import FreqHomError
from .fock import (
    BasisChange,
    ModeRegistry,
    MultimodeFockState,
    SqueezerSpec,
    annihilate,
    apply_squeezer,
    build_bin_unitary,
    change_basis,
    create,
    vacuum,
    weak_coherent,
)
from .interference import (
    CoherentRecipe,
    DetectionModel,
    ExperimentSpec,
    coherent_mode,
    prepare_point,
    run_point,
)
from .jsa import (
    JointSpectralAmplitude,
    ModeProjection,
    schmidt_decompose,
    separable_jsa,
)
from .spectral import gaussian_mode, inner_product, make_grid, pi_step_mode, spectral_median

W0 = 2.27e15
FWHM = 3.2e13


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""
    seconds: float = 0.0


def _random_state(rng, labels, n_terms=6, max_total=4) -> MultimodeFockState:
    reg = ModeRegistry(labels)
    terms = {}
    for _ in range(n_terms):
        occ = [0] * len(labels)
        for _k in range(rng.integers(0, max_total)):
            occ[rng.integers(0, len(labels))] += 1
        terms[tuple(occ)] = complex(rng.normal(), rng.normal())
    return MultimodeFockState(reg, terms, max_total_photons=max_total + 2)


def _diff(a: MultimodeFockState, b: MultimodeFockState) -> float:
    keys = set(a.terms) | set(b.terms)
    return max((abs(a.terms.get(k, 0) - b.terms.get(k, 0)) for k in keys), default=0.0)


def _balanced_pair(n_points=2048, perturb=0.0):
    grid = make_grid(W0, 10 * FWHM, n_points)
    psi = gaussian_mode(grid, W0, FWHM)
    cut = spectral_median(psi)
    g1 = pi_step_mode(psi, cut, 0.5)
    bb = build_bin_unitary([g1, psi], cut, ["a1", "a2"])
    bc = bb.basis_change
    if perturb:
        m = np.array(bc.matrix)
        m[0, 0] += perturb
        bc = object.__new__(BasisChange)
        object.__setattr__(bc, "from_labels", bb.basis_change.from_labels)
        object.__setattr__(bc, "to_labels", bb.basis_change.to_labels)
        object.__setattr__(bc, "matrix", m)
    return bb, bc, psi, g1, cut


def _single_mode_spec(n_points=2048, **kw) -> ExperimentSpec:
    sg = make_grid(W0, 10 * FWHM, n_points)
    ig = make_grid(W0, 10 * FWHM, 64)
    d = schmidt_decompose(separable_jsa(gaussian_mode(sg, W0, FWHM), gaussian_mode(ig, W0, FWHM)))
    return ExperimentSpec(d, kw.pop("alpha", 0.1), kw.pop("gamma", 0.1), **kw)


def _two_mode_spec(**kw) -> ExperimentSpec:
    sg = make_grid(W0, 10 * FWHM, 1024)
    ig = make_grid(W0, 10 * FWHM, 64)
    xs = (sg.omega - W0)[:, None] / FWHM
    xi = (ig.omega - W0)[None, :] / FWHM
    amp = np.exp(-2 * math.log(2) * (xs**2 + xi**2 + 0.6 * xs * xi))
    d = schmidt_decompose(JointSpectralAmplitude(sg, ig, amp.astype(complex)).normalize(), n_kept=2)
    return ExperimentSpec(d, kw.pop("alpha", 0.1), kw.pop("gamma", 0.1), **kw)


# --- checks --------------------------------------------------------------------------


def check_ccr(perturb):
    rng = np.random.default_rng(11)
    labels = ("a", "b", "c")
    worst = 0.0
    for _ in range(5):
        st = _random_state(rng, labels)
        for x in labels:
            for y in labels:
                lhs = annihilate(create(st, y), x) - create(annihilate(st, x), y)
                rhs = st if x == y else st.scaled(0.0)
                worst = max(worst, _diff(lhs, rhs))
    return worst, 1e-12, "[a_i, a_j^dag] = delta_ij on random states"


def check_creation_commute(perturb):
    rng = np.random.default_rng(12)
    st = _random_state(rng, ("a", "b", "c"))
    worst = 0.0
    for x, y in (("a", "b"), ("b", "c"), ("a", "c")):
        worst = max(worst, _diff(create(create(st, x), y), create(create(st, y), x)))
        worst = max(worst, _diff(annihilate(annihilate(st, x), y), annihilate(annihilate(st, y), x)))
    return worst, 1e-12, "[a_i^dag, a_j^dag] = [a_i, a_j] = 0"


def check_bin_unitarity(perturb):
    _, bc, *_ = _balanced_pair(perturb=perturb)
    return bc.unitarity_error(), 1e-10, "bin unitary U U^dag = 1"


def check_round_trip(perturb):
    bb, bc, *_ = _balanced_pair(perturb=perturb)
    rng = np.random.default_rng(13)
    st = _random_state(rng, ("a1", "a2")).with_modes(bb.complement_labels)
    try:
        there = change_basis(st, bc)
        back = change_basis(there, bc.inverse())
    except FreqHomError as exc:
        return math.inf, 1e-10, f"rejected: {exc}"
    return _diff(back, st), 1e-10, "change_basis with U then U^dag"


def check_norm_conservation(perturb):
    bb, bc, *_ = _balanced_pair(perturb=perturb)
    rng = np.random.default_rng(14)
    st = _random_state(rng, ("a1", "a2")).with_modes(bb.complement_labels)
    try:
        out = change_basis(st, bc)
    except FreqHomError as exc:
        return math.inf, 1e-10, f"rejected: {exc}"
    return abs(out.norm_squared() - st.norm_squared()) / st.norm_squared(), 1e-10, "basis change keeps the norm"


def check_hom_identity(perturb):
    bb, bc, *_ = _balanced_pair(perturb=perturb)
    reg = ModeRegistry(("a1", "a2"))
    st = create(create(vacuum(reg), "a1"), "a2").with_modes(bb.complement_labels)
    try:
        out = change_basis(st, bc)
    except FreqHomError as exc:
        return math.inf, 1e-12, f"rejected: {exc}"
    amp = out.amplitude({"long0": 1, "short0": 1})
    return abs(amp), 1e-12, "a1^dag a2^dag |0> has no |1_long 1_short> term"


def check_pi_step_orthogonality(perturb):
    _, _, psi, g1, _ = _balanced_pair()
    return abs(inner_product(psi, g1)), 1e-10, "<psi0|pi-step(psi0)>"


def check_coherent_norm(perturb):
    a = 0.1
    st = weak_coherent(ModeRegistry(("c",)), "c", a, 2)
    return abs(st.norm_squared() - (1 + a**2 + a**4 / 2)), 1e-14, "order-2 coherent norm^2 = 1 + a^2 + a^4/2"


def check_squeezer_inverse(perturb):
    g = 0.05
    reg = ModeRegistry(("s", "i"))
    proj = ModeProjection(np.array([1.0]), 0.0, None)
    st = vacuum(reg, 6)
    fwd = apply_squeezer(st, SqueezerSpec(g, 0, proj, ("s",), "i"))
    back = apply_squeezer(fwd, SqueezerSpec(-g, 0, proj, ("s",), "i"))
    res = math.sqrt((back - st).norm_squared())
    return res / abs(g) ** 3, 10.0, "S(-g) S(g) = 1 + O(g^3); value is residual/|g|^3"


def check_squeezers_commute(perturb):
    reg = ModeRegistry(("s0", "s1", "i0", "i1"))
    p0 = ModeProjection(np.array([0.8, 0.6]), 0.0, None)
    p1 = ModeProjection(np.array([-0.6, 0.8]), 0.0, None)
    st = weak_coherent(reg, "s0", 0.2, 2, 6)
    a = SqueezerSpec(0.1, 0, p0, ("s0", "s1"), "i0")
    b = SqueezerSpec(0.07, 1, p1, ("s0", "s1"), "i1")
    ab = apply_squeezer(apply_squeezer(st, a), b)
    ba = apply_squeezer(apply_squeezer(st, b), a)
    return _diff(ab, ba), 1e-14, "squeezers on different idler modes commute"


def check_schmidt_reconstruction(perturb):
    spec = _two_mode_spec()
    d = schmidt_decompose(JointSpectralAmplitude(
        spec.schmidt.signal_modes[0].grid, spec.schmidt.idler_modes[0].grid,
        np.outer(spec.schmidt.signal_modes[0].amplitude, spec.schmidt.idler_modes[0].amplitude)
        + 0.3 * np.outer(spec.schmidt.signal_modes[1].amplitude, spec.schmidt.idler_modes[1].amplitude),
    ).normalize(), n_kept=2)
    r = d.coefficients[:2]
    return abs(r[1] / r[0] - 0.3), 1e-10, "SVD recovers a two-term JSA"


def check_herald_delay_independence(perturb):
    spec = _single_mode_spec(alpha=0.2, gamma=0.1, coherent=CoherentRecipe(distinguishable=True))
    heralds = [run_point(spec, d).herald for d in (0.0, 20e-6, 40e-6, 120e-6)]
    return max(heralds) - min(heralds), 1e-10, "herald probability vs delay (orthogonal polarization)"


def check_number_additivity(perturb):
    spec = _single_mode_spec(alpha=0.2, gamma=0.1, max_total_photons=6)
    p = prepare_point(spec, 0.0)
    st = p.generated_state
    sig = [x for x in st.registry.labels if x not in p.idler_labels]
    joint = st.mean_number(sig)
    coh = weak_coherent(ModeRegistry(("g1",)), "g1", spec.alpha, spec.coherent_order, 6).mean_number(["g1"])
    pairs = prepare_point(replace(spec, alpha=0.0), 0.0).generated_state
    alone = pairs.mean_number([x for x in pairs.registry.labels if x not in p.idler_labels])
    return abs(joint - coh - alone), 1e-10, "<n_signal> = coherent + SPDC when g1 is orthogonal"


def check_efficiency_scaling(perturb):
    # Exact at leading order: with at most three photons every three-fold term
    # carries one herald, one long and one short photon.
    spec = _two_mode_spec(alpha=0.1, gamma=0.1, max_total_photons=3)

    def vis(det):
        s = replace(spec, detection=det)
        z, b = run_point(s, 0.0).coincidence, run_point(s, 3e-3).coincidence
        return (b - z) / b

    v1 = vis(DetectionModel())
    v2 = vis(DetectionModel(0.6, 0.5, 0.7))
    v3 = vis(DetectionModel(0.3, 0.25, 0.35))
    return max(abs(v1 - v2), abs(v2 - v3)), 1e-10, "visibility under efficiency scaling (3-photon order)"


def check_probability_range(perturb):
    spec = _two_mode_spec(alpha=0.3, gamma=0.2)
    worst = 0.0
    for d in (0.0, 15e-6, 40e-6):
        r = run_point(spec, d)
        for v in r:
            worst = max(worst, max(0.0, v - 1.0), max(0.0, -v))
    return worst, 0.0, "probabilities in [0, 1]"


def check_coherent_mode_norm(perturb):
    spec = _single_mode_spec()
    g = coherent_mode(spec, 25e-6)
    return abs(g.norm() - 1.0), 1e-12, "shaped and delayed g1 is normalized"


CHECKS: dict[str, Callable] = {
    "ccr_annihilate_create": check_ccr,
    "creation_operators_commute": check_creation_commute,
    "bin_unitarity": check_bin_unitarity,
    "unitary_round_trip": check_round_trip,
    "norm_conservation": check_norm_conservation,
    "hom_identity": check_hom_identity,
    "pi_step_orthogonality": check_pi_step_orthogonality,
    "coherent_truncation_norm": check_coherent_norm,
    "squeezer_inverse_third_order": check_squeezer_inverse,
    "distinct_squeezers_commute": check_squeezers_commute,
    "schmidt_reconstruction": check_schmidt_reconstruction,
    "herald_delay_independence": check_herald_delay_independence,
    "photon_number_additivity": check_number_additivity,
    "efficiency_scaling_invariance": check_efficiency_scaling,
    "probabilities_in_unit_interval": check_probability_range,
    "coherent_mode_normalized": check_coherent_mode_norm,
}


def run_checks(perturb_unitary: float = 0.0, names=None) -> list[CheckResult]:
    out = []
    for name, fn in CHECKS.items():
        if names and name not in names:
            continue
        t0 = time.perf_counter()
        try:
            value, tol, detail = fn(perturb_unitary)
            passed = bool(value <= tol)
        except FreqHomError as exc:
            value, tol, detail, passed = math.inf, 0.0, f"error: {exc}", False
        out.append(CheckResult(name, passed, float(value), tol, detail, time.perf_counter() - t0))
    return out


def format_table(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check'.ljust(width)}  result  {'value':>10}  {'tol':>8}  description"]
    for r in results:
        lines.append(f"{r.name.ljust(width)}  {'PASS' if r.passed else 'FAIL':6}  "
                     f"{r.value:10.3g}  {r.tolerance:8.1g}  {r.detail}")
    n_ok = sum(r.passed for r in results)
    lines.append(f"{n_ok}/{len(results)} checks passed")
    return "\n".join(lines)
