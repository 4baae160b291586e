"""Truncated multimode Fock states over labeled orthonormal modes.

States are sparse maps from occupation tuples (one count per registry label)
to complex amplitudes.  Perturbative states are kept unnormalized, as they are
written in the perturbative expansions; probabilities are taken relative to the state norm.
Terms pushed above ``max_total_photons`` are discarded and their squared
amplitude is added to ``dropped_weight``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.linalg import null_space

from .errors import (
    InvalidArgument,
    InvalidOrder,
    InvalidUnitary,
    PerturbativeValidity,
    RegistryMismatch,
    UnknownMode,
)
from .jsa import ModeProjection
from .spectral import SpectralMode, _orthonormalize, inner_product

PRUNE = 1e-15
UNITARY_TOL = 1e-10
GAIN_GUARD = 0.5


@dataclass(frozen=True)
class ModeRegistry:
    labels: tuple
    links: tuple = ()

    def __post_init__(self):
        labels = tuple(self.labels)
        if len(set(labels)) != len(labels):
            raise InvalidArgument(f"duplicate mode labels in {labels}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "links", tuple(self.links))

    def __len__(self):
        return len(self.labels)

    def __contains__(self, label):
        return label in self.labels

    def index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownMode(f"mode {label!r} not in registry {self.labels}") from None

    def extended(self, labels: Iterable) -> "ModeRegistry":
        return ModeRegistry(self.labels + tuple(labels), self.links)


@dataclass(frozen=True, eq=False)
class MultimodeFockState:
    registry: ModeRegistry
    terms: Mapping
    max_total_photons: int = 4
    dropped_weight: float = 0.0

    def __post_init__(self):
        if self.max_total_photons < 1:
            raise InvalidArgument("max_total_photons must be >= 1")
        k = len(self.registry)
        clean = {}
        for occ, amp in self.terms.items():
            occ = tuple(int(x) for x in occ)
            if len(occ) != k:
                raise RegistryMismatch(f"occupation {occ} does not match {k} registry modes")
            if sum(occ) > self.max_total_photons:
                raise InvalidArgument(f"occupation {occ} exceeds max_total_photons")
            if abs(amp) >= PRUNE:
                clean[occ] = complex(amp)
        object.__setattr__(self, "terms", clean)

    @property
    def labels(self):
        return self.registry.labels

    def amplitude(self, occupation: Mapping | Sequence) -> complex:
        """Amplitude of an occupation given as a full tuple or a {label: count} map."""
        if isinstance(occupation, Mapping):
            occ = [0] * len(self.registry)
            for lab, n in occupation.items():
                occ[self.registry.index(lab)] = n
            occupation = occ
        return self.terms.get(tuple(occupation), 0j)

    def norm_squared(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.terms.values()))

    def _with(self, terms, dropped=0.0, registry=None) -> "MultimodeFockState":
        return MultimodeFockState(registry or self.registry, terms, self.max_total_photons,
                                  self.dropped_weight + dropped)

    def scaled(self, factor: complex) -> "MultimodeFockState":
        return self._with({o: a * factor for o, a in self.terms.items()})

    def __add__(self, other: "MultimodeFockState") -> "MultimodeFockState":
        _same_registry(self, other)
        out = dict(self.terms)
        for o, a in other.terms.items():
            out[o] = out.get(o, 0j) + a
        return MultimodeFockState(self.registry, out, self.max_total_photons,
                                  max(self.dropped_weight, other.dropped_weight))

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def with_modes(self, labels: Sequence) -> "MultimodeFockState":
        """Add vacuum modes to the registry."""
        pad = (0,) * len(labels)
        return MultimodeFockState(self.registry.extended(labels),
                                  {o + pad: a for o, a in self.terms.items()},
                                  self.max_total_photons, self.dropped_weight)

    def dump(self) -> str:
        """One line per term: occupation vector and amplitude, lexicographically sorted."""
        lines = ["# " + " ".join(str(lab) for lab in self.labels)]
        for occ in sorted(self.terms):
            a = self.terms[occ]
            lines.append(f"{' '.join(str(n) for n in occ)}  {a.real:+.12e} {a.imag:+.12e}j")
        return "\n".join(lines) + "\n"

    def mean_number(self, labels: Sequence) -> float:
        """<sum of n over labels> / <psi|psi>."""
        idx = [self.registry.index(lab) for lab in labels]
        num = sum(abs(a) ** 2 * sum(o[i] for i in idx) for o, a in self.terms.items())
        return num / self.norm_squared()


def _same_registry(a: MultimodeFockState, b: MultimodeFockState):
    if a.registry.labels != b.registry.labels:
        raise RegistryMismatch(f"registries differ: {a.registry.labels} vs {b.registry.labels}")


def vacuum(registry: ModeRegistry, max_total_photons: int = 4) -> MultimodeFockState:
    return MultimodeFockState(registry, {(0,) * len(registry): 1.0}, max_total_photons)


def _truncate(registry, terms, max_total_photons):
    kept, dropped = {}, 0.0
    for occ, amp in terms.items():
        if sum(occ) > max_total_photons:
            dropped += abs(amp) ** 2
        elif abs(amp) >= PRUNE:
            kept[occ] = amp
    return kept, dropped


def _create_raw(terms: Mapping, i: int) -> dict:
    out: dict = {}
    for occ, amp in terms.items():
        n = occ[i]
        new = occ[:i] + (n + 1,) + occ[i + 1:]
        out[new] = out.get(new, 0j) + amp * math.sqrt(n + 1)
    return out


def create(state: MultimodeFockState, label) -> MultimodeFockState:
    """Apply the creation operator of ``label``."""
    i = state.registry.index(label)
    kept, dropped = _truncate(state.registry, _create_raw(state.terms, i), state.max_total_photons)
    return state._with(kept, dropped)


def annihilate(state: MultimodeFockState, label) -> MultimodeFockState:
    i = state.registry.index(label)
    out: dict = {}
    for occ, amp in state.terms.items():
        n = occ[i]
        if n == 0:
            continue
        new = occ[:i] + (n - 1,) + occ[i + 1:]
        out[new] = out.get(new, 0j) + amp * math.sqrt(n)
    return state._with(out)


def weak_coherent(registry: ModeRegistry, label, alpha: complex, order: int = 2,
                  max_total_photons: int = 4) -> MultimodeFockState:
    """Coherent state expanded to ``order`` in alpha, unnormalized.

    Amplitudes are alpha^k / sqrt(k!) on |k>, i.e. sum_k alpha^k a^dag^k / k! |0>.
    The ledger records the weight a normalized coherent state has above ``order``.
    """
    if order not in (1, 2, 3):
        raise InvalidOrder(f"order must be 1, 2 or 3, got {order}")
    if order > max_total_photons:
        raise InvalidOrder(f"order {order} exceeds max_total_photons {max_total_photons}")
    if abs(alpha) >= 1.0:
        raise PerturbativeValidity(f"|alpha| = {abs(alpha):.3g} is not perturbative")
    i = registry.index(label)
    terms = {}
    base = [0] * len(registry)
    for k in range(order + 1):
        occ = list(base)
        occ[i] = k
        terms[tuple(occ)] = alpha**k / math.sqrt(math.factorial(k))
    x = abs(alpha) ** 2
    tail = 1.0 - math.exp(-x) * sum(x**k / math.factorial(k) for k in range(order + 1))
    return MultimodeFockState(registry, terms, max_total_photons, max(tail, 0.0))


@dataclass(frozen=True, eq=False)
class SqueezerSpec:
    """One Schmidt-mode two-mode squeezer.

    ``signal_labels`` name the registry modes carrying the projection
    coefficients; ``remainder_label`` carries the remainder component when it
    is nonzero.
    """

    gain: float
    schmidt_index: int
    signal_projection: ModeProjection
    signal_labels: tuple
    idler_label: str
    remainder_label: str | None = None

    def __post_init__(self):
        if abs(self.gain) >= GAIN_GUARD:
            raise PerturbativeValidity(f"|gain| = {abs(self.gain):.3g} exceeds the guard {GAIN_GUARD}")
        if len(self.signal_labels) != len(self.signal_projection.coefficients):
            raise InvalidArgument("one signal label per projection coefficient required")
        object.__setattr__(self, "signal_labels", tuple(self.signal_labels))

    def signal_operator(self) -> dict:
        """{label: coefficient} of the signal creation operator."""
        op = {lab: complex(c) for lab, c in zip(self.signal_labels, self.signal_projection.coefficients)}
        ce = self.signal_projection.remainder_coefficient
        if ce > 0.0:
            if self.remainder_label is None:
                raise UnknownMode(f"Schmidt mode {self.schmidt_index} has a remainder "
                                  f"(c_e = {ce:.3g}) but no remainder label")
            op[self.remainder_label] = op.get(self.remainder_label, 0j) + ce
        return op


def _apply_linear(terms: Mapping, coeffs: Sequence[tuple[int, complex]]) -> dict:
    out: dict = {}
    for occ, amp in terms.items():
        for i, c in coeffs:
            if c == 0:
                continue
            n = occ[i]
            new = occ[:i] + (n + 1,) + occ[i + 1:]
            out[new] = out.get(new, 0j) + amp * c * math.sqrt(n + 1)
    return out


def _cap(terms: Mapping, limit: int) -> dict:
    return {o: a for o, a in terms.items() if sum(o) <= limit}


def apply_squeezer(state: MultimodeFockState, spec: SqueezerSpec) -> MultimodeFockState:
    """Apply 1 + g X + (g^2/2) X^2 with X = (sum_j c_j a_j^dag) a_idler^dag."""
    reg = state.registry
    sig = [(reg.index(lab), c) for lab, c in spec.signal_operator().items()]
    idl = reg.index(spec.idler_label)
    limit = state.max_total_photons
    g = spec.gain

    def x_op(terms):
        # intermediates above the limit can only feed even higher photon numbers
        return _apply_linear(_create_raw(terms, idl), sig)

    x1 = x_op(state.terms)
    x2 = x_op(_cap(x1, limit))
    out = dict(state.terms)
    for occ, a in x1.items():
        out[occ] = out.get(occ, 0j) + g * a
    for occ, a in x2.items():
        out[occ] = out.get(occ, 0j) + 0.5 * g * g * a
    kept, dropped = _truncate(reg, out, limit)
    return state._with(kept, dropped)


@dataclass(frozen=True, eq=False)
class BasisChange:
    """a_k^dag = sum_j matrix[k, j] b_j^dag for k in from_labels, j in to_labels."""

    from_labels: tuple
    to_labels: tuple
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        object.__setattr__(self, "from_labels", tuple(self.from_labels))
        object.__setattr__(self, "to_labels", tuple(self.to_labels))
        if m.shape != (len(self.from_labels), len(self.to_labels)):
            raise InvalidUnitary(f"matrix shape {m.shape} does not match label counts")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def unitarity_error(self) -> float:
        m = self.matrix
        if m.shape[0] != m.shape[1]:
            return math.inf
        eye = np.eye(m.shape[0])
        return float(max(np.max(np.abs(m @ m.conj().T - eye)), np.max(np.abs(m.conj().T @ m - eye))))

    def inverse(self) -> "BasisChange":
        return BasisChange(self.to_labels, self.from_labels, self.matrix.conj().T)


def _poly_mul(p: dict, row: Sequence[tuple[int, complex]], nmodes: int) -> dict:
    out: dict = {}
    for exps, c in p.items():
        for j, u in row:
            new = exps[:j] + (exps[j] + 1,) + exps[j + 1:]
            out[new] = out.get(new, 0j) + c * u
    return out


def change_basis(state: MultimodeFockState, bc: BasisChange) -> MultimodeFockState:
    """Rewrite every from-label creation monomial in terms of the to-labels.

    Labels outside ``bc.from_labels`` are untouched; the to-labels are
    appended to the registry in place of the from-labels.
    """
    err = bc.unitarity_error()
    if err > UNITARY_TOL:
        raise InvalidUnitary(f"basis change is not unitary (error {err:.2e})")
    reg = state.registry
    from_idx = [reg.index(lab) for lab in bc.from_labels]
    rest_idx = [i for i in range(len(reg)) if i not in set(from_idx)]
    rest_labels = tuple(reg.labels[i] for i in rest_idx)
    clash = set(rest_labels) & set(bc.to_labels)
    if clash:
        raise InvalidArgument(f"target labels already in use: {sorted(clash)}")
    nto = len(bc.to_labels)
    rows = [[(j, u) for j, u in enumerate(bc.matrix[k]) if abs(u) > 0.0] for k in range(len(from_idx))]
    zero = (0,) * nto
    cache: dict = {}

    def expand(counts):
        if counts not in cache:
            poly = {zero: 1.0 + 0j}
            for k, n in enumerate(counts):
                for _ in range(n):
                    poly = _poly_mul(poly, rows[k], nto)
            norm = 1.0 / math.sqrt(math.prod(math.factorial(n) for n in counts))
            cache[counts] = {
                e: c * norm * math.sqrt(math.prod(math.factorial(m) for m in e))
                for e, c in poly.items()
            }
        return cache[counts]

    out: dict = {}
    for occ, amp in state.terms.items():
        counts = tuple(occ[i] for i in from_idx)
        rest = tuple(occ[i] for i in rest_idx)
        for e, c in expand(counts).items():
            key = rest + e
            out[key] = out.get(key, 0j) + amp * c
    new_reg = ModeRegistry(rest_labels + bc.to_labels, reg.links + ((bc.from_labels, bc.to_labels),))
    return MultimodeFockState(new_reg, out, state.max_total_photons, state.dropped_weight)


def inner(a: MultimodeFockState, b: MultimodeFockState) -> complex:
    """<a|b>."""
    _same_registry(a, b)
    small, large = (a.terms, b.terms) if len(a.terms) <= len(b.terms) else (b.terms, a.terms)
    total = 0j
    for occ in small:
        if occ in large:
            total += a.terms[occ].conjugate() * b.terms[occ]
    return total


def norm(state: MultimodeFockState) -> float:
    return math.sqrt(state.norm_squared())


BIN_LONG = "long"
BIN_SHORT = "short"


@dataclass(frozen=True, eq=False)
class BinBasis:
    """Bin-adapted basis for a set of orthonormal generated modes.

    ``basis_change.from_labels`` lists the generated-mode labels followed by
    ``complement_labels`` (vacuum modes completing the unitary).
    """

    basis_change: BasisChange
    bin_of: dict
    vectors: dict
    complement_labels: tuple


def build_bin_unitary(modes: Sequence[SpectralMode], cut_omega: float, labels: Sequence | None = None,
                      prefix: str = "", tol: float = 1e-10) -> BinBasis:
    """Unitary from generated modes to orthonormal vectors supported in one frequency bin each.

    Samples below ``cut_omega`` form the long-wavelength bin, the rest the
    short-wavelength bin.  Each mode's projections onto the two bins are
    orthonormalized bin by bin; the generated modes then become rows of an
    isometry that is completed to a unitary with vacuum complement modes.
    """
    if not modes:
        raise InvalidArgument("need at least one mode")
    labels = list(labels) if labels is not None else [f"{prefix}m{k}" for k in range(len(modes))]
    if len(labels) != len(modes):
        raise InvalidArgument("one label per mode required")
    grid = modes[0].grid
    short = grid.omega >= cut_omega
    vectors: dict = {}
    bin_of: dict = {}
    columns = []
    for name, mask in ((BIN_LONG, ~short), (BIN_SHORT, short)):
        parts = []
        for lab, m in zip(labels, modes):
            p = SpectralMode(grid, np.where(mask, m.amplitude, 0.0))
            if p.norm() < 1e-12:
                warnings.warn(f"mode {lab!r} has no support in the {name} bin", RuntimeWarning)
            parts.append(p)
        vecs, _ = _orthonormalize(parts, tol)
        for k, v in enumerate(vecs):
            lab = f"{prefix}{name}{k}"
            vectors[lab] = v
            bin_of[lab] = name
            columns.append(lab)
    u = np.array([[inner_product(vectors[c], m) for c in columns] for m in modes], dtype=complex)
    comp_rows = null_space(u.conj()).T if u.shape[1] > u.shape[0] else np.zeros((0, u.shape[1]))
    complement = tuple(f"{prefix}o{k}" for k in range(comp_rows.shape[0]))
    full = np.vstack([u, comp_rows])
    bc = BasisChange(tuple(labels) + complement, tuple(columns), full)
    return BinBasis(bc, bin_of, vectors, complement)
