"""Reference calculations that share no code with the package's Fock pipeline.

The coincidence oracle works in first quantization: a term of the generated
state is a product of creation operators on raw spectral functions (the
coherent mode and the unprojected Schmidt signal modes) times idler
occupation numbers.  Overlaps between such products are permanents of Gram
matrices, and "no photon in bin B" is obtained by restricting every function
to the other bin.
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict

import numpy as np


def permanent(m: np.ndarray) -> complex:
    n = m.shape[0]
    if n == 0:
        return 1.0
    return sum(np.prod([m[i, p[i]] for i in range(n)]) for p in itertools.permutations(range(n)))


def expand_state(alpha, gamma, coefficients, order=2, max_photons=4):
    """Terms {(signal function ids (sorted), idler counts): amplitude}.

    Function id 0 is the coherent mode, id n+1 is Schmidt signal mode n.
    Creation operators commute, so the product order does not matter.
    """
    terms = {((0,) * k, (0,) * len(coefficients)): alpha**k / math.factorial(k) for k in range(order + 1)}
    for n, r in enumerate(coefficients):
        g = gamma * r
        new = defaultdict(complex)
        for (funcs, idl), amp in terms.items():
            for m in range(3):
                if len(funcs) + sum(idl) + 2 * m > max_photons:
                    continue
                f2 = tuple(sorted(funcs + (n + 1,) * m))
                i2 = idl[:n] + (idl[n] + m,) + idl[n + 1:]
                new[(f2, i2)] += amp * g**m / math.factorial(m)
        terms = dict(new)
    return terms


def _form(terms, gram):
    """sum conj(c_j) c_k <term_j|term_k> with signal overlaps from ``gram``."""
    by_idler = defaultdict(list)
    for (funcs, idl), amp in terms.items():
        by_idler[idl].append((funcs, amp))
    out = 0.0
    for idl, group in by_idler.items():
        idler_norm = math.prod(math.factorial(k) for k in idl)
        for f1, a1 in group:
            for f2, a2 in group:
                if len(f1) != len(f2):
                    continue
                sub = gram[np.ix_(f1, f2)] if f1 else np.zeros((0, 0))
                out += (np.conj(a1) * a2 * permanent(sub)).real * idler_norm
    return out


def coincidence_oracle(g1, schmidt_signal, coefficients, alpha, gamma, cut, step,
                       omega, order=2, max_photons=4):
    """(three-fold coincidence, herald) probabilities for perfect threshold detectors.

    ``g1`` and ``schmidt_signal`` are complex sample arrays on the grid
    ``omega`` with spacing ``step``; bins are omega < cut (long) and >= cut.
    """
    funcs = np.vstack([g1] + list(schmidt_signal))
    short = omega >= cut

    def gram(mask):
        f = funcs * mask
        return (f.conj() @ f.T) * step

    g_full = gram(np.ones_like(omega))
    g_short, g_long = gram(short), gram(~short)
    g_none = np.zeros_like(g_full)
    terms = expand_state(alpha, gamma, coefficients, order, max_photons)
    heralded = {k: v for k, v in terms.items() if sum(k[1]) > 0}
    norm = _form(terms, g_full)
    p_h = _form(heralded, g_full)
    no_long = _form(heralded, g_short)
    no_short = _form(heralded, g_long)
    neither = _form(heralded, g_none)
    return (p_h - no_long - no_short + neither) / norm, p_h / norm


def two_photon_bin_coincidence(g1, psi, cut, omega, step):
    """P(one photon per bin) for a^dag(g1) a^dag(psi)|0>, by direct amplitude sums."""
    short = omega >= cut
    parts = {}
    for name, f in (("g1", g1), ("psi", psi)):
        parts[name] = (f * ~short, f * short)
    # amplitude function of the (long, short) two-photon wavefunction
    amp = np.outer(parts["g1"][0], parts["psi"][1]) + np.outer(parts["psi"][0], parts["g1"][1])
    norm = 1.0 + abs(np.vdot(g1, psi) * step) ** 2
    return float(np.sum(np.abs(amp) ** 2) * step * step / norm)


def ideal_mix_visibility(t):
    return 2 * t * (1 - t) / (t**2 + (1 - t) ** 2)


def gaussian_schmidt_spectrum(p, q, r, n):
    """Schmidt coefficients of exp(-(p x^2 + q y^2 + 2 r x y)) from Mehler's formula.

    Purity P = sqrt(1 - r^2/(p q)); with mu^2 = (1 - P)/(1 + P) the weights are
    (1 - mu^2) mu^(2k) and the coefficients their square roots.
    """
    P = math.sqrt(1.0 - r * r / (p * q))
    mu2 = (1.0 - P) / (1.0 + P)
    return np.sqrt((1.0 - mu2) * mu2 ** np.arange(n))


def truncated_coherent_mean(alpha, order):
    x = abs(alpha) ** 2
    w = [x**k / math.factorial(k) for k in range(order + 1)]
    return sum(k * wk for k, wk in enumerate(w)) / sum(w)
