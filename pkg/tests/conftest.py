import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from freqhom.jsa import JointSpectralAmplitude, schmidt_decompose, separable_jsa  # noqa: E402
from freqhom.spectral import gaussian_mode, make_grid, wavelength_to_omega, bandwidth_to_omega  # noqa: E402

W0 = wavelength_to_omega(830e-9)
F117 = bandwidth_to_omega(11.7e-9, 830e-9)


@pytest.fixture(scope="session")
def grid():
    return make_grid(W0, 10 * F117, 2048)


@pytest.fixture(scope="session")
def psi0(grid):
    return gaussian_mode(grid, W0, F117)


def single_mode_schmidt(n_points=2048, span=10.0):
    sg = make_grid(W0, span * F117, n_points)
    ig = make_grid(W0, span * F117, 64)
    return schmidt_decompose(separable_jsa(gaussian_mode(sg, W0, F117), gaussian_mode(ig, W0, F117)))


def correlated_schmidt(n_points=1024, corr=0.6, n_kept=2):
    sg = make_grid(W0, 10 * F117, n_points)
    ig = make_grid(W0, 10 * F117, 64)
    xs = (sg.omega - W0)[:, None] / F117
    xi = (ig.omega - W0)[None, :] / F117
    amp = np.exp(-2 * math.log(2) * (xs**2 + xi**2 + corr * xs * xi))
    return schmidt_decompose(JointSpectralAmplitude(sg, ig, amp.astype(complex)).normalize(), n_kept=n_kept)


@pytest.fixture(scope="session")
def single_schmidt():
    return single_mode_schmidt()


@pytest.fixture(scope="session")
def two_mode_schmidt():
    return correlated_schmidt()


# (criterion, passed, detail) lines recorded by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
