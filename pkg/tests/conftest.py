"""Shared fixtures and independent numeric oracles.

Oracles deliberately avoid the package's own closed-form expressions:
mode overlaps go through scipy's Hermite polynomials and adaptive
quadrature, Bessel J1 through its ascending power series, and gradients
through central finite differences.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import eval_hermite


def gaussian_psf(x, sigma=1.0):
    return (2 * np.pi * sigma**2) ** -0.25 * np.exp(-(x**2) / (4 * sigma**2))


def hg_mode_oracle(q, x, sigma=1.0):
    """Hermite-Gaussian mode via scipy's physicists' Hermite polynomial."""
    norm = (2 * np.pi * sigma**2) ** -0.25 / np.sqrt(2.0**q * math.factorial(q))
    return norm * eval_hermite(q, x / (np.sqrt(2) * sigma)) * np.exp(-(x**2) / (4 * sigma**2))


def overlap_probability_oracle(mode_fn, s, sigma=1.0, span=14.0):
    """|<phi|psi(.-s)>|^2 by adaptive quadrature."""
    re, _ = quad(lambda x: mode_fn(x) * gaussian_psf(x - s, sigma),
                 -span * sigma, span * sigma + s, limit=400)
    return re**2


def pm_overlap_oracle(sign, s, sigma=1.0):
    def mode(x):
        return (hg_mode_oracle(0, x, sigma) + sign * hg_mode_oracle(1, x, sigma)) / np.sqrt(2)
    return overlap_probability_oracle(mode, s, sigma)


def j1_series_oracle(x, terms=40):
    """Ascending series J1(x) = sum_m (-1)^m / (m! (m+1)!) (x/2)^{2m+1}."""
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    term = x / 2.0
    for m in range(terms):
        total = total + term
        term = term * (-(x / 2.0) ** 2) / ((m + 1) * (m + 2))
    return total


def central_difference(fn, x, h=1e-6):
    return (fn(x + h) - fn(x - h)) / (2 * h)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
