"""Elliptic integrals on Carlson symmetric forms.

The Legendre-form integrals used by the ellipse geometry are assembled from
Carlson's R_F, R_D and R_G with explicit quasi-period reduction.  The cephes
incomplete integrals shipped by scipy.special return isolated wrong values at
rare arguments (the amplitude reduction loses a half period), which is fatal
for spectral quadrature over dense grids, so everything here goes through the
Carlson routines instead.

Conventions: ``m`` is the parameter (m = k^2 with k the modulus); the
integrands are 1/sqrt(1 - m sin^2) and sqrt(1 - m sin^2).
"""

from __future__ import annotations

import numpy as np
from scipy.special import elliprd, elliprf, elliprg


def complete_first(m):
    """K(m) = R_F(0, 1-m, 1)."""
    m = np.asarray(m, dtype=float)
    return elliprf(0.0, 1.0 - m, 1.0)


def complete_second(m):
    """E(m) = 2 R_G(0, 1-m, 1)."""
    m = np.asarray(m, dtype=float)
    return 2.0 * elliprg(0.0, 1.0 - m, 1.0)


def _reduce(phi):
    """Split phi = n pi + r with r in [-pi/2, pi/2]."""
    phi = np.asarray(phi, dtype=float)
    n = np.round(phi / np.pi)
    return n, phi - n * np.pi


def incomplete_first(phi, m):
    """F(phi, m), quasi-periodic: F(phi + pi, m) = F(phi, m) + 2K(m)."""
    n, r = _reduce(phi)
    sr, cr = np.sin(r), np.cos(r)
    core = sr * elliprf(cr * cr, 1.0 - m * sr * sr, 1.0)
    return 2.0 * n * complete_first(m) + core


def incomplete_second(phi, m):
    """E(phi, m), quasi-periodic: E(phi + pi, m) = E(phi, m) + 2E(m)."""
    n, r = _reduce(phi)
    sr, cr = np.sin(r), np.cos(r)
    s2 = sr * sr
    core = (sr * elliprf(cr * cr, 1.0 - m * s2, 1.0)
            - (m / 3.0) * sr * s2 * elliprd(cr * cr, 1.0 - m * s2, 1.0))
    return 2.0 * n * complete_second(m) + core


def elliptic_integral(kind: str, k, angle=None):
    """Legendre elliptic integrals in the modulus-k convention.

    kind is one of "K", "E" (complete) or "F", "E_inc" (incomplete, requiring
    ``angle`` in radians).  The integrands carry sqrt(1 - k^2 sin^2).
    """
    k = np.asarray(k, dtype=float)
    if np.any(k < 0.0) or np.any(k >= 1.0):
        raise ValueError("modulus k must satisfy 0 <= k < 1")
    m = k * k
    if kind == "K":
        return complete_first(m)
    if kind == "E":
        return complete_second(m)
    if angle is None:
        raise ValueError(f"kind {kind!r} needs an angle")
    if kind == "F":
        return incomplete_first(angle, m)
    if kind == "E_inc":
        return incomplete_second(angle, m)
    raise ValueError(f"unknown kind {kind!r}")
