"""The billiard map of a strictly convex boundary, in arc-length/angle and in
Lazutkin coordinates.

A phase point is (s, phi): arc length of the collision point and the angle of
the outgoing ray with the counter-clockwise tangent.  The next collision is the
second intersection of the ray with the boundary; the chord map is exact on
ellipses (the intersection is the root of a quadratic) and bracketed-scan plus
safeguarded refinement on perturbed boundaries.

The Lazutkin change of variables is x = x(s), y = 4 C rho(s)^(1/3) sin(phi/2);
in it the billiard map is a near-translation (x, y) -> (x + y + O(y^3), y +
O(y^4)) for glancing orbits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import TWO_PI, Boundary, as_boundary

PHI_MIN = 1e-6          # tangency guard on reflection angles
SCAN_NODES = 256        # coarse brackets for the chord intersection


class TangencyError(ValueError):
    """Reflection angle too close to 0 or pi for a reliable chord."""


class BracketError(RuntimeError):
    """The chord intersection scan failed to bracket a root."""


@dataclass
class PhasePoint:
    """Billiard phase point: arc length mod perimeter, angle in (0, pi)."""

    s: float
    phi: float


@dataclass
class LazPoint:
    """Lazutkin image of a phase point: x mod 1 and y > 0."""

    x: float
    y: float


def _ray_frames(bnd: Boundary, s, phi):
    tau = bnd.tau_of_s(np.mod(s, bnd.perimeter))
    T = bnd.tangent(tau)
    M = np.stack([-T[..., 1], T[..., 0]], axis=-1)  # inward normal
    d = np.cos(phi)[..., None] * T + np.sin(phi)[..., None] * M
    return tau, bnd.point(tau), d


def _ellipse_chord(bnd: Boundary, origin, d):
    """Exact second intersection for an ellipse: root of a quadratic."""
    pose = bnd.spec.base
    a, b = pose.semi_major, pose.semi_minor
    P0 = pose.to_local(origin)
    dl = pose.vec_to_local(d)
    Ad = np.stack([dl[..., 0] / a, dl[..., 1] / b], axis=-1)
    AP = np.stack([P0[..., 0] / a, P0[..., 1] / b], axis=-1)
    lam = -2.0 * (AP * Ad).sum(axis=-1) / (Ad * Ad).sum(axis=-1)
    P1 = P0 + lam[..., None] * dl
    return np.arctan2(P1[..., 1] / b, P1[..., 0] / a) % TWO_PI


def _scan_chord(bnd: Boundary, tau0, origin, d):
    """Bracketed scan for the exit parameter on a general convex boundary.

    g(tau) = cross(d, P(tau) - origin) vanishes only at the entry and exit
    points of the ray's line; g < 0 immediately past the entry for a
    counter-clockwise boundary, so the exit is the first sign change.
    """
    tau0 = np.atleast_1d(tau0)
    origin = np.atleast_2d(origin)
    d = np.atleast_2d(d)

    def g(tau):
        rel = bnd.point(tau) - origin
        return d[:, 0] * rel[:, 1] - d[:, 1] * rel[:, 0]

    # interior nodes only: tau0 and tau0 + 2 pi are the entry itself, where
    # g vanishes up to roundoff with arbitrary sign
    offs = TWO_PI * np.arange(1, SCAN_NODES) / SCAN_NODES
    taus = tau0[:, None] + offs[None, :]
    rel = bnd.point(taus) - origin[:, None, :]
    gv = d[:, None, 0] * rel[:, :, 1] - d[:, None, 1] * rel[:, :, 0]
    pos = gv > 0.0
    found = np.any(pos, axis=1)
    first = np.argmax(pos, axis=1)
    rows = np.arange(len(tau0))
    hi = np.where(found, taus[rows, first], tau0 + TWO_PI)
    lo = np.where(found & (first > 0), hi - TWO_PI / SCAN_NODES,
                  np.where(found, tau0, taus[rows, -1]))
    # when the exit shares a panel with the entry (nearly glancing rays,
    # forward or backward) one bracket end sits on the entry; pull it into
    # the panel until the signs are strict
    frac = np.full_like(lo, 0.5)
    for _ in range(60):
        bad_lo = g(lo) >= 0.0
        bad_hi = g(hi) <= 0.0
        if not np.any(bad_lo | bad_hi):
            break
        lo = np.where(bad_lo, tau0 + frac * (hi - tau0), lo)
        hi = np.where(bad_hi, lo + (1.0 - frac) * (tau0 + TWO_PI - lo), hi)
        frac = frac * 0.5
    else:
        raise BracketError("degenerate chord bracket")
    for _ in range(52):
        mid = 0.5 * (lo + hi)
        neg = g(mid) < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return 0.5 * (lo + hi)


def _reflect(bnd: Boundary, tau1, d):
    T1 = bnd.tangent(tau1)
    M1 = np.stack([-T1[..., 1], T1[..., 0]], axis=-1)
    dt = (d * T1).sum(axis=-1)
    dm = (d * M1).sum(axis=-1)
    phi1 = np.arctan2(-dm, dt)  # outgoing angle after elastic reflection
    return phi1


def billiard_step_arrays(omega, s, phi):
    """Vectorized billiard map: arrays (s, phi) -> (s', phi')."""
    bnd = as_boundary(omega)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    if np.any(phi < PHI_MIN) or np.any(phi > np.pi - PHI_MIN):
        raise TangencyError("reflection angle within the tangency guard")
    tau0, origin, d = _ray_frames(bnd, s, phi)
    if bnd.is_ellipse:
        tau1 = _ellipse_chord(bnd, origin, d)
        # Newton polish of cross(d, P(tau) - origin) = 0
        for _ in range(2):
            rel = bnd.point(tau1) - origin
            gv = d[..., 0] * rel[..., 1] - d[..., 1] * rel[..., 0]
            vel = bnd.velocity(tau1)
            dg = d[..., 0] * vel[..., 1] - d[..., 1] * vel[..., 0]
            tau1 = tau1 - gv / dg
    else:
        tau1 = np.mod(_scan_chord(bnd, tau0, origin, d), TWO_PI)
    s1 = np.mod(bnd.s_of_tau(np.mod(tau1, TWO_PI)), bnd.perimeter)
    phi1 = _reflect(bnd, tau1, d)
    return s1, phi1


def billiard_step(omega, p: PhasePoint) -> PhasePoint:
    """One elastic reflection: the billiard map (s, phi) -> (s', phi')."""
    s1, phi1 = billiard_step_arrays(omega, p.s, p.phi)
    return PhasePoint(float(s1[0]), float(phi1[0]))


def to_lazutkin(omega, p: PhasePoint) -> LazPoint:
    """x = x(s), y = 4 C rho(s)^(1/3) sin(phi/2)."""
    bnd = as_boundary(omega)
    s = np.mod(p.s, bnd.perimeter)
    x = float(np.mod(bnd.x_of_s(s), 1.0))
    rho = float(bnd.rho_of_s(s))
    y = 4.0 * bnd.lazutkin_constant * rho ** (1.0 / 3.0) * np.sin(p.phi / 2.0)
    return LazPoint(x, float(y))


def from_lazutkin(omega, q: LazPoint) -> PhasePoint:
    """Inverse chart: phi = 2 arcsin(y / (4 C rho^(1/3)))."""
    bnd = as_boundary(omega)
    s = float(bnd.s_of_x(np.mod(q.x, 1.0)))
    rho = float(bnd.rho_of_s(s))
    arg = q.y / (4.0 * bnd.lazutkin_constant * rho ** (1.0 / 3.0))
    if not 0.0 < arg <= 1.0:
        raise ValueError(f"y = {q.y} outside the chart image at x = {q.x}")
    return PhasePoint(s, 2.0 * float(np.arcsin(arg)))


def lazutkin_step(omega, q: LazPoint) -> LazPoint:
    """The billiard map conjugated to Lazutkin coordinates."""
    bnd = as_boundary(omega)
    return to_lazutkin(bnd, billiard_step(bnd, from_lazutkin(bnd, q)))


def iterate_orbit(omega, p0: PhasePoint, steps: int):
    """Iterate the billiard map, tracking the lift of s to the real line.

    Returns arrays (s_lifted, phi) of length steps + 1; the winding counter
    makes rotation numbers alias-free.
    """
    bnd = as_boundary(omega)
    ell = bnd.perimeter
    s_lift = np.empty(steps + 1)
    phis = np.empty(steps + 1)
    s_lift[0], phis[0] = p0.s, p0.phi
    s, phi = np.atleast_1d(float(p0.s)), np.atleast_1d(float(p0.phi))
    for k in range(1, steps + 1):
        s_new, phi = billiard_step_arrays(bnd, s, phi)
        adv = np.mod(s_new - np.mod(s, ell), ell)
        s = s + adv  # lifted
        s_lift[k], phis[k] = s[0], phi[0]
    return s_lift, phis


def rotation_number(omega, p0: PhasePoint, steps: int) -> float:
    """Average arc-length advance per reflection, on the universal cover."""
    if steps < 100:
        raise ValueError("rotation number estimate needs at least 100 steps")
    bnd = as_boundary(omega)
    s_lift, _ = iterate_orbit(bnd, p0, steps)
    return float((s_lift[-1] - s_lift[0]) / (bnd.perimeter * steps))


def orbit_rows(omega, p0: PhasePoint, steps: int, first_integral=None):
    """Orbit dump rows (step, s, phi, x, y, I); I is None without an ellipse
    first integral callback."""
    bnd = as_boundary(omega)
    s_lift, phis = iterate_orbit(bnd, p0, steps)
    rows = []
    for k in range(steps + 1):
        s = float(np.mod(s_lift[k], bnd.perimeter))
        lz = to_lazutkin(bnd, PhasePoint(s, phis[k]))
        val = None if first_integral is None else first_integral(s, phis[k])
        rows.append((k, s, float(phis[k]), lz.x, lz.y, val))
    return rows
