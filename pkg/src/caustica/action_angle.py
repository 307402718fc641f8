"""Exact integrable structure of the elliptic billiard.

Orbits tangent to the confocal ellipse

    X^2/(a^2 - Z) + Y^2/(b^2 - Z) = 1,    0 < Z < b^2,

leave the boundary point (a cos t, b sin t) at the reflection angle phi with
sin(phi) = sqrt(Z)/w(t), w = |dP/dt| (Joachimsthal's invariant evaluated on the
tangent line).  The induced boundary map F_Z preserves the density

    h_Z(t) = 1 / sqrt(w(t)^2 - Z),

whose normalized primitive theta_Z conjugates F_Z to the rigid rotation by
omega(Z); both h_Z and theta_Z reduce to incomplete elliptic integrals with
parameter (a^2 - b^2)/(a^2 - Z), so charts are evaluated in closed form.  The
candidate density is never trusted blindly: every chart build validates the
invariance equation h(F(t)) F'(t) = h(t) with an analytically differentiated
tangency map, and falls back to a direct orbit-normalized conjugacy if the
residual is above tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from . import dynamics
from .elliptic import complete_first, elliptic_integral, incomplete_first
from .geometry import TWO_PI, EllipsePose, _EllipseEngine

__all__ = [
    "AAChart",
    "ChartError",
    "ConfocalCaustic",
    "DegeneracyError",
    "EllipticCoordsPoint",
    "build_chart",
    "caustic_from_rotation_number",
    "caustic_rotation_number",
    "conjugacy_residual",
    "elliptic_integral",
    "elliptical_coords",
    "elliptical_to_cartesian",
    "first_integral",
]

DENSITY_TOL = 1e-8      # invariance-equation residual accepted for a density
CONJUGACY_TOL = 1e-8    # conjugacy residual accepted after fallback


class DegeneracyError(ValueError):
    """Elliptical coordinates are singular at the requested point."""


class ChartError(RuntimeError):
    """Action-angle chart construction failed validation."""


@dataclass
class EllipticCoordsPoint:
    """Confocal coordinates (mu, psi): x = h cosh(mu) cos(psi), y = h sinh(mu) sin(psi)."""

    mu: float
    psi: float


def elliptical_coords(pose: EllipsePose, point) -> EllipticCoordsPoint:
    """Invert the confocal map about the pose's own frame.

    Points strictly between the foci are rejected (the chart folds there);
    the foci themselves map to mu = 0, psi in {0, pi}.
    """
    if pose.eccentricity == 0.0:
        raise DegeneracyError("confocal coordinates degenerate for a circle")
    h = pose.focal_distance
    X, Y = np.asarray(pose.to_local(point), dtype=float)
    # cos(psi - i mu) = (X + i Y)/h, so arccos gives (psi, mu) up to the
    # reflection (psi, mu) -> (-psi, -mu); pick the branch with mu >= 0
    w = np.arccos(complex(X, Y) / h)
    mu, psi = -w.imag, w.real
    if mu < 0.0:
        mu, psi = -mu, -psi
    psi = float(np.mod(psi, TWO_PI))
    rec = np.array([h * math.cosh(mu) * math.cos(psi),
                    h * math.sinh(mu) * math.sin(psi)])
    scale = max(h, abs(X), abs(Y))
    if not np.allclose(rec, [X, Y], atol=1e-10 * scale):
        raise DegeneracyError(f"confocal inversion failed at local ({X}, {Y})")
    if mu < 1e-12 and min(psi, abs(np.pi - psi), TWO_PI - psi) > 1e-12:
        raise DegeneracyError("point lies strictly between the foci")
    return EllipticCoordsPoint(float(mu), psi)


def elliptical_to_cartesian(pose: EllipsePose, coords: EllipticCoordsPoint):
    h = pose.focal_distance
    local = np.array([h * math.cosh(coords.mu) * math.cos(coords.psi),
                      h * math.sinh(coords.mu) * math.sin(coords.psi)])
    return pose.to_world(local)


def first_integral(pose: EllipsePose, psi, phi):
    """I(psi, phi) = cos^2 phi + cos^2 psi sin^2 phi / cosh^2 mu0.

    The boundary satisfies cosh(mu0) = 1/e, so the weight is e^2; on the
    boundary psi coincides with the elliptic parameter t of (a cos t, b sin t).
    """
    psi = np.asarray(psi, dtype=float)
    phi = np.asarray(phi, dtype=float)
    e2 = pose.eccentricity ** 2
    return np.cos(phi) ** 2 + e2 * np.cos(psi) ** 2 * np.sin(phi) ** 2


# ---------------------------------------------------------------------------
# confocal caustics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConfocalCaustic:
    """Confocal ellipse {X^2/(a^2-Z) + Y^2/(b^2-Z) = 1} inside the boundary."""

    Z: float
    semi_major: float
    semi_minor: float

    @classmethod
    def from_parameter(cls, pose: EllipsePose, Z: float):
        a, b = pose.semi_major, pose.semi_minor
        if not 0.0 < Z < b * b:
            raise ValueError(f"caustic parameter must lie in (0, b^2), got {Z}")
        return cls(Z, math.sqrt(a * a - Z), math.sqrt(b * b - Z))


class _CausticFlow:
    """Closed-form machinery of the boundary map induced by tangency to Z."""

    def __init__(self, eng: _EllipseEngine, Z: float):
        self.eng = eng
        self.Z = Z
        a, b = eng.a, eng.b
        self.A2 = a * a - Z
        self.B2 = b * b - Z
        self.mh = (a * a - b * b) / self.A2
        self.Kh = float(complete_first(self.mh))
        # int_0^{2 pi} dt / sqrt(w^2 - Z) = 4 K(mh) / sqrt(a^2 - Z)
        self.H = 4.0 * self.Kh / math.sqrt(self.A2)
        self._guess_tables = None

    def _guesses(self):
        if self._guess_tables is None:
            tg = np.linspace(0.0, TWO_PI, 1025)
            self._guess_tables = (tg, self.theta_of_t(tg))
        return self._guess_tables

    def density(self, t):
        return 1.0 / np.sqrt(self.eng.speed(t) ** 2 - self.Z)

    def theta_of_t(self, t):
        t = np.asarray(t, dtype=float)
        return (self.Kh - incomplete_first(np.pi / 2.0 - t, self.mh)) / (4.0 * self.Kh)

    def dtheta_dt(self, t):
        return self.density(t) / self.H

    def t_of_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        wind = np.floor(theta)
        tr = theta - wind
        t_nodes, th_nodes = self._guesses()
        t = np.interp(tr, th_nodes, t_nodes)
        for _ in range(8):
            t = t - (self.theta_of_t(t) - tr) / self.dtheta_dt(t)
        return t + wind * TWO_PI

    def reflection_angle(self, t):
        """phi with sin(phi) = sqrt(Z)/w(t), in (0, pi/2]."""
        return np.arcsin(math.sqrt(self.Z) / self.eng.speed(t))

    def step(self, t):
        """Tangency map: next boundary parameter along the chord tangent to Z."""
        eng = self.eng
        t = np.asarray(t, dtype=float)
        phi = self.reflection_angle(t)
        T = np.stack([-eng.a * np.sin(t), eng.b * np.cos(t)], axis=-1)
        T = T / np.linalg.norm(T, axis=-1, keepdims=True)
        M = np.stack([-T[..., 1], T[..., 0]], axis=-1)
        d = np.cos(phi)[..., None] * T + np.sin(phi)[..., None] * M
        P0 = eng.point_local(t)
        Ad = np.stack([d[..., 0] / eng.a, d[..., 1] / eng.b], axis=-1)
        AP = np.stack([P0[..., 0] / eng.a, P0[..., 1] / eng.b], axis=-1)
        lam = -2.0 * (AP * Ad).sum(axis=-1) / (Ad * Ad).sum(axis=-1)
        P1 = P0 + lam[..., None] * d
        t1 = np.arctan2(P1[..., 1] / eng.b, P1[..., 0] / eng.a)
        return np.mod(t1 - t, TWO_PI) + t  # lifted continuation past t

    def step_derivative(self, t):
        """dF/dt by implicit differentiation of the tangency condition.

        The chord through P(t), P(t') with line u x + v y = 1 is tangent to
        the caustic iff A^2 u^2 + B^2 v^2 = 1; differentiating gives
        F' = -T_t / T_t'.
        """
        eng = self.eng
        t = np.asarray(t, dtype=float)
        t1 = self.step(t)
        x1, y1 = eng.a * np.cos(t), eng.b * np.sin(t)
        x2, y2 = eng.a * np.cos(t1), eng.b * np.sin(t1)
        det = x1 * y2 - x2 * y1
        u = (y2 - y1) / det
        v = (x1 - x2) / det
        dx1, dy1 = -eng.a * np.sin(t), eng.b * np.cos(t)
        dx2, dy2 = -eng.a * np.sin(t1), eng.b * np.cos(t1)
        u_x1 = -(y2 - y1) * y2 / det ** 2
        u_y1 = (-det + (y2 - y1) * x2) / det ** 2
        v_x1 = (det - (x1 - x2) * y2) / det ** 2
        v_y1 = (x1 - x2) * x2 / det ** 2
        u_x2 = (y2 - y1) * y1 / det ** 2
        u_y2 = (det - (y2 - y1) * x1) / det ** 2
        v_x2 = (-det + (x1 - x2) * y1) / det ** 2
        v_y2 = -(x1 - x2) * x1 / det ** 2
        Tt = 2 * self.A2 * u * (u_x1 * dx1 + u_y1 * dy1) \
            + 2 * self.B2 * v * (v_x1 * dx1 + v_y1 * dy1)
        Tt1 = 2 * self.A2 * u * (u_x2 * dx2 + u_y2 * dy2) \
            + 2 * self.B2 * v * (v_x2 * dx2 + v_y2 * dy2)
        return -Tt / Tt1

    def invariance_residual(self, n_probe: int = 128) -> float:
        t = np.linspace(0.0, TWO_PI, n_probe + 1)[:-1]
        lhs = self.density(self.step(t)) * self.step_derivative(t)
        return float(np.max(np.abs(lhs / self.density(t) - 1.0)))

    def rotation_number(self) -> float:
        return float(self.theta_of_t(self.step(0.0)) % 1.0)


def caustic_rotation_number(pose: EllipsePose, Z: float) -> float:
    """Rotation number of the billiard restricted to the caustic Z."""
    return _CausticFlow(_EllipseEngine(pose), Z).rotation_number()


def caustic_from_rotation_number(pose: EllipsePose, omega: float) -> ConfocalCaustic:
    """Solve omega(Z) = omega by bracketed root finding; omega in (0, 1/2)."""
    if not 0.0 < omega < 0.5:
        raise ValueError(f"rotation number must lie in (0, 1/2), got {omega}")
    eng = _EllipseEngine(pose)
    b2 = eng.b * eng.b
    lo, hi = 1e-14 * b2, (1.0 - 1e-14) * b2
    f = lambda Z: _CausticFlow(eng, Z).rotation_number() - omega
    flo, fhi = f(lo), f(hi)
    if not flo < 0.0 < fhi:
        raise ValueError(f"rotation number {omega} outside attainable bracket "
                         f"({flo + omega:.3e}, {fhi + omega:.3e})")
    Z = brentq(f, lo, hi, xtol=1e-300, rtol=8.9e-16, maxiter=200)
    return ConfocalCaustic.from_parameter(pose, Z)


# ---------------------------------------------------------------------------
# action-angle chart
# ---------------------------------------------------------------------------

class _ExactEval:
    """Chart evaluators through the closed-form caustic flow."""

    def __init__(self, eng: _EllipseEngine, flow: _CausticFlow):
        self.eng = eng
        self.flow = flow

    def t_of_theta(self, theta):
        return self.flow.t_of_theta(theta)

    def S(self, theta):
        t = self.flow.t_of_theta(theta)
        wind = np.floor(np.asarray(t) / TWO_PI)
        return self.eng.s_of_t(t - wind * TWO_PI) + wind * self.eng.perimeter

    def Phi(self, theta):
        return self.flow.reflection_angle(self.flow.t_of_theta(theta))

    def Xq(self, theta):
        t = self.flow.t_of_theta(theta)
        wind = np.floor(np.asarray(t) / TWO_PI)
        return self.eng.x_of_t(t - wind * TWO_PI) + wind

    def dXq(self, theta):
        t = self.flow.t_of_theta(theta)
        return self.eng.dx_dt(t) / self.flow.dtheta_dt(t)

    def Yq(self, theta):
        t = self.flow.t_of_theta(theta)
        phi = self.flow.reflection_angle(t)
        rho3 = self.eng.rho(t) ** (1.0 / 3.0)
        return 4.0 * self.eng.lazutkin_constant * rho3 * np.sin(phi / 2.0)

    def Xq_inv(self, x):
        x = np.asarray(x, dtype=float)
        wind = np.floor(x)
        t = self.eng.t_of_x(x - wind)
        return self.flow.theta_of_t(t) + wind

    def eta(self, x):
        x = np.asarray(x, dtype=float)
        t = self.eng.t_of_x(np.mod(x, 1.0))
        return np.sqrt(self.flow.Z) / self.eng.speed(t)


class _TableEval:
    """Chart evaluators from dense tables (fallback construction)."""

    def __init__(self, eng: _EllipseEngine, flow: _CausticFlow,
                 theta: np.ndarray, t_of_theta: np.ndarray):
        self.eng = eng
        self.flow = flow
        th_ext = np.append(theta, 1.0)
        t_ext = np.append(t_of_theta, t_of_theta[0] + TWO_PI)
        self._t_interp = PchipInterpolator(th_ext, t_ext)
        x_ext = np.append(eng.x_of_t(np.mod(t_ext[:-1], TWO_PI)), 0.0)
        x_ext = np.mod(x_ext - x_ext[0], 1.0)
        x_ext[-1] = 1.0
        self._xq_interp = PchipInterpolator(th_ext, x_ext)
        self._dxq_interp = self._xq_interp.derivative()
        self._theta_of_x = PchipInterpolator(x_ext, th_ext)

    def t_of_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        wind = np.floor(theta)
        return self._t_interp(theta - wind) + wind * TWO_PI

    def S(self, theta):
        t = self.t_of_theta(theta)
        wind = np.floor(np.asarray(t) / TWO_PI)
        return self.eng.s_of_t(t - wind * TWO_PI) + wind * self.eng.perimeter

    def Phi(self, theta):
        return self.flow.reflection_angle(self.t_of_theta(theta))

    def Xq(self, theta):
        theta = np.asarray(theta, dtype=float)
        wind = np.floor(theta)
        return self._xq_interp(theta - wind) + wind

    def dXq(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self._dxq_interp(theta - np.floor(theta))

    def Yq(self, theta):
        t = self.t_of_theta(theta)
        phi = self.flow.reflection_angle(t)
        rho3 = self.eng.rho(np.mod(t, TWO_PI)) ** (1.0 / 3.0)
        return 4.0 * self.eng.lazutkin_constant * rho3 * np.sin(phi / 2.0)

    def Xq_inv(self, x):
        x = np.asarray(x, dtype=float)
        wind = np.floor(x)
        return self._theta_of_x(x - wind) + wind

    def eta(self, x):
        x = np.asarray(x, dtype=float)
        t = self.eng.t_of_x(np.mod(x, 1.0))
        return np.sqrt(self.flow.Z) / self.eng.speed(t)


@dataclass
class AAChart:
    """Action-angle conjugacy of the elliptic billiard at rotation number 1/q.

    S(theta) and Phi(theta) satisfy billiard(S(theta), Phi(theta)) =
    (S(theta + 1/q), Phi(theta + 1/q)) with S(0) = 0; Xq, Yq are the Lazutkin
    images and eta(x) = sin Phi(Xq^{-1}(x)).
    """

    pose: EllipsePose
    q: int
    caustic: ConfocalCaustic
    theta: np.ndarray
    S: np.ndarray
    Phi: np.ndarray
    Xq: np.ndarray
    Yq: np.ndarray
    dXq: np.ndarray
    density_residual: float
    source: str           # "closed-form" or "orbit-normalized"
    _eval: object = None

    def S_of(self, theta):
        return self._eval.S(theta)

    def Phi_of(self, theta):
        return self._eval.Phi(theta)

    def Xq_of(self, theta):
        return self._eval.Xq(theta)

    def Yq_of(self, theta):
        return self._eval.Yq(theta)

    def dXq_of(self, theta):
        return self._eval.dXq(theta)

    def Xq_inv(self, x):
        return self._eval.Xq_inv(x)

    def eta_of(self, x):
        return self._eval.eta(x)

    def t_of_theta(self, theta):
        return self._eval.t_of_theta(theta)

    @property
    def engine(self):
        """Closed-form geometry engine of the chart's ellipse."""
        return self._eval.eng

    def orbit_vertices(self, theta0: float):
        """Cartesian vertices of the inscribed orbit polygon through theta0."""
        thetas = theta0 + np.arange(self.q) / self.q
        t = np.mod(self.t_of_theta(thetas), TWO_PI)
        return self._eval.eng.point(t), thetas

    def orbit_perimeter(self, theta0):
        theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
        thetas = theta0[:, None] + np.arange(self.q)[None, :] / self.q
        t = np.mod(self.t_of_theta(thetas), TWO_PI)
        pts = self._eval.eng.point(t)
        edges = np.roll(pts, -1, axis=1) - pts
        return np.linalg.norm(edges, axis=-1).sum(axis=1)

    def export_rows(self):
        return [
            (float(th), float(s), float(p), float(xq), float(yq), float(dxq))
            for th, s, p, xq, yq, dxq in zip(
                self.theta, self.S, self.Phi, self.Xq, self.Yq, self.dXq)
        ]


def _fallback_eval(eng: _EllipseEngine, flow: _CausticFlow, q: int,
                   nodes: int) -> tuple[_TableEval, np.ndarray, np.ndarray]:
    """Orbit-normalized conjugacy: seed theta on one fundamental segment by
    arc-length fraction, then push forward with the tangency map so that each
    step advances theta by exactly 1/q."""
    n_seg = max(nodes // q + 1, 8)
    t1 = float(flow.step(0.0))
    s_seed = np.linspace(eng.s_of_t(0.0), eng.s_of_t(t1), n_seg + 1)[:-1]
    t_seed = eng.t_of_s(s_seed)
    cols = [t_seed]
    t = t_seed
    for _ in range(1, q):
        t = flow.step(t)
        cols.append(t)
    t_table = np.concatenate([np.stack(cols, axis=0)[k] for k in range(q)])
    theta = (np.arange(q * n_seg)) / (q * n_seg)
    ev = _TableEval(eng, flow, theta, t_table)
    return ev, theta, t_table


def build_chart(pose: EllipsePose, q: int, nodes: int = 4096,
                force_fallback: bool = False) -> AAChart:
    """Construct the action-angle chart at rotation number 1/q.

    The closed-form density is accepted only if the invariance equation holds
    to DENSITY_TOL on a probe grid; otherwise the orbit-normalized fallback is
    used and checked against the billiard map itself.
    """
    if q <= 2:
        raise ValueError("charts need q > 2")
    if pose.eccentricity >= 0.9:
        raise ValueError("charts restricted to eccentricity < 0.9")
    eng = _EllipseEngine(pose)
    caustic = caustic_from_rotation_number(pose, 1.0 / q)
    flow = _CausticFlow(eng, caustic.Z)
    residual = flow.invariance_residual()
    if residual < DENSITY_TOL and not force_fallback:
        ev = _ExactEval(eng, flow)
        source = "closed-form"
        theta = np.arange(nodes) / nodes
    else:
        ev, theta, _ = _fallback_eval(eng, flow, q, nodes)
        source = "orbit-normalized"
    chart = AAChart(
        pose=pose,
        q=q,
        caustic=caustic,
        theta=theta,
        S=np.asarray(ev.S(theta)),
        Phi=np.asarray(ev.Phi(theta)),
        Xq=np.asarray(ev.Xq(theta)),
        Yq=np.asarray(ev.Yq(theta)),
        dXq=np.asarray(ev.dXq(theta)),
        density_residual=residual,
        source=source,
        _eval=ev,
    )
    if source == "orbit-normalized":
        res = conjugacy_residual(chart, n_theta=64)
        if res > CONJUGACY_TOL:
            raise ChartError(
                f"fallback conjugacy residual {res:.3e} above {CONJUGACY_TOL}")
    return chart


_CHART_CACHE: dict = {}
_CHART_CACHE_MAX = 256


def get_chart(pose: EllipsePose, q: int, nodes: int = 4096) -> AAChart:
    """Memoized build_chart; charts are immutable and safe to share."""
    key = (pose, q, nodes)
    if key not in _CHART_CACHE:
        if len(_CHART_CACHE) >= _CHART_CACHE_MAX:
            _CHART_CACHE.pop(next(iter(_CHART_CACHE)))
        _CHART_CACHE[key] = build_chart(pose, q, nodes)
    return _CHART_CACHE[key]


def conjugacy_residual(chart: AAChart, n_theta: int = 64) -> float:
    """max over theta of |S(theta + 1/q) - billiard s-step of (S, Phi)(theta)|,
    measured on the universal cover."""
    thetas = np.arange(n_theta) / n_theta
    s0 = np.mod(chart.S_of(thetas), chart.pose.perimeter)
    phi0 = np.asarray(chart.Phi_of(thetas))
    s1, _ = dynamics.billiard_step_arrays(chart.pose, s0, phi0)
    s1_chart = np.mod(chart.S_of(thetas + 1.0 / chart.q), chart.pose.perimeter)
    diff = np.abs(np.mod(s1 - s1_chart + 0.5 * chart.pose.perimeter,
                         chart.pose.perimeter) - 0.5 * chart.pose.perimeter)
    return float(np.max(diff))
