"""Convex planar boundaries: ellipses plus trigonometric normal perturbations.

The canonical ellipse of eccentricity e is centered, axis-aligned, and has
perimeter 1; its semi-major axis is a = 1/(4E(e)) with E the complete elliptic
integral of the second kind.  Arc length, curvature radius and the Lazutkin
boundary parametrization

    x(s) = C * integral_0^s rho(sigma)^(-2/3) d sigma,   x(perimeter) = 1,

all have closed forms in incomplete elliptic integrals, so every quantity on an
exact ellipse is evaluated to machine precision.  A perturbed boundary is the
normal graph of a trigonometric polynomial n(x) over its base ellipse (x is the
base Lazutkin parameter); its own arc length and Lazutkin chart are built from
dense tables on a uniform periodic grid with spectral quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import PchipInterpolator

from .elliptic import complete_first, complete_second, incomplete_first, incomplete_second

TABLE_NODES = 4096      # dense chart tables for perturbed boundaries
NORM_GRID = 2048        # grid used for C0/C1 sup-norms and inner products
DEFAULT_DEGREE = 32     # default trigonometric degree of perturbations
GUARD_MODES = 8         # extra modes kept when re-expressing about a new ellipse
REACH_FRACTION = 0.5    # perturbations above reach * this fraction are rejected
FIT_RTOL = 1e-9         # relative residual tolerance of trigonometric fits

TWO_PI = 2.0 * math.pi


class ConvexityError(ValueError):
    """The realized curve fails strict convexity (rho <= 0 somewhere)."""


class ReachError(ValueError):
    """A normal graph leaves the tubular neighborhood of its base ellipse."""


class FitResidualError(ValueError):
    """A trigonometric fit left a residual above tolerance."""


# ---------------------------------------------------------------------------
# ellipse pose
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EllipsePose:
    """An ellipse in the plane: eccentricity, center, tilt and overall scale.

    ``scale`` multiplies the canonical perimeter-1 ellipse, so the perimeter
    equals ``scale`` exactly and the semi-major axis is scale/(4E(e)).
    """

    eccentricity: float
    center: tuple[float, float] = (0.0, 0.0)
    tilt: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.eccentricity < 1.0):
            raise ValueError(f"eccentricity must be in [0,1), got {self.eccentricity}")
        if not self.scale > 0.0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @property
    def m(self) -> float:
        """Elliptic parameter m = e^2."""
        return self.eccentricity ** 2

    @property
    def semi_major(self) -> float:
        return self.scale / (4.0 * complete_second(self.m))

    @property
    def semi_minor(self) -> float:
        return self.semi_major * math.sqrt(1.0 - self.m)

    @property
    def focal_distance(self) -> float:
        """Distance h from center to each focus; h^2 = a^2 e^2."""
        return self.semi_major * self.eccentricity

    @property
    def perimeter(self) -> float:
        return self.scale

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.tilt), math.sin(self.tilt)
        return np.array([[c, -s], [s, c]])

    def to_world(self, p_local):
        p_local = np.asarray(p_local, dtype=float)
        return p_local @ self.rotation().T + np.asarray(self.center)

    def to_local(self, p_world):
        p_world = np.asarray(p_world, dtype=float)
        return (p_world - np.asarray(self.center)) @ self.rotation()

    def vec_to_world(self, v_local):
        return np.asarray(v_local, dtype=float) @ self.rotation().T

    def vec_to_local(self, v_world):
        return np.asarray(v_world, dtype=float) @ self.rotation()

    def canonical(self) -> "EllipsePose":
        return replace(self, center=(0.0, 0.0), tilt=0.0)


# ---------------------------------------------------------------------------
# trigonometric perturbation series
# ---------------------------------------------------------------------------

@dataclass
class PerturbationSeries:
    """n(x) = cos_[0] + sum_j cos_[j] cos(2 pi j x) + sin_[j] sin(2 pi j x).

    x lives on the unit circle [0, 1).  ``grid`` is the resolution used for
    sup-norm surrogates.
    """

    cos: np.ndarray
    sin: np.ndarray
    grid: int = NORM_GRID

    def __post_init__(self):
        self.cos = np.atleast_1d(np.asarray(self.cos, dtype=float))
        self.sin = np.atleast_1d(np.asarray(self.sin, dtype=float))
        if self.sin.size != self.cos.size - 1:
            raise ValueError("sin coefficients must number one fewer than cos")

    @property
    def degree(self) -> int:
        return self.cos.size - 1

    @classmethod
    def zero(cls, degree: int = DEFAULT_DEGREE, grid: int = NORM_GRID):
        return cls(np.zeros(degree + 1), np.zeros(degree), grid)

    @classmethod
    def single_cos(cls, j: int, amplitude: float, degree: int | None = None,
                   grid: int = NORM_GRID):
        degree = max(j, DEFAULT_DEGREE) if degree is None else degree
        c = np.zeros(degree + 1)
        c[j] = amplitude
        return cls(c, np.zeros(degree), grid)

    @classmethod
    def from_samples(cls, values: np.ndarray, degree: int,
                     grid: int = NORM_GRID, rtol: float | None = FIT_RTOL):
        """Least-squares trigonometric fit of uniform periodic samples via FFT.

        With len(values) >= 2*degree+1 the truncated FFT is the exact L2
        projection onto the degree-limited space.  If ``rtol`` is not None the
        reconstruction must match the samples to rtol (relative to the sample
        sup plus 1) or FitResidualError is raised.
        """
        values = np.asarray(values, dtype=float)
        n = values.size
        spec = np.fft.rfft(values) / n
        jmax = min(degree, spec.size - 1)
        cosc = np.zeros(degree + 1)
        sinc = np.zeros(degree)
        cosc[0] = spec[0].real
        cosc[1:jmax + 1] = 2.0 * spec[1:jmax + 1].real
        sinc[:jmax] = -2.0 * spec[1:jmax + 1].imag
        series = cls(cosc, sinc, grid)
        if rtol is not None:
            xs = np.arange(n) / n
            resid = np.max(np.abs(series(xs) - values))
            scale = max(1.0, float(np.max(np.abs(values))))
            if resid > rtol * scale:
                raise FitResidualError(
                    f"trigonometric fit residual {resid:.3e} above "
                    f"{rtol:.1e} * {scale:.3e}")
        return series

    def _harmonics(self, x):
        x = np.asarray(x, dtype=float)
        j = np.arange(1, self.degree + 1)
        ang = TWO_PI * np.multiply.outer(x, j)
        return ang, j

    def __call__(self, x):
        ang, _ = self._harmonics(x)
        val = self.cos[0] + np.cos(ang) @ self.cos[1:] + np.sin(ang) @ self.sin
        return val

    def derivative(self, x):
        ang, j = self._harmonics(x)
        w = TWO_PI * j
        return -np.sin(ang) @ (w * self.cos[1:]) + np.cos(ang) @ (w * self.sin)

    def second_derivative(self, x):
        ang, j = self._harmonics(x)
        w = (TWO_PI * j) ** 2
        return -np.cos(ang) @ (w * self.cos[1:]) - np.sin(ang) @ (w * self.sin)

    def scaled(self, factor: float) -> "PerturbationSeries":
        return PerturbationSeries(self.cos * factor, self.sin * factor, self.grid)

    def c0_norm(self) -> float:
        xs = np.arange(self.grid) / self.grid
        return float(np.max(np.abs(self(xs))))

    def c1_norm(self) -> float:
        xs = np.arange(self.grid) / self.grid
        return float(np.max(np.abs(self(xs))) + np.max(np.abs(self.derivative(xs))))

    def is_zero(self) -> bool:
        return not (np.any(self.cos) or np.any(self.sin))


# ---------------------------------------------------------------------------
# boundary specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundarySpec:
    """A domain boundary: a base ellipse plus an optional normal perturbation."""

    base: EllipsePose
    perturbation: PerturbationSeries | None = None

    def to_dict(self) -> dict:
        d = {
            "base": {
                "e": self.base.eccentricity,
                "center": list(self.base.center),
                "tilt": self.base.tilt,
                "scale": self.base.scale,
            }
        }
        if self.perturbation is not None and not self.perturbation.is_zero():
            d["perturbation"] = {
                "cos": self.perturbation.cos.tolist(),
                "sin": self.perturbation.sin.tolist(),
            }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BoundarySpec":
        b = d["base"]
        pose = EllipsePose(b["e"], tuple(b.get("center", (0.0, 0.0))),
                           b.get("tilt", 0.0), b.get("scale", 1.0))
        pert = None
        if "perturbation" in d and d["perturbation"] is not None:
            p = d["perturbation"]
            pert = PerturbationSeries(np.asarray(p["cos"]), np.asarray(p["sin"]))
        return cls(pose, pert)


@dataclass
class CurveSample:
    """A boundary point with its local frame, in curve and chart coordinates."""

    t: np.ndarray          # internal curve parameter, radians
    s: np.ndarray          # arc length from the parameter origin
    x: np.ndarray          # Lazutkin parameter in [0, 1)
    position: np.ndarray   # (..., 2) Cartesian
    tangent: np.ndarray    # (..., 2) unit, counter-clockwise
    normal: np.ndarray     # (..., 2) unit, outward
    rho: np.ndarray        # curvature radius


def _periodic_antiderivative(f_nodes: np.ndarray) -> tuple[np.ndarray, float]:
    """Cumulative integral of a smooth periodic function sampled uniformly.

    ``f_nodes`` samples f on u_j = j/N over [0, 1).  Returns the node values of
    F(u_j) = int_0^{u_j} f du (spectrally accurate) and the full integral.
    """
    n = f_nodes.size
    spec = np.fft.rfft(f_nodes) / n
    mean = spec[0].real
    k = np.arange(1, spec.size)
    gspec = np.zeros_like(spec)
    gspec[1:] = spec[1:] / (2j * np.pi * k)
    g = np.fft.irfft(gspec * n, n)
    g -= g[0]
    u = np.arange(n) / n
    return mean * u + g, mean


class _EllipseEngine:
    """Closed-form geometry of a posed ellipse, vectorized in the parameter t.

    In the canonical frame the curve is (a cos t, b sin t); w(t) = |dP/dt|,
    rho = w^3/(ab), s(t) = a [E(m) - E(pi/2 - t, m)], and the Lazutkin
    parameter is x(t) = [K(m) - F(pi/2 - t, m)] / (4 K(m)).
    """

    def __init__(self, pose: EllipsePose):
        self.pose = pose
        self.a = pose.semi_major
        self.b = pose.semi_minor
        self.m = pose.m
        self.K = float(complete_first(self.m))
        self.E = float(complete_second(self.m))
        self.perimeter = pose.perimeter
        # C = [int rho^{-2/3} ds]^{-1}
        self.lazutkin_constant = self.a ** (1.0 / 3.0) / (
            4.0 * self.K * self.b ** (2.0 / 3.0))
        # coarse monotone tables for Newton initial guesses
        tg = np.linspace(0.0, TWO_PI, 1025)
        self._t_nodes = tg
        self._s_nodes = self.s_of_t(tg)
        self._x_nodes = self.x_of_t(tg)

    # -- scalar fields of t ------------------------------------------------
    def speed(self, t):
        t = np.asarray(t, dtype=float)
        return np.sqrt((self.a * np.sin(t)) ** 2 + (self.b * np.cos(t)) ** 2)

    def speed_deriv(self, t):
        t = np.asarray(t, dtype=float)
        return (self.a ** 2 - self.b ** 2) * np.sin(t) * np.cos(t) / self.speed(t)

    def rho(self, t):
        return self.speed(t) ** 3 / (self.a * self.b)

    def rho_deriv_t(self, t):
        return 3.0 * self.speed(t) ** 2 * self.speed_deriv(t) / (self.a * self.b)

    def s_of_t(self, t):
        t = np.asarray(t, dtype=float)
        return self.a * (self.E - incomplete_second(np.pi / 2.0 - t, self.m))

    def x_of_t(self, t):
        t = np.asarray(t, dtype=float)
        return (self.K - incomplete_first(np.pi / 2.0 - t, self.m)) / (4.0 * self.K)

    def dx_dt(self, t):
        return self.a / (4.0 * self.K * self.speed(t))

    def mu_of_t(self, t):
        return 1.0 / (2.0 * self.lazutkin_constant * self.rho(t) ** (1.0 / 3.0))

    # -- inversions ---------------------------------------------------------
    def _newton_invert(self, target, fwd, dfwd, nodes_y, period_y):
        """Invert the monotone degree-1 map fwd (t -> y) at given y values."""
        y = np.asarray(target, dtype=float)
        wind = np.floor(y / period_y)
        yr = y - wind * period_y
        t = np.interp(yr, nodes_y, self._t_nodes)
        for _ in range(8):
            err = fwd(t) - yr
            t = t - err / dfwd(t)
        return t + wind * TWO_PI

    def t_of_s(self, s):
        return self._newton_invert(s, self.s_of_t, self.speed,
                                   self._s_nodes, self.perimeter)

    def t_of_x(self, x):
        return self._newton_invert(x, self.x_of_t, self.dx_dt,
                                   self._x_nodes, 1.0)

    # -- embedded frame -----------------------------------------------------
    def point(self, t):
        t = np.asarray(t, dtype=float)
        local = np.stack([self.a * np.cos(t), self.b * np.sin(t)], axis=-1)
        return self.pose.to_world(local)

    def point_local(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([self.a * np.cos(t), self.b * np.sin(t)], axis=-1)

    def accel(self, t):
        """d^2 P / dt^2 as a world vector."""
        t = np.asarray(t, dtype=float)
        local = np.stack([-self.a * np.cos(t), -self.b * np.sin(t)], axis=-1)
        return self.pose.vec_to_world(local)

    def tangent(self, t):
        t = np.asarray(t, dtype=float)
        w = self.speed(t)
        local = np.stack([-self.a * np.sin(t) / w, self.b * np.cos(t) / w], axis=-1)
        return self.pose.vec_to_world(local)

    def outward_normal(self, t):
        tg = self.tangent(t)
        return np.stack([tg[..., 1], -tg[..., 0]], axis=-1)

    def sample(self, t) -> CurveSample:
        t = np.asarray(t, dtype=float)
        return CurveSample(
            t=t,
            s=self.s_of_t(t),
            x=np.mod(self.x_of_t(t), 1.0),
            position=self.point(t),
            tangent=self.tangent(t),
            normal=self.outward_normal(t),
            rho=self.rho(t),
        )


class Boundary:
    """Realized boundary curve of a BoundarySpec.

    The internal parameter tau runs over [0, 2 pi).  For an exact ellipse tau
    is the usual elliptic parameter of (a cos t, b sin t); for a perturbed
    boundary tau = 2 pi u where u is the Lazutkin parameter of the *base*
    ellipse along whose normals the perturbation is measured.
    """

    def __init__(self, spec: BoundarySpec):
        if isinstance(spec, EllipsePose):
            spec = BoundarySpec(spec)
        self.spec = spec
        self.base = _EllipseEngine(spec.base)
        pert = spec.perturbation
        if pert is not None and pert.is_zero():
            pert = None
        self.perturbation = pert
        if pert is not None:
            reach = float(np.min(self.base.rho(np.linspace(0, TWO_PI, 512))))
            if pert.c0_norm() >= REACH_FRACTION * reach:
                raise ReachError(
                    f"perturbation sup {pert.c0_norm():.3e} exceeds "
                    f"{REACH_FRACTION} * base reach {reach:.3e}")
            self._build_tables()

    @property
    def is_ellipse(self) -> bool:
        return self.perturbation is None

    # -- lifted curve (perturbed path) --------------------------------------
    def _lift_frames(self, u):
        """Position and first two u-derivatives of the lifted curve at base
        Lazutkin parameter u, plus the base frame quantities."""
        eng, n = self.base, self.perturbation
        u = np.asarray(u, dtype=float)
        t = eng.t_of_x(u)
        w = eng.speed(t)
        rho = eng.rho(t)
        dt_du = 4.0 * eng.K * w / eng.a
        ds_du = w * dt_du
        wp = eng.speed_deriv(t)
        dt_du2 = (4.0 * eng.K / eng.a) * wp * dt_du
        d2s_du2 = wp * dt_du ** 2 + w * dt_du2
        nv = n(u)
        n1 = n.derivative(u)
        n2 = n.second_derivative(u)
        T = eng.tangent(t)
        N = eng.outward_normal(t)
        P = eng.point(t)
        # Q = P + n N; dT/du = -(ds/du / rho) N; dN/du = (ds/du / rho) T
        kappa_du = ds_du / rho
        A = ds_du * (1.0 + nv / rho)
        Q = P + nv[..., None] * N
        Qu = A[..., None] * T + n1[..., None] * N
        rho_u = eng.rho_deriv_t(t) * dt_du
        A_u = d2s_du2 * (1.0 + nv / rho) + ds_du * (n1 / rho - nv * rho_u / rho ** 2)
        Quu = ((A_u + n1 * kappa_du)[..., None] * T
               + (n2 - A * kappa_du)[..., None] * N)
        return Q, Qu, Quu

    def _build_tables(self):
        n = TABLE_NODES
        u = np.arange(n) / n
        Q, Qu, Quu = self._lift_frames(u)
        speed_u = np.linalg.norm(Qu, axis=-1)
        cross = Qu[:, 0] * Quu[:, 1] - Qu[:, 1] * Quu[:, 0]
        if np.any(cross <= 0.0):
            raise ConvexityError("lifted boundary is not strictly convex")
        rho = speed_u ** 3 / cross
        s_nodes, total = _periodic_antiderivative(speed_u)
        self._perimeter = total
        lz_nodes, lz_total = _periodic_antiderivative(rho ** (-2.0 / 3.0) * speed_u)
        self._lazutkin_constant = 1.0 / lz_total
        x_nodes = lz_nodes * self._lazutkin_constant
        u_ext = np.append(u, 1.0)
        s_ext = np.append(s_nodes, total)
        x_ext = np.append(x_nodes, 1.0)
        self._u_nodes, self._s_nodes, self._x_nodes = u_ext, s_ext, x_ext
        self._rho_nodes = np.append(rho, rho[0])
        self._s_of_u = PchipInterpolator(u_ext, s_ext)
        self._x_of_u = PchipInterpolator(u_ext, x_ext)
        self._ds_of_u = self._s_of_u.derivative()
        self._dx_of_u = self._x_of_u.derivative()
        # coarse inverse tables give Newton starting points; the inverses
        # themselves are exact inverses of the forward interpolants
        self._u_guess_s = PchipInterpolator(s_ext, u_ext)
        self._u_guess_x = PchipInterpolator(x_ext, u_ext)

    @staticmethod
    def _invert_monotone(fwd, dfwd, guess, y):
        u = np.clip(guess(y), 0.0, 1.0)
        for _ in range(6):
            u = np.clip(u - (fwd(u) - y) / dfwd(u), 0.0, 1.0)
        return u

    def _u_of_s(self, sr):
        return self._invert_monotone(self._s_of_u, self._ds_of_u,
                                     self._u_guess_s, sr)

    def _u_of_x(self, xr):
        return self._invert_monotone(self._x_of_u, self._dx_of_u,
                                     self._u_guess_x, xr)

    # -- public surface, uniform over both paths ----------------------------
    @property
    def perimeter(self) -> float:
        return self.base.perimeter if self.is_ellipse else self._perimeter

    @property
    def lazutkin_constant(self) -> float:
        if self.is_ellipse:
            return self.base.lazutkin_constant
        return self._lazutkin_constant

    def _u(self, tau):
        return np.mod(np.asarray(tau, dtype=float) / TWO_PI, 1.0)

    def point(self, tau):
        if self.is_ellipse:
            return self.base.point(tau)
        Q, _, _ = self._lift_frames(self._u(tau))
        return Q

    def velocity(self, tau):
        """dP/dtau."""
        if self.is_ellipse:
            tau = np.asarray(tau, dtype=float)
            w = self.base.speed(tau)
            return self.base.tangent(tau) * w[..., None]
        _, Qu, _ = self._lift_frames(self._u(tau))
        return Qu / TWO_PI

    def acceleration(self, tau):
        """d^2 P / d tau^2."""
        if self.is_ellipse:
            return self.base.accel(tau)
        _, _, Quu = self._lift_frames(self._u(tau))
        return Quu / TWO_PI ** 2

    def tangent(self, tau):
        v = self.velocity(tau)
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    def outward_normal(self, tau):
        tg = self.tangent(tau)
        return np.stack([tg[..., 1], -tg[..., 0]], axis=-1)

    def speed(self, tau):
        return np.linalg.norm(self.velocity(tau), axis=-1)

    def curvature_radius(self, tau):
        if self.is_ellipse:
            return self.base.rho(tau)
        _, Qu, Quu = self._lift_frames(self._u(tau))
        cross = Qu[..., 0] * Quu[..., 1] - Qu[..., 1] * Quu[..., 0]
        return np.linalg.norm(Qu, axis=-1) ** 3 / cross

    def s_of_tau(self, tau):
        if self.is_ellipse:
            return self.base.s_of_t(tau)
        tau = np.asarray(tau, dtype=float)
        wind = np.floor(tau / TWO_PI)
        return self._s_of_u(self._u(tau)) + wind * self.perimeter

    def tau_of_s(self, s):
        if self.is_ellipse:
            return self.base.t_of_s(s)
        s = np.asarray(s, dtype=float)
        wind = np.floor(s / self.perimeter)
        sr = s - wind * self.perimeter
        return TWO_PI * (self._u_of_s(sr) + wind)

    def x_of_s(self, s):
        if self.is_ellipse:
            return self.base.x_of_t(self.base.t_of_s(s))
        s = np.asarray(s, dtype=float)
        wind = np.floor(s / self.perimeter)
        sr = s - wind * self.perimeter
        return self._x_of_u(self._u_of_s(sr)) + wind

    def s_of_x(self, x):
        if self.is_ellipse:
            return self.base.s_of_t(self.base.t_of_x(x))
        x = np.asarray(x, dtype=float)
        wind = np.floor(x)
        return self._s_of_u(self._u_of_x(x - wind)) + wind * self.perimeter

    def tau_of_x(self, x):
        if self.is_ellipse:
            return self.base.t_of_x(x)
        x = np.asarray(x, dtype=float)
        wind = np.floor(x)
        return TWO_PI * (self._u_of_x(x - wind) + wind)

    def rho_of_s(self, s):
        return self.curvature_radius(self.tau_of_s(s))

    def mu_of_x(self, x):
        """Lazutkin density mu(x) = 1 / (2 C rho(x)^(1/3))."""
        rho = self.curvature_radius(self.tau_of_x(x))
        return 1.0 / (2.0 * self.lazutkin_constant * rho ** (1.0 / 3.0))

    def sample(self, tau) -> CurveSample:
        tau = np.asarray(tau, dtype=float)
        s = self.s_of_tau(np.mod(tau, TWO_PI))
        return CurveSample(
            t=tau,
            s=s,
            x=np.mod(self.x_of_s(s), 1.0),
            position=self.point(tau),
            tangent=self.tangent(tau),
            normal=self.outward_normal(tau),
            rho=self.curvature_radius(tau),
        )


def as_boundary(omega) -> Boundary:
    """Coerce BoundarySpec / EllipsePose / Boundary to a Boundary."""
    if isinstance(omega, Boundary):
        return omega
    if isinstance(omega, EllipsePose):
        return Boundary(BoundarySpec(omega))
    return Boundary(omega)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def ellipse_geometry(pose: EllipsePose, t) -> CurveSample:
    """Geometry of the posed ellipse at parameter t: position, frame, s, x, rho."""
    return _EllipseEngine(pose).sample(t)


@dataclass
class LazutkinChart:
    """The curvature^(-2/3) boundary chart of a fixed strictly convex boundary."""

    boundary: Boundary
    constant: float = field(init=False)

    def __post_init__(self):
        self.constant = self.boundary.lazutkin_constant

    def x_of_s(self, s):
        return self.boundary.x_of_s(s)

    def s_of_x(self, x):
        return self.boundary.s_of_x(x)

    def mu(self, x):
        return self.boundary.mu_of_x(x)


def lazutkin_chart(omega) -> LazutkinChart:
    """Build the Lazutkin chart { x(s), s(x), C, mu(x) } of a boundary."""
    return LazutkinChart(as_boundary(omega))


def boundary_point(omega, x) -> CurveSample:
    """Sample of the realized boundary over base Lazutkin parameter x.

    The position is base point plus n(x) times the base outward normal; the
    frame and curvature radius are those of the lifted curve.
    """
    bnd = as_boundary(omega)
    if bnd.is_ellipse:
        return bnd.sample(bnd.base.t_of_x(x))
    return bnd.sample(TWO_PI * np.asarray(x, dtype=float))


def _project_onto_normal_lines(bnd: Boundary, ebar: EllipsePose,
                               xbar: np.ndarray) -> np.ndarray:
    """Signed offsets of the curve ``bnd`` along the normal lines of ``ebar``.

    For each Lazutkin parameter in ``xbar`` the intersection of ebar's normal
    line with the curve is found by a coarse nearest-sample scan followed by
    Newton on <Q(tau) - Pbar, Tbar> = 0.
    """
    eng = _EllipseEngine(ebar)
    tbar = eng.t_of_x(xbar)
    Pbar = eng.point(tbar)
    Tbar = eng.tangent(tbar)
    Nbar = eng.outward_normal(tbar)

    scan = np.linspace(0.0, TWO_PI, 257)[:-1]
    Qs = bnd.point(scan)
    d2 = ((Qs[None, :, :] - Pbar[:, None, :]) ** 2).sum(axis=-1)
    tau = scan[np.argmin(d2, axis=1)]

    scale = max(bnd.perimeter, ebar.perimeter)
    tol = 1e-13 * scale
    for _ in range(60):
        Q = bnd.point(tau)
        g = ((Q - Pbar) * Tbar).sum(axis=-1)
        if np.max(np.abs(g)) < tol:
            break
        dg = (bnd.velocity(tau) * Tbar).sum(axis=-1)
        step = g / dg
        step = np.clip(step, -0.1, 0.1)  # keep Newton local
        tau = tau - step
    else:
        raise FitResidualError("normal-line projection did not converge")
    Q = bnd.point(tau)
    offsets = ((Q - Pbar) * Nbar).sum(axis=-1)
    reach = float(np.min(eng.rho(np.linspace(0, TWO_PI, 512))))
    if np.max(np.abs(offsets)) >= REACH_FRACTION * reach:
        raise ReachError("curve leaves the tubular neighborhood of the target "
                         "ellipse")
    return offsets


def reexpress(omega, ebar: EllipsePose, degree: int | None = None,
              grid: int = NORM_GRID) -> PerturbationSeries:
    """Re-express a boundary as a normal graph over the ellipse ``ebar``.

    Samples the signed normal offset of the boundary on a uniform grid of
    ebar's Lazutkin parameter and fits a trigonometric polynomial of the
    stated degree (input degree plus guard modes by default).
    """
    bnd = as_boundary(omega)
    if degree is None:
        base_deg = (bnd.perturbation.degree if bnd.perturbation is not None
                    else DEFAULT_DEGREE)
        degree = base_deg + GUARD_MODES
    xbar = np.arange(grid) / grid
    offsets = _project_onto_normal_lines(bnd, ebar, xbar)
    return PerturbationSeries.from_samples(offsets, degree, grid)
