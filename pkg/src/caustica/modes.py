"""Deformed Fourier modes, the mu-weighted projection machinery and the
iterated best-ellipse fit.

For each rotation number 1/q the dynamical modes

    c_q(x) = [q eta_q(x) / (w_q mu(x))] [1 / X_q'(X_q^{-1}(x))] cos(2 pi q X_q^{-1}(x))

(s_q with sine) converge to the plain Fourier modes as q grows, with deviation
O(1/q) controlled by the eccentricity.  Five geometric modes span the tangent
space of the ellipse family: c0 (homothety), c1/s1 (translation) and c2/s2
(hyperbolic rotation about an arbitrary axis); they are mu-orthogonal to every
dynamical mode, which is what makes the five-mode projection meaningful.

The renamed basis e_0 = c_0, e_{2j} = sqrt(2) c_j, e_{2j-1} = sqrt(2) s_j is
normalized here to unit L^2(dx) norm.  The raw geometric modes c0, c2, s2
carry the radial factor of the perimeter-1 ellipse (about 1/(2 pi)), so the
literal sqrt(2)-scaling alone would not reduce to the orthonormal Fourier
basis on the circle; the exact normalization restores that limit and is a
no-op for the dynamical modes at e = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .action_angle import AAChart, get_chart
from .elliptic import complete_second
from .geometry import (
    NORM_GRID,
    Boundary,
    EllipsePose,
    PerturbationSeries,
    ReachError,
    _EllipseEngine,
    as_boundary,
    reexpress,
)

MODE_GRID = NORM_GRID      # sampling grid for all mode tables
GRAM_COND_LIMIT = 1e8


def w_q(q: int) -> float:
    """w_q = q sin(pi/q) / pi, the regular-q-gon perimeter on the unit-perimeter circle."""
    return q * math.sin(math.pi / q) / math.pi


@dataclass
class ModeTable:
    """A mode sampled on the uniform Lazutkin grid."""

    index: int
    provenance: str            # "base" or "dynamical(q)"
    x: np.ndarray
    samples: np.ndarray

    def l2_norm(self) -> float:
        return float(np.sqrt(np.mean(self.samples ** 2)))


def _grid(grid: int) -> np.ndarray:
    return np.arange(grid) / grid


def _mu_on_grid(pose: EllipsePose, x: np.ndarray) -> np.ndarray:
    return np.asarray(as_boundary(pose).mu_of_x(x))


def deformed_mode(pose: EllipsePose, q: int, chart: AAChart | None = None,
                  grid: int = MODE_GRID) -> tuple[ModeTable, ModeTable]:
    """Dynamical mode pair (c_q, s_q) sampled on the Lazutkin grid."""
    if q <= 2:
        raise ValueError("dynamical modes need q > 2")
    chart = get_chart(pose, q) if chart is None else chart
    x = _grid(grid)
    theta = chart.Xq_inv(x)
    pref = (q * np.asarray(chart.eta_of(x))
            / (w_q(q) * _mu_on_grid(pose, x))
            / np.asarray(chart.dXq_of(theta)))
    ang = 2.0 * np.pi * q * np.asarray(theta)
    cq = ModeTable(2 * q, f"dynamical({q})", x, pref * np.cos(ang))
    sq = ModeTable(2 * q - 1, f"dynamical({q})", x, pref * np.sin(ang))
    return cq, sq


def base_modes(pose: EllipsePose, grid: int = MODE_GRID):
    """The five geometric modes (c0, c1, s1, c2, s2) in the ellipse's own frame.

    theta_t is the outward-normal angle against the major axis, ophi the polar
    angle; c0 = r cos(theta_t - ophi), c1/s1 = cos/sin theta_t and c2/s2 =
    r cos/sin(2 theta_hr) with theta_hr = (theta_t + ophi)/2.
    """
    eng = _EllipseEngine(pose)
    x = _grid(grid)
    t = eng.t_of_x(x)
    a, b = eng.a, eng.b
    ophi = np.arctan2(b * np.sin(t), a * np.cos(t))
    theta_t = np.arctan2(a * np.sin(t), b * np.cos(t))
    r = np.hypot(a * np.cos(t), b * np.sin(t))
    c0 = ModeTable(0, "base", x, r * np.cos(theta_t - ophi))
    c1 = ModeTable(2, "base", x, np.cos(theta_t))
    s1 = ModeTable(1, "base", x, np.sin(theta_t))
    two_hr = theta_t + ophi
    c2 = ModeTable(4, "base", x, r * np.cos(two_hr))
    s2 = ModeTable(3, "base", x, r * np.sin(two_hr))
    return c0, c1, s1, c2, s2


def mode_basis(pose: EllipsePose, count: int, grid: int = MODE_GRID):
    """Unit-L2-normalized basis e_0 .. e_{count-1} as ModeTables."""
    c0, c1, s1, c2, s2 = base_modes(pose, grid)
    raw = {0: c0, 1: s1, 2: c1, 3: s2, 4: c2}
    tables = []
    for j in range(count):
        if j <= 4:
            base = raw[j]
            samples = base.samples if j == 0 else math.sqrt(2.0) * base.samples
            tab = ModeTable(j, base.provenance, base.x, samples)
        else:
            q = (j + 1) // 2
            cq, sq = deformed_mode(pose, q, grid=grid)
            pick = cq if j % 2 == 0 else sq
            tab = ModeTable(j, pick.provenance, pick.x,
                            math.sqrt(2.0) * pick.samples)
        tab.samples = tab.samples / tab.l2_norm()
        tables.append(tab)
    return tables


def _as_samples(f, x: np.ndarray) -> np.ndarray:
    if isinstance(f, ModeTable):
        if f.x.shape != x.shape or not np.allclose(f.x, x):
            raise ValueError("mode tables live on different grids")
        return f.samples
    if isinstance(f, PerturbationSeries):
        return np.asarray(f(x))
    f = np.asarray(f, dtype=float)
    if f.shape != x.shape:
        raise ValueError("sample array does not match the mode grid")
    return f


def weighted_inner_product(f, g: ModeTable, mu) -> float:
    """<f, mu g> by the periodic trapezoid rule (the grid mean)."""
    fs = _as_samples(f, g.x)
    mus = mu(g.x) if callable(mu) else np.asarray(mu, dtype=float)
    return float(np.mean(fs * mus * g.samples))


def fourier_coefficients(samples: np.ndarray, count: int) -> np.ndarray:
    """Coefficients against the orthonormal Fourier basis e^F_0..e^F_{count-1}."""
    n = samples.size
    spec = np.fft.rfft(samples) / n
    out = np.zeros(count)
    out[0] = spec[0].real
    for j in range(1, count):
        k = (j + 1) // 2
        out[j] = math.sqrt(2.0) * (spec[k].real if j % 2 == 0 else -spec[k].imag)
    return out


@dataclass
class GramReport:
    """Truncated matrix of the mode-expansion operator in the Fourier basis."""

    eccentricity: float
    N: int
    matrix: np.ndarray
    gap: float                 # ||matrix - identity||_2
    c_star: float              # fitted sup_j weight_j ||e_j - e^F_j||_C0
    threshold: float           # c_star * sqrt(1 + pi^2/3)
    invertible_bound: bool     # gap < 1 in the truncation

    def to_dict(self) -> dict:
        return {
            "eccentricity": self.eccentricity,
            "N": self.N,
            "gap": self.gap,
            "c_star": self.c_star,
            "threshold": self.threshold,
            "invertible_bound": self.invertible_bound,
        }


def operator_report(pose: EllipsePose, N: int, grid: int = MODE_GRID) -> GramReport:
    """Assemble the N x N matrix column-by-column from Fourier coefficients of
    the normalized modes, and compare its identity gap with the fitted decay
    constant times sqrt(1 + pi^2/3)."""
    if N > 128:
        raise ValueError("operator truncation capped at 128 modes")
    tables = mode_basis(pose, N, grid)
    x = _grid(grid)
    mat = np.zeros((N, N))
    c_star = 0.0
    for j, tab in enumerate(tables):
        mat[:, j] = fourier_coefficients(tab.samples, N)
        k = (j + 1) // 2
        ang = 2.0 * np.pi * k * x
        ref = np.ones_like(x) if j == 0 else (
            math.sqrt(2.0) * (np.cos(ang) if j % 2 == 0 else np.sin(ang)))
        weight = max(k, 1)
        c_star = max(c_star, weight * float(np.max(np.abs(tab.samples - ref))))
    gap = float(np.linalg.norm(mat - np.eye(N), 2))
    threshold = c_star * math.sqrt(1.0 + math.pi ** 2 / 3.0)
    return GramReport(pose.eccentricity, N, mat, gap, c_star, threshold,
                      invertible_bound=gap < 1.0)


def tilde_coefficients(n, pose: EllipsePose, Q: int, grid: int = MODE_GRID):
    """Weighted projections tilde n_j = <n, mu e_j> for j = 0..Q.

    Returns the coefficient array and a decay diagnostic: the sup over j >= 1
    of frequency * |tilde n_j|.
    """
    tables = mode_basis(pose, Q + 1, grid)
    mu = _mu_on_grid(pose, _grid(grid))
    vals = np.array([weighted_inner_product(n, tab, mu)
                     / weighted_inner_product(tab, tab, mu) for tab in tables])
    freqs = np.array([max((j + 1) // 2, 1) for j in range(Q + 1)])
    diag = float(np.max(freqs[1:] * np.abs(vals[1:]))) if Q >= 1 else 0.0
    return vals, {"frequency_weighted_max": diag}


def five_mode_projection(n, pose: EllipsePose, grid: int = MODE_GRID):
    """Split n into its component along the five geometric modes and the
    mu-orthogonal remainder.

    Solves the 5x5 weighted Gram system in the raw quintuple (c0, c1, s1, c2,
    s2), so the returned coefficients are directly the transformation
    parameters (a0, a1, b1, a2, b2) of ellipse_from_coeffs.
    """
    quint = base_modes(pose, grid)
    x = quint[0].x
    mu = _mu_on_grid(pose, x)
    G = np.array([[weighted_inner_product(mi, mj, mu) for mj in quint]
                  for mi in quint])
    cond = np.linalg.cond(G)
    if cond > GRAM_COND_LIMIT:
        raise np.linalg.LinAlgError(
            f"five-mode Gram matrix ill conditioned ({cond:.2e})")
    ns = _as_samples(n, x)
    beta = np.array([weighted_inner_product(ns, mi, mu) for mi in quint])
    coeffs = np.linalg.solve(G, beta)
    n5 = sum(c * m.samples for c, m in zip(coeffs, quint))
    nperp = ns - n5
    ortho = max(abs(weighted_inner_product(nperp, mi, mu)) for mi in quint)
    return coeffs, n5, nperp, ortho


def _hyperbolic_rotation_matrix(a2: float, b2: float) -> np.ndarray:
    """exp([[a2, b2], [b2, -a2]]) in closed form (the generator squares to
    (a2^2 + b2^2) I)."""
    lam = math.hypot(a2, b2)
    S = np.array([[a2, b2], [b2, -a2]])
    if lam == 0.0:
        return np.eye(2)
    return math.cosh(lam) * np.eye(2) + (math.sinh(lam) / lam) * S


def ellipse_from_coeffs(pose: EllipsePose, a0: float, a1: float, b1: float,
                        a2: float, b2: float) -> EllipsePose:
    """Apply homothety exp(a0), then translation (a1, b1), then the hyperbolic
    rotation generated by (a2, b2), all in the ellipse's own frame."""
    # homothety about the center
    scale = pose.scale * math.exp(a0)
    center = np.asarray(pose.center, dtype=float)
    tilt = pose.tilt
    # translation, expressed in the ellipse frame
    center = center + pose.rotation() @ np.array([a1, b1])
    # hyperbolic rotation about the center, in the ellipse frame
    interim = EllipsePose(pose.eccentricity, tuple(center), tilt, scale)
    if a2 == 0.0 and b2 == 0.0:
        return interim
    L = _hyperbolic_rotation_matrix(a2, b2)
    Linv = np.linalg.inv(L)
    Q = np.diag([1.0 / interim.semi_major ** 2, 1.0 / interim.semi_minor ** 2])
    Qp = Linv.T @ Q @ Linv
    evals, evecs = np.linalg.eigh(Qp)
    semi_major = 1.0 / math.sqrt(evals[0])
    semi_minor = 1.0 / math.sqrt(evals[1])
    v = evecs[:, 0]
    dtilt = math.atan2(v[1], v[0])
    if dtilt > math.pi / 2:
        dtilt -= math.pi
    elif dtilt <= -math.pi / 2:
        dtilt += math.pi
    ecc = math.sqrt(max(0.0, 1.0 - (semi_minor / semi_major) ** 2))
    new_scale = 4.0 * semi_major * float(complete_second(ecc * ecc))
    return EllipsePose(ecc, tuple(center), tilt + dtilt, new_scale)


@dataclass
class FitResult:
    """Outcome of the iterated five-mode ellipse fit."""

    coefficients: np.ndarray       # first-pass (a0, a1, b1, a2, b2)
    pose: EllipsePose
    residual: PerturbationSeries   # the boundary re-expressed about pose
    c0_norm: float
    c1_norm: float
    iterations: int
    converged: bool
    diverged: bool
    trace: list = field(default_factory=list)


def fit_ellipse(omega, pose0: EllipsePose, max_iters: int = 12,
                coeff_tol: float = 1e-12, polish: bool = False) -> FitResult:
    """Iterate reexpress -> five-mode projection -> coefficient map until the
    projection vanishes; optionally polish by direct minimization of the C1
    residual over the five pose parameters.

    The projection absorbs exactly the elliptic component of the residual, so
    exact-ellipse inputs contract to numerical zero while components along
    dynamical modes are left untouched.
    """
    bnd = as_boundary(omega)
    pose = pose0
    nbar = reexpress(bnd, pose)
    first_coeffs = None
    trace = []
    diverged = False
    converged = False
    grow_streak = 0
    prev_norm = nbar.c1_norm()
    iterations = 0
    for it in range(max_iters):
        coeffs, _, _, _ = five_mode_projection(nbar, pose)
        if first_coeffs is None:
            first_coeffs = coeffs.copy()
        step = float(np.linalg.norm(coeffs))
        trace.append({"iteration": it, "c1_norm": prev_norm, "step": step})
        if step < coeff_tol:
            converged = True
            break
        pose_next = ellipse_from_coeffs(pose, *coeffs)
        nbar_next = reexpress(bnd, pose_next)
        norm_next = nbar_next.c1_norm()
        # an irreducible non-elliptic component keeps the residual pinned, so
        # only material growth counts as divergence
        grew = norm_next > prev_norm * (1.0 + 1e-3)
        grow_streak = grow_streak + 1 if grew else 0
        pose, nbar, prev_norm = pose_next, nbar_next, norm_next
        iterations = it + 1
        if grow_streak >= 2:
            diverged = True
            break
    if polish and not diverged:
        pose = _polish_pose(bnd, pose)
        nbar = reexpress(bnd, pose)
        prev_norm = nbar.c1_norm()
    return FitResult(
        coefficients=first_coeffs if first_coeffs is not None else np.zeros(5),
        pose=pose,
        residual=nbar,
        c0_norm=nbar.c0_norm(),
        c1_norm=nbar.c1_norm(),
        iterations=iterations,
        converged=converged,
        diverged=diverged,
        trace=trace,
    )


def _polish_pose(bnd: Boundary, pose: EllipsePose) -> EllipsePose:
    """Derivative-free minimization of the grid-sup C1 residual over the
    5-parameter pose; the objective is a max over a grid, so Nelder-Mead."""

    def objective(p):
        e, cx, cy, tilt, scale = p
        if not (0.0 <= e < 0.95) or scale <= 0.0:
            return 1e6
        try:
            return reexpress(bnd, EllipsePose(e, (cx, cy), tilt, scale)).c1_norm()
        except (ReachError, ValueError):
            return 1e6

    p0 = np.array([pose.eccentricity, pose.center[0], pose.center[1],
                   pose.tilt, pose.scale])
    res = minimize(objective, p0, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 400})
    if res.fun <= objective(p0):
        e, cx, cy, tilt, scale = res.x
        return EllipsePose(float(e), (float(cx), float(cy)), float(tilt),
                           float(scale))
    return pose
