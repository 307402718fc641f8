"""Maximal-perimeter inscribed polygons and perimeter-defect experiments.

An inscribed q-gon with one vertex pinned is a critical point of the chord-sum
exactly when the reflection law holds at every movable vertex, so periodic
orbits are found by Newton on the perimeter gradient.  The Hessian of the
chord sum couples only adjacent vertices, giving a tridiagonal Newton system;
the solver runs batched over many starting points.

The first-order change of the maximal perimeter under a normal perturbation n
of the base ellipse is the deformation function

    D(theta) = 2 sum_k n(S(theta + k/q)) sin Phi(theta + k/q),

with (S, Phi) the action-angle chart at rotation number 1/q; the defect
|L_perturbed - L_base - D| is quadratic in the perturbation size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .action_angle import AAChart, first_integral, get_chart
from .geometry import TWO_PI, Boundary, EllipsePose, PerturbationSeries, \
    BoundarySpec, as_boundary

GRAD_TOL = 1e-12        # reflection defect at movable vertices, radians
MAX_NEWTON = 200
MAX_HALVINGS = 60


class OptimizerError(RuntimeError):
    """Maximal-perimeter polygon search failed to converge."""


@dataclass
class InscribedPolygon:
    """A converged inscribed polygon: vertices by arc length, perimeter and
    per-vertex reflection residuals (incidence minus reflection, radians)."""

    q: int
    vertices: np.ndarray             # arc lengths s_0 .. s_{q-1}
    perimeter: float
    reflection_residuals: np.ndarray
    tau: np.ndarray                  # internal parameters (lifted, increasing)


@dataclass
class DefectReport:
    """Perimeter defect of one perturbation size on a theta grid."""

    q: int
    thetas: np.ndarray
    L_base: np.ndarray
    L_perturbed: np.ndarray
    deformation: np.ndarray
    defect: float
    epsilon: float      # C1 norm of the perturbation


def _chord_frames(bnd: Boundary, tau):
    """Positions, velocities and accelerations at polygon vertices (lifted tau)."""
    tm = np.mod(tau, TWO_PI)
    return bnd.point(tm), bnd.velocity(tm), bnd.acceleration(tm)


def _reflection_residuals(bnd: Boundary, tau):
    """Angle of incidence minus angle of reflection at every vertex.

    tau has shape (B, q), lifted and strictly increasing along axis 1.
    """
    P, V, _ = _chord_frames(bnd, tau)
    T = V / np.linalg.norm(V, axis=-1, keepdims=True)
    M = np.stack([-T[..., 1], T[..., 0]], axis=-1)
    E_out = np.roll(P, -1, axis=1) - P
    E_out = E_out / np.linalg.norm(E_out, axis=-1, keepdims=True)
    E_in = np.roll(E_out, 1, axis=1)
    N = -M
    v_ref = E_in - 2.0 * (E_in * N).sum(-1, keepdims=True) * N
    phi_out = np.arctan2((E_out * M).sum(-1), (E_out * T).sum(-1))
    phi_ref = np.arctan2((v_ref * M).sum(-1), (v_ref * T).sum(-1))
    return phi_out - phi_ref


def _perimeters(bnd: Boundary, tau):
    P = bnd.point(np.mod(tau, TWO_PI))
    edges = np.roll(P, -1, axis=1) - P
    return np.linalg.norm(edges, axis=-1).sum(axis=1)


def _gradient_hessian(bnd: Boundary, tau):
    """Perimeter gradient and tridiagonal Hessian blocks in the movable
    vertices tau[:, 1:]; shapes (B, q-1) and three (B, q-1) diagonals."""
    P, V, A = _chord_frames(bnd, tau)
    edge = np.roll(P, -1, axis=1) - P                   # edge k: P_k -> P_{k+1}
    ell = np.linalg.norm(edge, axis=-1)
    e = edge / ell[..., None]
    v_dot_e_here = (V * e).sum(-1)                      # <P'_k, e_k>
    v_dot_e_prev = (V * np.roll(e, 1, axis=1)).sum(-1)  # <P'_k, e_{k-1}>
    a_dot_e_here = (A * e).sum(-1)
    a_dot_e_prev = (A * np.roll(e, 1, axis=1)).sum(-1)
    v2 = (V * V).sum(-1)
    ell_prev = np.roll(ell, 1, axis=1)

    grad = v_dot_e_prev - v_dot_e_here
    diag = (a_dot_e_prev + (v2 - v_dot_e_prev**2) / ell_prev
            - a_dot_e_here + (v2 - v_dot_e_here**2) / ell)
    # off-diagonal on edge k: d^2 ell_k / d tau_k d tau_{k+1}
    v_next = np.roll(V, -1, axis=1)
    vv = (V * v_next).sum(-1)
    v_next_dot_e = (v_next * e).sum(-1)
    off = -(vv - v_dot_e_here * v_next_dot_e) / ell
    return grad[:, 1:], diag[:, 1:], off[:, 1:]


def _solve_tridiagonal(diag, lower, upper, rhs):
    """Batched Thomas algorithm; all arrays (B, n)."""
    n = diag.shape[1]
    c = np.zeros_like(diag)
    d = np.zeros_like(diag)
    c[:, 0] = upper[:, 0] / diag[:, 0]
    d[:, 0] = rhs[:, 0] / diag[:, 0]
    for i in range(1, n):
        den = diag[:, i] - lower[:, i] * c[:, i - 1]
        c[:, i] = upper[:, i] / den if i < n - 1 else 0.0
        d[:, i] = (rhs[:, i] - lower[:, i] * d[:, i - 1]) / den
    x = np.zeros_like(diag)
    x[:, -1] = d[:, -1]
    for i in range(n - 2, -1, -1):
        x[:, i] = d[:, i] - c[:, i] * x[:, i + 1]
    return x


def _ordered(tau):
    return np.all(np.diff(tau, axis=1) > 0.0, axis=1) & \
        (tau[:, -1] - tau[:, 0] < TWO_PI)


def maximize_polygons(omega, tau_init) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched maximal-perimeter search with the first vertex of each row
    pinned.  tau_init is (B, q), lifted and ordered.  Returns (tau, perimeter,
    residuals).

    Newton steps are capped to a fraction of the vertex spacing (a long step
    along the soft near-resonant mode would hop between basins of the
    perturbed landscape) and accepted only when the reflection residual
    decreases and the cyclic order survives.  At convergence the tridiagonal
    Hessian must be negative definite: the result is a maximum, not a saddle.
    """
    bnd = as_boundary(omega)
    tau = np.array(tau_init, dtype=float)
    q = tau.shape[1]
    if not np.all(_ordered(tau)):
        raise ValueError("initial polygon vertices must be cyclically ordered")
    tau = _soft_mode_prescan(bnd, tau)
    cap = 0.2 * TWO_PI / q

    def gradient_norm(t):
        g, _, _ = _gradient_hessian(bnd, t)
        return np.linalg.norm(g, axis=1)

    def residual_norm(t):
        return np.max(np.abs(_reflection_residuals(bnd, t)[:, 1:]), axis=1)

    rnorm = residual_norm(tau)
    gnorm = gradient_norm(tau)
    for _ in range(MAX_NEWTON):
        if np.max(rnorm) < GRAD_TOL:
            break
        grad, diag, off = _gradient_hessian(bnd, tau)
        lower = np.concatenate([np.zeros((off.shape[0], 1)), off[:, :-1]], axis=1)
        upper = np.concatenate([off[:, :-1], np.zeros((off.shape[0], 1))], axis=1)
        step = _solve_tridiagonal(diag, lower, upper, -grad)
        over = np.max(np.abs(step), axis=1) / cap
        step = step / np.maximum(over, 1.0)[:, None]
        alpha = np.ones(tau.shape[0])
        accepted = rnorm < GRAD_TOL
        for _ in range(MAX_HALVINGS):
            cand = tau.copy()
            cand[:, 1:] = tau[:, 1:] + alpha[:, None] * step
            ok = _ordered(cand)
            safe = np.where(ok[:, None], cand, tau)
            new_gnorm = gradient_norm(safe)
            # the scaled Newton step is a descent direction for ||grad||_2
            good = ok & (new_gnorm <= gnorm * (1.0 - 1e-4 * alpha) + 1e-18) \
                & ~accepted
            tau[good] = cand[good]
            gnorm[good] = new_gnorm[good]
            accepted |= good
            if np.all(accepted):
                break
            alpha = np.where(accepted, alpha, alpha / 2.0)
        else:
            raise OptimizerError("line search exhausted 60 halvings")
        rnorm = residual_norm(tau)
    else:
        raise OptimizerError(f"no convergence in {MAX_NEWTON} Newton steps")
    res = _reflection_residuals(bnd, tau)
    _, diag, off = _gradient_hessian(bnd, tau)
    if not np.all(_tridiagonal_pivots_negative(diag, off)):
        raise OptimizerError("converged to a non-maximal critical point")
    return tau, _perimeters(bnd, tau), res


def _soft_mode_prescan(bnd: Boundary, tau: np.ndarray,
                       n_scan: int = 17) -> np.ndarray:
    """Shift all movable vertices together and keep the best perimeter.

    Rigid rotation of the orbit is the soft direction of the chord-sum near an
    integrable configuration; a resonant perturbation corrugates the landscape
    along it, and a Newton start in a subdominant well would converge to the
    wrong branch of the maximal perimeter.
    """
    B, q = tau.shape
    offsets = np.linspace(-0.45, 0.45, n_scan) * (TWO_PI / q)
    cand = np.repeat(tau[:, None, :], n_scan, axis=1)
    cand[:, :, 1:] += offsets[None, :, None]
    flat = cand.reshape(B * n_scan, q)
    ok = _ordered(flat)
    perims = np.where(ok, _perimeters(bnd, flat), -np.inf).reshape(B, n_scan)
    best = np.argmax(perims, axis=1)
    return cand[np.arange(B), best]


def _tridiagonal_pivots_negative(diag, off) -> np.ndarray:
    """LDL^T pivots of the symmetric tridiagonal rows; all negative iff the
    Hessian is negative definite."""
    n = diag.shape[1]
    piv = diag[:, 0].copy()
    all_neg = piv < 0.0
    for i in range(1, n):
        piv = diag[:, i] - off[:, i - 1] ** 2 / piv
        all_neg &= piv < 0.0
    return all_neg


def _base_x_to_tau(bnd: Boundary, x):
    """Internal parameter of the point lifted from base Lazutkin parameter x."""
    if bnd.is_ellipse:
        return bnd.base.t_of_x(x)
    return TWO_PI * np.asarray(x, dtype=float)


def _tau_to_base_x(bnd: Boundary, tau):
    if bnd.is_ellipse:
        return bnd.base.x_of_t(np.mod(tau, TWO_PI))
    return np.mod(np.asarray(tau, dtype=float) / TWO_PI, 1.0)


def _chart_for(bnd: Boundary, q: int, chart: AAChart | None) -> AAChart:
    if chart is None:
        chart = get_chart(bnd.spec.base, q)
    return chart


def _init_from_chart(bnd: Boundary, chart: AAChart, theta0):
    """Initial polygon rows from chart orbits: vertex k at the lift of the
    base point X_q(theta0 + k/q)."""
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    ths = theta0[:, None] + np.arange(chart.q)[None, :] / chart.q
    x = chart.Xq_of(ths)
    tau = _base_x_to_tau(bnd, np.mod(x, 1.0))
    tau = np.asarray(tau)
    # relift to an increasing row
    tau = tau[..., 0:1] + np.concatenate(
        [np.zeros_like(tau[..., 0:1]),
         np.cumsum(np.mod(np.diff(tau, axis=-1), TWO_PI), axis=-1)], axis=-1)
    return tau


def max_perimeter_polygon(omega, q: int, s0: float,
                          chart: AAChart | None = None) -> InscribedPolygon:
    """Maximal-perimeter inscribed q-gon with the vertex at arc length s0 pinned.

    Initialization comes from the action-angle orbit of the base ellipse at
    rotation number 1/q; the movable vertices converge when every interior
    reflection defect is below GRAD_TOL.
    """
    if q <= 2:
        raise ValueError("q must exceed 2")
    bnd = as_boundary(omega)
    chart = _chart_for(bnd, q, chart)
    tau0 = float(bnd.tau_of_s(np.mod(s0, bnd.perimeter)))
    theta0 = float(chart.Xq_inv(_tau_to_base_x(bnd, tau0)))
    tau_init = _init_from_chart(bnd, chart, theta0)
    tau_init[0, 0] = tau0
    tau, perim, res = maximize_polygons(bnd, tau_init)
    s = np.mod(bnd.s_of_tau(np.mod(tau[0], TWO_PI)), bnd.perimeter)
    return InscribedPolygon(q=q, vertices=s, perimeter=float(perim[0]),
                            reflection_residuals=res[0], tau=tau[0])


def perimeter_functions(pose: EllipsePose, omega, q: int, thetas,
                        chart: AAChart | None = None):
    """Perimeters of the base-ellipse orbit polygons and of the maximal
    polygons on the perturbed boundary started at the lifted points."""
    bnd = as_boundary(omega)
    chart = _chart_for(bnd, q, chart)
    thetas = np.asarray(thetas, dtype=float)
    L0 = chart.orbit_perimeter(thetas)
    tau_init = _init_from_chart(bnd, chart, thetas)
    tau, L1, _ = maximize_polygons(bnd, tau_init)
    return np.asarray(L0), np.asarray(L1)


def deformation_function(n: PerturbationSeries, chart: AAChart, thetas):
    """D(theta) = 2 sum_{k=1}^{q} n(X_q(theta + k/q)) sin Phi(theta + k/q)."""
    thetas = np.asarray(thetas, dtype=float)
    scalar = thetas.ndim == 0
    ths = np.atleast_1d(thetas)[:, None] + \
        (np.arange(1, chart.q + 1)[None, :]) / chart.q
    x = np.mod(chart.Xq_of(ths), 1.0)
    vals = 2.0 * (n(x) * np.sin(chart.Phi_of(ths))).sum(axis=1)
    return float(vals[0]) if scalar else vals


def perimeter_defect(pose: EllipsePose, v: PerturbationSeries, q: int,
                     eps_list, thetas, chart: AAChart | None = None):
    """Defect reports for n = eps * v over a list of eps, plus the log-log
    slope of defect against the C1 size."""
    chart = get_chart(pose, q) if chart is None else chart
    thetas = np.asarray(thetas, dtype=float)
    L0 = np.asarray(chart.orbit_perimeter(thetas))
    reports = []
    for eps in eps_list:
        n = v.scaled(eps)
        if n.is_zero():
            D = np.zeros_like(thetas)
            reports.append(DefectReport(q, thetas, L0, L0.copy(), D, 0.0, 0.0))
            continue
        omega = Boundary(BoundarySpec(pose, n))
        _, L1 = perimeter_functions(pose, omega, q, thetas, chart)
        D = deformation_function(n, chart, thetas)
        defect = float(np.max(np.abs(L1 - L0 - D)))
        reports.append(DefectReport(q, thetas, L0, L1, D, defect, n.c1_norm()))
    sizes = np.array([r.epsilon for r in reports])
    defs_ = np.array([r.defect for r in reports])
    keep = (sizes > 0) & (defs_ > 0)
    slope = float("nan")
    if keep.sum() >= 2:
        slope = float(np.polyfit(np.log(sizes[keep]), np.log(defs_[keep]), 1)[0])
    return reports, slope


def pseudo_orbit_diagnostics(pose: EllipsePose, omega,
                             polygon: InscribedPolygon,
                             chart: AAChart | None = None) -> dict:
    """Per-vertex comparison of a perturbed polygon with the base orbit.

    Projects each vertex orthogonally onto the base ellipse and reports the
    displacements v_k from the unperturbed orbit points, their angles alpha_k
    against the base tangents, the projected-edge reflection angles phi_plus/
    phi_minus and the first integral evaluated on the projected edges.
    """
    bnd = as_boundary(omega)
    q = polygon.q
    chart = _chart_for(bnd, q, chart)
    eng = chart.engine
    P_prime = bnd.point(np.mod(polygon.tau, TWO_PI))

    theta0 = float(chart.Xq_inv(_tau_to_base_x(bnd, polygon.tau[0])))
    ths = theta0 + np.arange(q) / q
    t_orbit = np.mod(chart.t_of_theta(ths), TWO_PI)
    P_orbit = eng.point(t_orbit)
    T_orbit = eng.tangent(t_orbit)
    N_orbit = eng.outward_normal(t_orbit)

    disp = P_prime - P_orbit
    v = np.linalg.norm(disp, axis=-1)
    alpha = np.arctan2((disp * N_orbit).sum(-1), (disp * T_orbit).sum(-1))

    # orthogonal projection onto the base ellipse by Newton on <P' - Q, Q'> = 0
    t_bar = t_orbit.copy()
    for _ in range(40):
        Q = eng.point(t_bar)
        V = eng.tangent(t_bar) * eng.speed(t_bar)[..., None]
        A = eng.accel(t_bar)
        g = ((P_prime - Q) * V).sum(-1)
        dg = ((P_prime - Q) * A).sum(-1) - (V * V).sum(-1)
        t_new = t_bar - g / dg
        if np.max(np.abs(t_new - t_bar)) < 1e-14:
            t_bar = t_new
            break
        t_bar = t_new

    Pb = eng.point(t_bar)
    Tb = eng.tangent(t_bar)
    Mb = np.stack([-Tb[..., 1], Tb[..., 0]], axis=-1)
    edges = np.roll(Pb, -1, axis=0) - Pb
    e_out = edges / np.linalg.norm(edges, axis=-1, keepdims=True)
    e_in = np.roll(e_out, 1, axis=0)
    phi_plus = np.arctan2((e_out * Mb).sum(-1), (e_out * Tb).sum(-1))
    # angle of the chord back toward the previous vertex, against -T
    phi_minus = np.arctan2(-(e_in * Mb).sum(-1), (e_in * Tb).sum(-1))

    return {
        "theta_bar": chart.Xq_inv(eng.x_of_t(np.mod(t_bar, TWO_PI))),
        "v": v,
        "alpha": alpha,
        "phi_plus": phi_plus,
        "phi_minus": phi_minus,
        "I_plus": np.asarray(first_integral(pose, t_bar, phi_plus)),
        "I_minus": np.asarray(first_integral(pose, t_bar, phi_minus)),
    }


def integrability_scan(omega, q: int, n_starts: int = 64,
                       chart: AAChart | None = None) -> dict:
    """Perimeter constancy and orbit closure of maximal polygons.

    perimeter_variation is max - min of the maximal perimeter over the start
    grid; closure_residual is the largest reflection defect at the pinned
    vertex (zero exactly when every maximal polygon is a periodic orbit).
    """
    bnd = as_boundary(omega)
    chart = _chart_for(bnd, q, chart)
    thetas = np.arange(n_starts) / n_starts
    tau_init = _init_from_chart(bnd, chart, thetas)
    _, perims, res = maximize_polygons(bnd, tau_init)
    return {
        "perimeter_variation": float(np.max(perims) - np.min(perims)),
        "closure_residual": float(np.max(np.abs(res[:, 0]))),
        "perimeters": perims,
    }
