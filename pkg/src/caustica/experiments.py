"""Verification experiments E1..E11.

Each experiment exercises one quantitative statement about elliptic billiards
at desk scale and reports data rows, fitted slopes/constants and boolean pass
flags; tolerances default to the pinned values in DEFAULT_TOLERANCES and can
be overridden through the config.  Reports are deterministic under a fixed
seed: two runs with an identical config produce identical data sections.
"""

from __future__ import annotations

import time
import traceback
from dataclasses import dataclass, field, asdict

import numpy as np

from . import dynamics, modes, variational
from .action_angle import (
    caustic_from_rotation_number,
    conjugacy_residual,
    elliptic_integral,
    elliptical_coords,
    first_integral,
    get_chart,
)
from .dynamics import LazPoint, PhasePoint
from .geometry import (
    Boundary,
    BoundarySpec,
    EllipsePose,
    PerturbationSeries,
    as_boundary,
    boundary_point,
    ellipse_geometry,
    lazutkin_chart,
)

ALL_EXPERIMENTS = ["E1", "E2", "E3", "E4", "E5", "E6", "E7", "E8", "E9",
                   "E10", "E10b", "E11"]

# every public operation, for the coverage self-test
DECLARED_OPS = frozenset({
    "geometry.ellipse_geometry", "geometry.lazutkin_chart",
    "geometry.boundary_point", "geometry.reexpress",
    "dynamics.billiard_step", "dynamics.to_lazutkin", "dynamics.lazutkin_step",
    "dynamics.rotation_number",
    "action_angle.elliptic_integral", "action_angle.elliptical_coords",
    "action_angle.first_integral", "action_angle.caustic_from_rotation_number",
    "action_angle.build_chart",
    "variational.max_perimeter_polygon", "variational.perimeter_functions",
    "variational.deformation_function", "variational.perimeter_defect",
    "variational.pseudo_orbit_diagnostics", "variational.integrability_scan",
    "modes.deformed_mode", "modes.base_modes", "modes.weighted_inner_product",
    "modes.tilde_coefficients", "modes.operator_report",
    "modes.five_mode_projection", "modes.ellipse_from_coeffs",
    "modes.fit_ellipse",
    "verify_cli.run_experiment", "verify_cli.fit_loglog_slope",
    "verify_cli.emit",
})

DEFAULT_TOLERANCES = {
    "E1": {"max_drift": 1e-9, "psi_consistency": 1e-9},
    "E2": {"billiard": 1e-12, "qgon": 1e-10, "mu": 1e-10, "geometry": 1e-12,
           "elliptic": 1e-13, "lazutkin": 1e-12},
    "E3": {"conjugacy": 1e-8, "normalization": 1e-12, "density": 1e-8,
           "rotation": 1e-9},
    "E4": {"variation": 1e-9, "closure": 1e-9},
    "E5": {"slope_lo": -1.3, "slope_hi": -0.7},
    "E6": {"orthogonality": 1e-8},
    "E7": {"slope_lo": 1.85, "slope_hi": 2.15},
    "E8": {"slope_lo": 1.8, "slope_hi": 2.2, "perp_fraction": 0.1},
    "E9": {"gap_zero": 1e-10, "gap_small": 1.0},
    "E10": {"contraction_exponent": 1.5},
    "E10b": {"variation_factor": 1e-2, "residual_floor": 0.5},
    "E11": {"tail_factor": 2.0, "xi": 3.0},
}


@dataclass
class ExperimentConfig:
    """Configuration of one experiment run; field names are the config-file keys."""

    experiment: str
    eccentricities: list = field(default_factory=list)
    q_values: list = field(default_factory=list)
    epsilons: list = field(default_factory=list)
    theta_grid: int = 64
    norm_grid: int = 2048
    orbit_steps: int = 10000
    n_starts: int = 20
    seed: int = 20260810
    tolerances: dict = field(default_factory=dict)
    out_dir: str = "reports"

    def __post_init__(self):
        if self.experiment not in ALL_EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        base = dict(DEFAULT_TOLERANCES[self.experiment])
        base.update(self.tolerances)
        self.tolerances = base
        for name in ("eccentricities", "q_values", "epsilons"):
            if not getattr(self, name):
                setattr(self, name, list(_DEFAULT_LISTS[self.experiment][name]))
        if any(t <= 0 for t in self.tolerances.values()
               if not isinstance(t, bool)) and self.experiment != "E5":
            raise ValueError("tolerances must be positive")

    @classmethod
    def for_experiment(cls, exp_id: str, **overrides) -> "ExperimentConfig":
        return cls(experiment=exp_id, **overrides)

    def to_dict(self) -> dict:
        return asdict(self)


_DEFAULT_LISTS = {
    "E1": {"eccentricities": [0.3], "q_values": [], "epsilons": []},
    "E2": {"eccentricities": [0.0], "q_values": list(range(3, 13)),
           "epsilons": []},
    "E3": {"eccentricities": [0.1, 0.2, 0.4], "q_values": list(range(3, 16)),
           "epsilons": []},
    "E4": {"eccentricities": [0.1, 0.25], "q_values": list(range(3, 11)),
           "epsilons": []},
    "E5": {"eccentricities": [0.05, 0.2], "q_values": list(range(3, 41)),
           "epsilons": []},
    "E6": {"eccentricities": [0.05, 0.1, 0.2], "q_values": list(range(3, 16)),
           "epsilons": []},
    "E7": {"eccentricities": [0.0, 0.1], "q_values": [3, 4, 5],
           "epsilons": [3e-5, 1e-4, 3e-4, 1e-3]},
    "E8": {"eccentricities": [0.1], "q_values": list(range(5, 21)),
           "epsilons": [1e-4, 3e-4, 1e-3]},
    "E9": {"eccentricities": [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3],
           "q_values": [64], "epsilons": []},
    "E10": {"eccentricities": [0.1], "q_values": [],
            "epsilons": [1e-3, 1e-4]},
    "E10b": {"eccentricities": [0.0], "q_values": [3, 4], "epsilons": [1e-3]},
    "E11": {"eccentricities": [0.2], "q_values": list(range(5, 51)),
            "epsilons": []},
}


@dataclass
class Report:
    """Outcome of one experiment: data rows, fits and per-criterion passes."""

    id: str
    config: dict
    data: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    passes: dict = field(default_factory=dict)
    ops: set = field(default_factory=set)
    wall_time_s: float = 0.0
    plot_series: dict = field(default_factory=dict)
    plot_title: str = ""
    plot_xlabel: str = ""
    plot_ylabel: str = ""
    plot_loglog: bool = False
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(self.passes.values())


def fit_loglog_slope(pairs) -> dict:
    """Least-squares line through (log u, log v); needs >= 3 positive points."""
    pairs = [(float(u), float(v)) for u, v in pairs]
    if len(pairs) < 3:
        raise ValueError("slope fit needs at least 3 points")
    if any(u <= 0 or v <= 0 for u, v in pairs):
        raise ValueError("slope fit needs positive values")
    lu = np.log([u for u, _ in pairs])
    lv = np.log([v for _, v in pairs])
    slope, intercept = np.polyfit(lu, lv, 1)
    resid = lv - (slope * lu + intercept)
    ss_tot = float(np.sum((lv - lv.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2}


# ---------------------------------------------------------------------------
# individual experiments
# ---------------------------------------------------------------------------

def _run_e1(cfg: ExperimentConfig, rep: Report):
    """First-integral conservation along long orbits (seeded starts)."""
    rep.ops |= {"dynamics.billiard_step", "action_angle.first_integral",
                "action_angle.elliptical_coords"}
    tol = cfg.tolerances
    e = cfg.eccentricities[0]
    pose = EllipsePose(e)
    bnd = as_boundary(pose)
    rng = np.random.default_rng(cfg.seed)
    s = rng.uniform(0.0, 1.0, cfg.n_starts)
    phi = rng.uniform(0.2, np.pi - 0.2, cfg.n_starts)
    t0 = bnd.tau_of_s(s)
    i_ref = np.asarray(first_integral(pose, t0, phi))
    drift = np.zeros(cfg.n_starts)
    s_cur, phi_cur = s.copy(), phi.copy()
    for _ in range(cfg.orbit_steps):
        s_cur, phi_cur = dynamics.billiard_step_arrays(bnd, s_cur, phi_cur)
        ival = np.asarray(first_integral(pose, bnd.tau_of_s(s_cur), phi_cur))
        drift = np.maximum(drift, np.abs(ival - i_ref))
    # confocal-coordinate consistency at the final collision points
    psi_dev = 0.0
    for sk in s_cur:
        t = float(bnd.tau_of_s(sk))
        c = elliptical_coords(pose, np.asarray(bnd.point(t)))
        psi_dev = max(psi_dev, abs(float(
            np.mod(c.psi - t + np.pi, 2 * np.pi) - np.pi)))
    for k in range(cfg.n_starts):
        rep.data.append({"orbit": k, "s0": float(s[k]), "phi0": float(phi[k]),
                         "I0": float(i_ref[k]), "drift": float(drift[k])})
    rep.fits = {"max_drift": float(drift.max()), "psi_deviation": psi_dev}
    rep.passes = {
        "first_integral_drift": drift.max() < tol["max_drift"],
        "psi_consistency": psi_dev < tol["psi_consistency"],
    }
    rep.plot_series = {"drift": (list(range(cfg.n_starts)), list(drift + 1e-300))}
    rep.plot_title = f"E1 first-integral drift, e={e}, {cfg.orbit_steps} steps"
    rep.plot_xlabel, rep.plot_ylabel = "orbit", "max |I - I0|"


def _run_e2(cfg: ExperimentConfig, rep: Report):
    """Closed forms on the circle: map, polygons, density, chart, kernels."""
    rep.ops |= {"dynamics.billiard_step", "variational.max_perimeter_polygon",
                "geometry.lazutkin_chart", "geometry.ellipse_geometry",
                "geometry.boundary_point", "action_angle.elliptic_integral",
                "dynamics.to_lazutkin", "dynamics.lazutkin_step"}
    tol = cfg.tolerances
    circle = EllipsePose(0.0)
    bnd = as_boundary(circle)
    rng = np.random.default_rng(cfg.seed)

    s = rng.uniform(0, 1, 50)
    phi = rng.uniform(0.05, np.pi - 0.05, 50)
    s1, phi1 = dynamics.billiard_step_arrays(bnd, s, phi)
    dev_map = max(float(np.max(np.abs(s1 - np.mod(s + phi / np.pi, 1.0)))),
                  float(np.max(np.abs(phi1 - phi))))

    dev_qgon = 0.0
    for q in cfg.q_values:
        poly = variational.max_perimeter_polygon(bnd, q, float(rng.uniform(0, 1)))
        wq = q * np.sin(np.pi / q) / np.pi
        dev = abs(poly.perimeter - wq)
        dev_qgon = max(dev_qgon, dev)
        rep.data.append({"check": "qgon", "q": q, "perimeter": poly.perimeter,
                         "target": wq, "deviation": dev})

    chart = lazutkin_chart(BoundarySpec(circle))
    xs = np.arange(512) / 512
    dev_mu = float(np.max(np.abs(chart.mu(xs) - np.pi)))

    smp = ellipse_geometry(circle, np.linspace(0, 2 * np.pi, 65))
    dev_geom = max(float(np.max(np.abs(smp.rho - 1 / (2 * np.pi)))),
                   float(np.max(np.abs(smp.s - smp.t / (2 * np.pi)))))

    lifted = boundary_point(BoundarySpec(
        circle, PerturbationSeries(np.array([1e-3]), np.array([]))), xs[:64])
    dev_lift = float(np.max(np.abs(lifted.rho - (1 / (2 * np.pi) + 1e-3))))

    dev_ell = max(
        abs(float(elliptic_integral("K", 0.0)) - np.pi / 2),
        abs(float(elliptic_integral("E", 0.0)) - np.pi / 2),
        abs(float(elliptic_integral("F", 0.5, np.pi / 2))
            - float(elliptic_integral("K", 0.5))),
        abs(float(elliptic_integral("E", 0.5)) - 1.4674622093394272),
    )

    dev_laz = 0.0
    for phi0 in [0.3, 1.1, 2.4]:
        lz = dynamics.to_lazutkin(bnd, PhasePoint(0.2, phi0))
        dev_laz = max(dev_laz, abs(lz.y - 2 / np.pi * np.sin(phi0 / 2)))
        back = dynamics.from_lazutkin(bnd, lz)
        dev_laz = max(dev_laz, abs(back.s - 0.2), abs(back.phi - phi0))
    out = dynamics.lazutkin_step(bnd, LazPoint(0.37, 0.21))
    dev_laz = max(dev_laz, abs(np.mod(out.x - 0.37, 1.0)
                               - 2 / np.pi * np.arcsin(np.pi * 0.21 / 2)))

    rep.data.append({"check": "billiard_map", "deviation": dev_map})
    rep.data.append({"check": "mu", "deviation": dev_mu})
    rep.data.append({"check": "geometry", "deviation": dev_geom})
    rep.data.append({"check": "lifted_circle", "deviation": dev_lift})
    rep.data.append({"check": "elliptic_kernels", "deviation": dev_ell})
    rep.data.append({"check": "lazutkin_map", "deviation": dev_laz})
    rep.passes = {
        "billiard_closed_form": dev_map < tol["billiard"],
        "qgon_perimeters": dev_qgon < tol["qgon"],
        "mu_equals_pi": dev_mu < tol["mu"],
        "ellipse_geometry": dev_geom < tol["geometry"],
        "lifted_circle": dev_lift < tol["qgon"],
        "elliptic_kernels": dev_ell < tol["elliptic"],
        "lazutkin_closed_form": dev_laz < tol["lazutkin"],
    }
    rep.plot_series = {"qgon deviation": (
        list(cfg.q_values),
        [r["deviation"] + 1e-300 for r in rep.data if r.get("check") == "qgon"])}
    rep.plot_title = "E2 circle closed forms"
    rep.plot_xlabel, rep.plot_ylabel = "q", "deviation"


def _run_e3(cfg: ExperimentConfig, rep: Report):
    """Action-angle conjugacy against the billiard map itself."""
    rep.ops |= {"action_angle.build_chart", "dynamics.billiard_step",
                "action_angle.caustic_from_rotation_number",
                "dynamics.rotation_number"}
    tol = cfg.tolerances
    worst = {"conjugacy": 0.0, "normalization": 0.0, "density": 0.0}
    for e in cfg.eccentricities:
        pose = EllipsePose(e)
        for q in cfg.q_values:
            chart = get_chart(pose, q)
            res = conjugacy_residual(chart, n_theta=cfg.theta_grid)
            s0 = abs(float(chart.S_of(0.0)))
            rep.data.append({"e": e, "q": q, "conjugacy_residual": res,
                             "S_at_zero": s0,
                             "density_residual": chart.density_residual,
                             "Z": chart.caustic.Z, "source": chart.source})
            worst["conjugacy"] = max(worst["conjugacy"], res)
            worst["normalization"] = max(worst["normalization"], s0)
            worst["density"] = max(worst["density"], chart.density_residual)
    pose = EllipsePose(0.3)
    bnd = as_boundary(pose)
    caustic = caustic_from_rotation_number(pose, 1.0 / 7.0)
    phi0 = float(np.arcsin(np.sqrt(caustic.Z) / bnd.speed(0.0)))
    om = dynamics.rotation_number(bnd, PhasePoint(0.0, phi0), 7 * 64)
    rep.fits = dict(worst, tangent_rotation_error=abs(om - 1.0 / 7.0))
    rep.passes = {
        "conjugacy": worst["conjugacy"] < tol["conjugacy"],
        "normalization": worst["normalization"] < tol["normalization"],
        "density_invariance": worst["density"] < tol["density"],
        "tangent_orbit_rotation": abs(om - 1.0 / 7.0) < tol["rotation"],
    }
    rep.plot_series = {
        f"e={e}": ([r["q"] for r in rep.data if r["e"] == e],
                   [r["conjugacy_residual"] + 1e-300 for r in rep.data
                    if r["e"] == e])
        for e in cfg.eccentricities}
    rep.plot_title = "E3 conjugacy residual"
    rep.plot_xlabel, rep.plot_ylabel = "q", "residual"


def _run_e4(cfg: ExperimentConfig, rep: Report):
    """Perimeter constancy and orbit closure on exact ellipses."""
    rep.ops |= {"variational.integrability_scan", "action_angle.build_chart"}
    tol = cfg.tolerances
    worst_var, worst_closure, worst_chart = 0.0, 0.0, 0.0
    for e in cfg.eccentricities:
        pose = EllipsePose(e)
        for q in cfg.q_values:
            chart = get_chart(pose, q)
            thetas = np.arange(cfg.theta_grid) / cfg.theta_grid
            l0 = np.asarray(chart.orbit_perimeter(thetas))
            chart_var = float(np.ptp(l0))
            scan = variational.integrability_scan(
                BoundarySpec(pose), q, n_starts=cfg.theta_grid, chart=chart)
            rep.data.append({
                "e": e, "q": q, "chart_perimeter_variation": chart_var,
                "perimeter_variation": scan["perimeter_variation"],
                "closure_residual": scan["closure_residual"]})
            worst_var = max(worst_var, chart_var, scan["perimeter_variation"])
            worst_closure = max(worst_closure, scan["closure_residual"])
            worst_chart = max(worst_chart, chart_var)
    rep.fits = {"max_variation": worst_var, "max_closure": worst_closure}
    rep.passes = {
        "perimeter_constant": worst_var < tol["variation"],
        "orbit_closure": worst_closure < tol["closure"],
    }
    rep.plot_series = {
        f"e={e}": ([r["q"] for r in rep.data if r["e"] == e],
                   [r["perimeter_variation"] + 1e-300 for r in rep.data
                    if r["e"] == e])
        for e in cfg.eccentricities}
    rep.plot_title = "E4 ellipse integrability"
    rep.plot_xlabel, rep.plot_ylabel = "q", "perimeter variation"


def _run_e5(cfg: ExperimentConfig, rep: Report):
    """Dynamical modes approach Fourier modes at rate 1/q, faster for small e."""
    rep.ops |= {"modes.deformed_mode", "verify_cli.fit_loglog_slope"}
    tol = cfg.tolerances
    x = np.arange(cfg.norm_grid) / cfg.norm_grid
    weighted_max = {}
    slopes = {}
    for e in cfg.eccentricities:
        pose = EllipsePose(e)
        devs = []
        for q in cfg.q_values:
            cq, sq = modes.deformed_mode(pose, q, grid=cfg.norm_grid)
            dev = max(float(np.max(np.abs(cq.samples - np.cos(2 * np.pi * q * x)))),
                      float(np.max(np.abs(sq.samples - np.sin(2 * np.pi * q * x)))))
            devs.append(dev)
            rep.data.append({"e": e, "q": q, "deviation": dev})
        fit = fit_loglog_slope(list(zip(cfg.q_values, devs)))
        slopes[e] = fit["slope"]
        weighted_max[e] = float(np.max(np.array(cfg.q_values) * np.array(devs)))
    e_hi = max(cfg.eccentricities)
    e_lo = min(cfg.eccentricities)
    rep.fits = {"slopes": {str(e): s for e, s in slopes.items()},
                "q_weighted_max": {str(e): v for e, v in weighted_max.items()}}
    rep.passes = {
        "decay_slope": tol["slope_lo"] <= slopes[e_hi] <= tol["slope_hi"],
        "constant_decreases_with_e": weighted_max[e_lo] < weighted_max[e_hi],
    }
    rep.plot_series = {
        f"e={e}": ([r["q"] for r in rep.data if r["e"] == e],
                   [r["deviation"] for r in rep.data if r["e"] == e])
        for e in cfg.eccentricities}
    rep.plot_title = "E5 mode convergence"
    rep.plot_xlabel, rep.plot_ylabel = "q", "sup deviation"
    rep.plot_loglog = True


def _run_e6(cfg: ExperimentConfig, rep: Report):
    """mu-orthogonality of the five geometric modes to all dynamical modes."""
    rep.ops |= {"modes.base_modes", "modes.weighted_inner_product",
                "modes.deformed_mode"}
    tol = cfg.tolerances
    worst = 0.0
    for e in cfg.eccentricities:
        pose = EllipsePose(e)
        basis = modes.mode_basis(pose, 31, grid=cfg.norm_grid)
        mu = np.asarray(as_boundary(pose).mu_of_x(basis[0].x))
        for j in range(5):
            for k in range(5, 31):
                val = abs(modes.weighted_inner_product(basis[j], basis[k], mu))
                worst = max(worst, val)
                rep.data.append({"e": e, "j": j, "k": k, "inner_product": val})
    rep.fits = {"max_inner_product": worst}
    rep.passes = {"orthogonality": worst < tol["orthogonality"]}
    rep.plot_series = {
        f"e={e}": ([r["k"] for r in rep.data if r["e"] == e and r["j"] == 0],
                   [max(r2["inner_product"] for r2 in rep.data
                        if r2["e"] == e and r2["k"] == k) + 1e-300
                    for k in range(5, 31)])
        for e in cfg.eccentricities}
    rep.plot_title = "E6 orthogonality"
    rep.plot_xlabel, rep.plot_ylabel = "k", "max_j |<e_j, mu e_k>|"


def _run_e7(cfg: ExperimentConfig, rep: Report):
    """Quadratic perimeter defect against the deformation function."""
    rep.ops |= {"variational.perimeter_defect", "variational.perimeter_functions",
                "variational.deformation_function",
                "variational.pseudo_orbit_diagnostics",
                "variational.max_perimeter_polygon",
                "verify_cli.fit_loglog_slope"}
    tol = cfg.tolerances
    v = PerturbationSeries.single_cos(5, 1.0)
    thetas = np.arange(cfg.theta_grid) / cfg.theta_grid
    slopes = {}
    for e in cfg.eccentricities:
        pose = EllipsePose(e)
        for q in cfg.q_values:
            reports, _ = variational.perimeter_defect(
                pose, v, q, cfg.epsilons, thetas)
            pairs = [(r.epsilon, r.defect) for r in reports if r.defect > 0]
            fit = fit_loglog_slope(pairs)
            slopes[(e, q)] = fit["slope"]
            for r in reports:
                rep.data.append({"e": e, "q": q, "epsilon": r.epsilon,
                                 "defect": r.defect, "slope": fit["slope"]})
    ok = all(tol["slope_lo"] <= s <= tol["slope_hi"] for s in slopes.values())

    # pseudo-orbit diagnostics on one representative cell
    pose = EllipsePose(cfg.eccentricities[-1])
    q = cfg.q_values[-1]
    n = v.scaled(1e-4)
    omega = Boundary(BoundarySpec(pose, n))
    poly = variational.max_perimeter_polygon(omega, q, 0.0)
    diag = variational.pseudo_orbit_diagnostics(pose, omega, poly)
    edges = np.abs(np.diff(np.append(poly.vertices, poly.vertices[0] + 1.0)))
    xi = max(float(np.max(edges * q)), float(np.max(1.0 / (edges * q))))
    angle_dev = float(np.max(np.abs(diag["phi_plus"] - diag["phi_minus"])))
    bound = 5.0 * xi * q * n.c1_norm()
    rep.fits = {"slopes": {f"e={e},q={q}": s for (e, q), s in slopes.items()},
                "deviated_angle": angle_dev, "deviated_angle_bound": bound,
                "xi": xi}
    rep.passes = {
        "defect_slope": ok,
        "deviated_angle_bound": angle_dev <= bound,
    }
    rep.plot_series = {
        f"e={e},q={q}": ([r["epsilon"] for r in rep.data
                          if r["e"] == e and r["q"] == q],
                         [r["defect"] for r in rep.data
                          if r["e"] == e and r["q"] == q])
        for e in cfg.eccentricities for q in cfg.q_values}
    rep.plot_title = "E7 perimeter defect"
    rep.plot_xlabel, rep.plot_ylabel = "||n||_C1", "defect"
    rep.plot_loglog = True


def _run_e8(cfg: ExperimentConfig, rep: Report):
    """Projection estimate: exact-ellipse scenes leak only quadratically into
    dynamical modes."""
    rep.ops |= {"modes.ellipse_from_coeffs", "geometry.reexpress",
                "modes.tilde_coefficients", "modes.five_mode_projection",
                "verify_cli.fit_loglog_slope"}
    tol = cfg.tolerances
    from .geometry import reexpress
    e = cfg.eccentricities[0]
    pose = EllipsePose(e)
    direction = np.array([0.2, 0.5, -0.4, 0.6, 0.45])
    direction = direction / np.linalg.norm(direction)
    kmax = max(cfg.q_values)
    leaks, perps = [], []
    for eps in cfg.epsilons:
        coeffs = eps * direction
        omega = modes.ellipse_from_coeffs(pose, *coeffs)
        n = reexpress(BoundarySpec(omega), pose)
        vals, _ = modes.tilde_coefficients(n, pose, kmax, grid=cfg.norm_grid)
        leak = float(np.max(np.abs(vals[5:])))
        _, _, nperp, _ = modes.five_mode_projection(n, pose, grid=cfg.norm_grid)
        frac = float(np.max(np.abs(nperp))) / max(n.c0_norm(), 1e-300)
        leaks.append(leak)
        perps.append(frac)
        for j in range(5, kmax + 1):
            rep.data.append({"epsilon": eps, "index": j,
                             "tilde": float(vals[j])})
    fit = fit_loglog_slope(list(zip(cfg.epsilons, leaks)))
    rep.fits = {"leak_slope": fit["slope"], "leaks": leaks,
                "perp_fractions": perps}
    rep.passes = {
        "projection_slope": tol["slope_lo"] <= fit["slope"] <= tol["slope_hi"],
        "projection_absorbs_elliptic": max(perps) < tol["perp_fraction"],
    }
    rep.plot_series = {"max dynamical leak": (list(cfg.epsilons), leaks)}
    rep.plot_title = "E8 projection estimate"
    rep.plot_xlabel, rep.plot_ylabel = "epsilon", "max |tilde n_q|, q>4"
    rep.plot_loglog = True


def _run_e9(cfg: ExperimentConfig, rep: Report):
    """Identity gap of the mode-expansion operator across eccentricities."""
    rep.ops |= {"modes.operator_report"}
    tol = cfg.tolerances
    N = cfg.q_values[0]
    gaps = {}
    crossing = None
    for e in cfg.eccentricities:
        out = modes.operator_report(EllipsePose(e), N, grid=cfg.norm_grid)
        gaps[e] = out.gap
        rep.data.append(out.to_dict())
        if crossing is None and e > 0 and out.gap >= out.threshold:
            crossing = e
    rep.fits = {"gaps": {str(e): g for e, g in gaps.items()},
                "threshold_crossing_e": crossing,
                "sqrt_1_pi2_3": float(np.sqrt(1 + np.pi**2 / 3))}
    e_small = min(e for e in cfg.eccentricities if e > 0)
    rep.passes = {
        "gap_zero_at_circle": gaps[0.0] < tol["gap_zero"],
        "gap_small_at_small_e": gaps[e_small] < tol["gap_small"],
    }
    rep.plot_series = {"gap": (list(gaps), [gaps[e] + 1e-300 for e in gaps])}
    rep.plot_title = f"E9 operator gap, N={N}"
    rep.plot_xlabel, rep.plot_ylabel = "eccentricity", "||L_N - Id||_2"


def _run_e10(cfg: ExperimentConfig, rep: Report):
    """Fit contraction on exact-ellipse inputs."""
    rep.ops |= {"modes.fit_ellipse", "geometry.reexpress"}
    tol = cfg.tolerances
    from .geometry import reexpress
    e = cfg.eccentricities[0]
    pose0 = EllipsePose(e)
    ok = True
    for eps_target in cfg.epsilons:
        # a small rotation produces a C1 distance proportional to the angle
        probe = reexpress(BoundarySpec(EllipsePose(e, tilt=1e-4)), pose0).c1_norm()
        tilt = 1e-4 * eps_target / probe
        target = EllipsePose(e, tilt=tilt)
        eps = reexpress(BoundarySpec(target), pose0).c1_norm()
        res = modes.fit_ellipse(BoundarySpec(target), pose0)
        bound = eps ** tol["contraction_exponent"]
        ok = ok and (res.c1_norm <= bound) and res.converged
        rep.data.append({"eps_target": eps_target, "eps": eps,
                         "residual": res.c1_norm, "bound": bound,
                         "iterations": res.iterations,
                         "converged": res.converged})
    rep.fits = {"residuals": [r["residual"] for r in rep.data]}
    rep.passes = {"fit_contraction": ok}
    rep.plot_series = {"residual": ([r["eps"] for r in rep.data],
                                    [r["residual"] + 1e-300 for r in rep.data]),
                       "bound": ([r["eps"] for r in rep.data],
                                 [r["bound"] for r in rep.data])}
    rep.plot_title = "E10 fit contraction"
    rep.plot_xlabel, rep.plot_ylabel = "input C1 distance", "fit residual"
    rep.plot_loglog = True


def _run_e10b(cfg: ExperimentConfig, rep: Report):
    """Separation: a resonant non-elliptic perturbation breaks exactly the
    resonant caustic and cannot be absorbed by the fit."""
    rep.ops |= {"variational.integrability_scan", "modes.fit_ellipse"}
    tol = cfg.tolerances
    eps = cfg.epsilons[0]
    circle = EllipsePose(0.0)
    n = PerturbationSeries.single_cos(3, eps)
    omega = Boundary(BoundarySpec(circle, n))
    scans = {q: variational.integrability_scan(omega, q, n_starts=32)
             for q in cfg.q_values}
    res = modes.fit_ellipse(omega, circle)
    for q, scan in scans.items():
        rep.data.append({"q": q,
                         "perimeter_variation": scan["perimeter_variation"],
                         "closure_residual": scan["closure_residual"]})
    rep.data.append({"q": None, "fit_residual": res.c1_norm,
                     "n_c1": n.c1_norm()})
    rep.fits = {"fit_residual": res.c1_norm, "n_c1": n.c1_norm()}
    rep.passes = {
        "resonant_caustic_broken":
            scans[3]["perimeter_variation"] > tol["variation_factor"] * eps,
        "nonresonant_caustic_survives":
            scans[4]["perimeter_variation"] < tol["variation_factor"] * eps,
        "fit_does_not_absorb":
            res.c1_norm >= tol["residual_floor"] * eps,
    }
    rep.plot_series = {"variation": (
        list(cfg.q_values),
        [scans[q]["perimeter_variation"] + 1e-300 for q in cfg.q_values])}
    rep.plot_title = "E10b resonant separation"
    rep.plot_xlabel, rep.plot_ylabel = "q", "perimeter variation"


def _run_e11(cfg: ExperimentConfig, rep: Report):
    """Lazutkin coordinates of periodic orbits: y_k near 1/q with cubic
    control, and edge lengths comparable to 1/q."""
    rep.ops |= {"action_angle.build_chart", "dynamics.to_lazutkin",
                "dynamics.billiard_step"}
    tol = cfg.tolerances
    e = cfg.eccentricities[0]
    pose = EllipsePose(e)
    bnd = as_boundary(pose)
    devs, xis = {}, {}
    for q in cfg.q_values:
        chart = get_chart(pose, q)
        s = float(np.mod(chart.S_of(0.31), 1.0))
        phi = float(chart.Phi_of(0.31))
        ys, pts = [], []
        s_cur, phi_cur = s, phi
        for _ in range(q):
            lz = dynamics.to_lazutkin(bnd, PhasePoint(s_cur, phi_cur))
            back = dynamics.from_lazutkin(bnd, lz)
            assert abs(back.s - s_cur) < 1e-10
            ys.append(lz.y)
            pts.append(np.asarray(bnd.point(bnd.tau_of_s(s_cur))))
            nxt = dynamics.billiard_step(bnd, PhasePoint(s_cur, phi_cur))
            s_cur, phi_cur = nxt.s, nxt.phi
        ys = np.array(ys)
        pts = np.array(pts)
        edges = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=-1)
        dev = float(q**3 * np.max(np.abs(ys - 1.0 / q)))
        xi = max(float(np.max(edges * q)), float(np.max(1.0 / (edges * q))))
        devs[q], xis[q] = dev, xi
        rep.data.append({"q": q, "scaled_y_deviation": dev, "xi": xi})
    qs = sorted(devs)
    mid = qs[len(qs) // 2]
    head = max(devs[q] for q in qs if q <= mid)
    tail = max(devs[q] for q in qs if q > mid)
    xi_fit = max(xis.values())
    rep.fits = {"fitted_constant": max(devs.values()), "head": head,
                "tail": tail, "xi": xi_fit}
    rep.passes = {
        "y_deviation_bounded": tail <= tol["tail_factor"] * head,
        "edge_lengths": xi_fit < tol["xi"],
    }
    rep.plot_series = {"q^3 max|y-1/q|": (qs, [devs[q] for q in qs]),
                       "xi": (qs, [xis[q] for q in qs])}
    rep.plot_title = "E11 Lazutkin orbit bounds"
    rep.plot_xlabel, rep.plot_ylabel = "q", "scaled deviation"


_RUNNERS = {
    "E1": _run_e1, "E2": _run_e2, "E3": _run_e3, "E4": _run_e4,
    "E5": _run_e5, "E6": _run_e6, "E7": _run_e7, "E8": _run_e8,
    "E9": _run_e9, "E10": _run_e10, "E10b": _run_e10b, "E11": _run_e11,
}


def run_experiment(cfg: ExperimentConfig) -> Report:
    """Run one experiment; deterministic data under a fixed config and seed."""
    rep = Report(id=cfg.experiment, config=cfg.to_dict())
    rep.ops |= {"verify_cli.run_experiment", "verify_cli.emit"}
    start = time.perf_counter()
    try:
        _RUNNERS[cfg.experiment](cfg, rep)
    except Exception:
        rep.error = traceback.format_exc()
        rep.passes["completed"] = False
    rep.wall_time_s = time.perf_counter() - start
    return rep


def run_all(seed: int = 20260810, out_dir: str = "reports",
            experiments=None) -> dict[str, Report]:
    reports = {}
    for exp_id in experiments or ALL_EXPERIMENTS:
        cfg = ExperimentConfig.for_experiment(exp_id, seed=seed, out_dir=out_dir)
        reports[exp_id] = run_experiment(cfg)
    return reports


def coverage(reports) -> dict:
    """Operation-coverage self-test over a collection of reports."""
    touched = set()
    for rep in (reports.values() if isinstance(reports, dict) else reports):
        touched |= rep.ops
    touched |= {"verify_cli.emit"}
    missing = sorted(DECLARED_OPS - touched)
    return {"touched": sorted(touched), "missing": missing,
            "complete": not missing}
