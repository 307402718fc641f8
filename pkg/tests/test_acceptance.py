"""Acceptance suite: every verification experiment at its pinned tolerance.

Each test runs one experiment with the default (pinned) configuration, prints
one PASS/FAIL line per criterion, and asserts both the criteria and the
stated runtime budget.  Run with `pytest tests/test_acceptance.py -v -s` to
see the lines as they appear.
"""

from caustica.experiments import (
    ALL_EXPERIMENTS,
    DECLARED_OPS,
    ExperimentConfig,
    coverage,
    run_experiment,
)

RUNTIME_BUDGET_S = {
    "E1": 30, "E2": 5, "E3": 120, "E4": 120, "E5": 180, "E6": 120,
    "E7": 300, "E8": 180, "E9": 120, "E10": 180, "E10b": 180, "E11": 120,
}

_REPORT_CACHE = {}


def _get(exp_id):
    if exp_id not in _REPORT_CACHE:
        cfg = ExperimentConfig.for_experiment(exp_id)
        _REPORT_CACHE[exp_id] = run_experiment(cfg)
    return _REPORT_CACHE[exp_id]


def _announce(rep):
    for name, flag in sorted(rep.passes.items()):
        print(f"ACCEPT {rep.id} {name}: {'PASS' if flag else 'FAIL'}")
    if rep.error:
        print(rep.error)


def _assert_report(rep):
    _announce(rep)
    assert rep.error is None, f"{rep.id} raised:\n{rep.error}"
    assert rep.passed, f"{rep.id} criteria failed: {rep.passes}"
    assert rep.wall_time_s < RUNTIME_BUDGET_S[rep.id], \
        f"{rep.id} exceeded runtime budget"


def test_e1_first_integral_conservation():
    rep = _get("E1")
    assert rep.config["n_starts"] == 20
    assert rep.config["orbit_steps"] == 10000
    assert rep.fits["max_drift"] < 1e-9
    _assert_report(rep)


def test_e2_circle_closed_forms():
    rep = _get("E2")
    assert rep.config["q_values"] == list(range(3, 13))
    _assert_report(rep)


def test_e3_conjugacy():
    rep = _get("E3")
    assert rep.config["eccentricities"] == [0.1, 0.2, 0.4]
    assert rep.config["q_values"] == list(range(3, 16))
    assert rep.fits["conjugacy"] < 1e-8
    assert rep.fits["density"] < 1e-8
    _assert_report(rep)


def test_e4_ellipse_integrability():
    rep = _get("E4")
    assert rep.fits["max_variation"] < 1e-9
    assert rep.fits["max_closure"] < 1e-9
    _assert_report(rep)


def test_e5_mode_convergence():
    rep = _get("E5")
    slope = rep.fits["slopes"]["0.2"]
    assert -1.3 <= slope <= -0.7
    assert rep.fits["q_weighted_max"]["0.05"] < rep.fits["q_weighted_max"]["0.2"]
    _assert_report(rep)


def test_e6_orthogonality():
    rep = _get("E6")
    assert rep.fits["max_inner_product"] < 1e-8
    _assert_report(rep)


def test_e7_perimeter_defect_scaling():
    rep = _get("E7")
    for key, slope in rep.fits["slopes"].items():
        assert 1.85 <= slope <= 2.15, f"{key}: slope {slope}"
    _assert_report(rep)


def test_e8_projection_estimate():
    rep = _get("E8")
    assert 1.8 <= rep.fits["leak_slope"] <= 2.2
    _assert_report(rep)


def test_e9_operator_gap():
    rep = _get("E9")
    assert rep.fits["gaps"]["0.0"] < 1e-10
    assert rep.fits["gaps"]["0.1"] < 1.0
    assert "threshold_crossing_e" in rep.fits  # reported, None when no crossing
    _assert_report(rep)


def test_e10_fit_contraction():
    rep = _get("E10")
    for row in rep.data:
        assert row["residual"] <= row["eps"] ** 1.5
    _assert_report(rep)


def test_e10b_resonant_separation():
    rep = _get("E10b")
    _assert_report(rep)


def test_e11_lazutkin_orbit_bounds():
    rep = _get("E11")
    assert rep.fits["xi"] < 3.0
    _assert_report(rep)


def test_operation_coverage_complete():
    reports = {exp_id: _get(exp_id) for exp_id in ALL_EXPERIMENTS}
    cov = coverage(reports)
    print(f"ACCEPT coverage: {'PASS' if cov['complete'] else 'FAIL'} "
          f"({len(cov['touched'])}/{len(DECLARED_OPS)} operations)")
    assert cov["complete"], f"missing operations: {cov['missing']}"
