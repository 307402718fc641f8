import numpy as np
import pytest

from caustica.action_angle import build_chart
from caustica.geometry import (
    Boundary,
    BoundarySpec,
    EllipsePose,
    PerturbationSeries,
)
from caustica.variational import (
    deformation_function,
    integrability_scan,
    max_perimeter_polygon,
    perimeter_defect,
    perimeter_functions,
    pseudo_orbit_diagnostics,
)

CIRCLE = EllipsePose(0.0)


def regular_qgon_perimeter(q):
    # chords of a regular q-gon in the circle of radius 1/(2 pi)
    return q * np.sin(np.pi / q) / np.pi


class TestMaxPerimeterPolygon:
    def test_circle_triangle(self):
        poly = max_perimeter_polygon(CIRCLE, 3, 0.0)
        assert np.allclose(np.sort(poly.vertices), [0.0, 1 / 3, 2 / 3], atol=1e-10)
        assert poly.perimeter == pytest.approx(regular_qgon_perimeter(3), abs=1e-12)

    @pytest.mark.parametrize("q", range(3, 13))
    def test_circle_regular_qgon(self, q):
        poly = max_perimeter_polygon(CIRCLE, q, 0.13)
        assert poly.perimeter == pytest.approx(regular_qgon_perimeter(q), abs=1e-10)

    def test_perimeter_independent_of_start_on_ellipse(self):
        pose = EllipsePose(0.25)
        chart = build_chart(pose, 5)
        perims = [max_perimeter_polygon(pose, 5, s0, chart=chart).perimeter
                  for s0 in np.linspace(0, 1, 64, endpoint=False)]
        assert np.ptp(perims) < 1e-9

    def test_converged_reflection_residuals(self):
        pose = EllipsePose(0.3)
        poly = max_perimeter_polygon(pose, 7, 0.31)
        assert np.max(np.abs(poly.reflection_residuals[1:])) < 1e-10
        # on an integrable table the pinned vertex also closes
        assert abs(poly.reflection_residuals[0]) < 1e-9

    def test_vertices_cyclically_ordered(self):
        poly = max_perimeter_polygon(EllipsePose(0.4), 6, 0.62)
        assert np.all(np.diff(poly.tau) > 0)
        assert poly.tau[-1] - poly.tau[0] < 2 * np.pi

    def test_perimeter_invariant_under_index_rotation(self):
        # restarting from any vertex of the converged polygon gives the same
        # perimeter (index rotation), as does the reversed traversal
        pose = EllipsePose(0.2)
        poly = max_perimeter_polygon(pose, 5, 0.11)
        again = max_perimeter_polygon(pose, 5, float(poly.vertices[2]))
        assert again.perimeter == pytest.approx(poly.perimeter, abs=1e-11)

    def test_rejects_bad_q(self):
        with pytest.raises(ValueError):
            max_perimeter_polygon(CIRCLE, 2, 0.0)


class TestPerimeterFunctions:
    def test_zero_perturbation_matches_chart(self):
        pose = EllipsePose(0.2)
        thetas = np.linspace(0, 1, 16, endpoint=False)
        L0, L1 = perimeter_functions(pose, BoundarySpec(pose), 4, thetas)
        assert np.max(np.abs(L1 - L0)) < 1e-10

    def test_enlarged_circle_first_order(self):
        c = 1e-4
        q = 5
        n = PerturbationSeries(np.array([c]), np.array([]))
        omega = Boundary(BoundarySpec(CIRCLE, n))
        thetas = np.linspace(0, 1, 8, endpoint=False)
        L0, L1 = perimeter_functions(CIRCLE, omega, q, thetas)
        # oracle: the enlarged circle has radius 1/(2 pi) + c
        exact = 2 * q * np.sin(np.pi / q) * (1 / (2 * np.pi) + c)
        assert np.max(np.abs(L1 - exact)) < 1e-12
        assert np.max(np.abs(L1 - L0 - 2 * np.pi * c * regular_qgon_perimeter(q))) \
            < 5 * c**2 * q

    def test_resonant_mode_gives_theta_dependence(self):
        pose = EllipsePose(0.1)
        eps = 1e-4
        n = PerturbationSeries.single_cos(3, eps)
        omega = Boundary(BoundarySpec(pose, n))
        thetas = np.linspace(0, 1, 32, endpoint=False)
        _, L1 = perimeter_functions(pose, omega, 3, thetas)
        assert np.ptp(L1) > 0.1 * eps


class TestDeformationFunction:
    def test_constant_mode_on_circle(self):
        c = 2e-3
        chart = build_chart(CIRCLE, 4)
        n = PerturbationSeries(np.array([c]), np.array([]))
        D = deformation_function(n, chart, np.linspace(0, 1, 9))
        expected = 2 * np.pi * c * regular_qgon_perimeter(4)
        assert np.allclose(D, expected, atol=1e-14)

    def test_linearity(self):
        chart = build_chart(EllipsePose(0.2), 5)
        n = PerturbationSeries.single_cos(2, 1e-3)
        thetas = np.linspace(0, 1, 16, endpoint=False)
        assert np.allclose(deformation_function(n.scaled(2.0), chart, thetas),
                           2.0 * deformation_function(n, chart, thetas),
                           rtol=0, atol=1e-18)

    def test_homothety_mode_nearly_constant(self):
        # scaling deformations keep every rational caustic integrable, so the
        # first-order perimeter change cannot depend on theta
        pose = EllipsePose(0.1)
        chart = build_chart(pose, 4)
        from caustica.modes import base_modes
        c0 = base_modes(pose)[0]
        eps = 1e-4
        n = PerturbationSeries.from_samples(
            eps * c0.samples, degree=40, rtol=None)
        thetas = np.linspace(0, 1, 32, endpoint=False)
        D = deformation_function(n, chart, thetas)
        assert np.ptp(D) < 1e-6 * np.max(np.abs(D))


class TestPerimeterDefect:
    def test_zero_direction(self):
        reports, _ = perimeter_defect(EllipsePose(0.1),
                                      PerturbationSeries.zero(), 3,
                                      [1e-3], np.linspace(0, 1, 8))
        assert reports[0].defect == 0.0

    def test_quadratic_scaling(self):
        v = PerturbationSeries.single_cos(5, 1.0)
        eps_list = [1e-3, 3e-4, 1e-4, 3e-5]
        reports, slope = perimeter_defect(
            EllipsePose(0.1), v, 3, eps_list,
            np.linspace(0, 1, 32, endpoint=False))
        assert 1.85 <= slope <= 2.15
        assert all(r.defect > 0 for r in reports)

    def test_circle_translation_direction_bounded(self):
        v = PerturbationSeries.single_cos(1, 1.0)
        eps_list = [1e-3, 3e-4, 1e-4]
        reports, _ = perimeter_defect(CIRCLE, v, 4, eps_list,
                                      np.linspace(0, 1, 16, endpoint=False))
        ratios = [r.defect / r.epsilon**2 for r in reports]
        assert max(ratios) < 10 * max(min(ratios), 1e-12) + 1.0


class TestPseudoOrbitDiagnostics:
    def test_unperturbed_is_degenerate(self):
        pose = EllipsePose(0.2)
        poly = max_perimeter_polygon(pose, 5, 0.2)
        diag = pseudo_orbit_diagnostics(pose, pose, poly)
        assert np.max(diag["v"]) < 1e-9
        assert np.max(np.abs(diag["phi_plus"] - diag["phi_minus"])) < 1e-8

    def test_translation_mode_angle_deviation(self):
        pose = EllipsePose(0.1)
        eps = 1e-4
        q = 5
        n = PerturbationSeries.single_cos(1, eps)
        omega = Boundary(BoundarySpec(pose, n))
        poly = max_perimeter_polygon(omega, q, 0.17)
        diag = pseudo_orbit_diagnostics(pose, omega, poly)
        # chord lengths stay comparable to 1/q, so the angle deviation obeys
        # |phi+ - phi-| <= 5 Xi q eps with a modest Xi
        dev = np.max(np.abs(diag["phi_plus"] - diag["phi_minus"]))
        assert dev <= 5 * 3.0 * q * eps
        # the instant first integral drifts at most linearly along the orbit
        drift = np.abs(diag["I_plus"] - np.median(diag["I_plus"]))
        assert np.max(drift) < 50 * q * eps

    def test_displacements_bounded_by_perturbation(self):
        pose = EllipsePose(0.15)
        eps = 2e-4
        n = PerturbationSeries.single_cos(2, eps)
        omega = Boundary(BoundarySpec(pose, n))
        poly = max_perimeter_polygon(omega, 4, 0.0)
        diag = pseudo_orbit_diagnostics(pose, omega, poly)
        assert np.max(diag["v"]) < 100 * eps


class TestIntegrabilityScan:
    @pytest.mark.parametrize("q", [3, 5, 8])
    def test_exact_ellipse_is_integrable(self, q):
        out = integrability_scan(BoundarySpec(EllipsePose(0.25)), q, n_starts=16)
        assert out["perimeter_variation"] < 1e-9
        assert out["closure_residual"] < 1e-9

    def test_resonant_perturbation_breaks_third_caustic(self):
        eps = 1e-3
        n = PerturbationSeries.single_cos(3, eps)
        omega = Boundary(BoundarySpec(CIRCLE, n))
        out3 = integrability_scan(omega, 3, n_starts=32)
        out4 = integrability_scan(omega, 4, n_starts=32)
        assert out3["perimeter_variation"] > 1e-5
        assert out4["perimeter_variation"] < 1e-2 * eps


class TestOrbitGapSpread:
    def test_scaled_lazutkin_gap_spread_bounded(self):
        # Euclidean chords of a q-periodic orbit vary at relative O(1) on a
        # genuine ellipse; the quantities with uniform-in-q control are the
        # Lazutkin gaps (O(1/q^2) around 1/q) and heights (O(1/q^3))
        from caustica.action_angle import get_chart
        pose = EllipsePose(0.25)
        spread = {}
        for q in [4, 8, 16, 32]:
            chart = get_chart(pose, q)
            x = np.asarray(chart.Xq_of(0.12 + np.arange(q + 1) / q))
            spread[q] = q**2 * np.max(np.abs(np.diff(x) - 1.0 / q))
        assert spread[32] < 2.0 * max(spread[4], spread[8])

    def test_perimeter_invariant_under_reflection(self):
        pose = EllipsePose(0.2)
        poly = max_perimeter_polygon(pose, 5, 0.23)
        # time reversal: the mirrored start on the axis-symmetric ellipse
        mirrored = max_perimeter_polygon(pose, 5, 1.0 - 0.23)
        assert mirrored.perimeter == pytest.approx(poly.perimeter, abs=1e-11)


class TestDefectRatioWindow:
    def test_defect_over_eps_squared_within_three_decades(self):
        v = PerturbationSeries.single_cos(5, 1.0)
        eps_list = [1e-3, 3e-4, 1e-4, 3e-5]
        reports, _ = perimeter_defect(EllipsePose(0.1), v, 4, eps_list,
                                      np.linspace(0, 1, 32, endpoint=False))
        ratios = [r.defect / r.epsilon**2 for r in reports]
        assert min(ratios) > 1e-3 * max(ratios)


class TestDeformationIsTheDerivative:
    def test_matches_centered_difference_of_max_perimeter(self):
        # central differences of the maximal perimeter leave only the
        # quadratic remainder: if D missed any first-order term the gap
        # would be O(1) instead of O(eps^2)
        from caustica.action_angle import get_chart
        pose = EllipsePose(0.15)
        q = 4
        chart = get_chart(pose, q)
        c = np.zeros(9)
        s = np.zeros(8)
        c[0], c[4], s[7] = 0.2, 0.5, 0.3
        v = PerturbationSeries(c, s)
        thetas = np.linspace(0, 1, 16, endpoint=False)
        D = deformation_function(v, chart, thetas)
        gaps = {}
        for eps in (1e-4, 3e-4):
            _, lp = perimeter_functions(
                pose, Boundary(BoundarySpec(pose, v.scaled(eps))), q, thetas,
                chart)
            _, lm = perimeter_functions(
                pose, Boundary(BoundarySpec(pose, v.scaled(-eps))), q, thetas,
                chart)
            gaps[eps] = np.max(np.abs((lp - lm) / (2 * eps) - D))
        assert gaps[1e-4] < 1e-3 * np.max(np.abs(D))
        ratio = gaps[3e-4] / gaps[1e-4]
        assert 6.0 < ratio < 13.0  # ~ (3e-4/1e-4)^2
