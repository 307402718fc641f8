import numpy as np
import pytest

from caustica.geometry import (
    Boundary,
    BoundarySpec,
    EllipsePose,
    PerturbationSeries,
    as_boundary,
    reexpress,
)
from caustica.modes import (
    ModeTable,
    base_modes,
    deformed_mode,
    ellipse_from_coeffs,
    fit_ellipse,
    five_mode_projection,
    fourier_coefficients,
    mode_basis,
    operator_report,
    tilde_coefficients,
    w_q,
    weighted_inner_product,
)

CIRCLE = EllipsePose(0.0)
GRID = 2048
X = np.arange(GRID) / GRID


def fourier_table(j, grid=GRID):
    x = np.arange(grid) / grid
    if j == 0:
        return ModeTable(0, "fourier", x, np.ones(grid))
    k = (j + 1) // 2
    ang = 2 * np.pi * k * x
    vals = np.sqrt(2) * (np.cos(ang) if j % 2 == 0 else np.sin(ang))
    return ModeTable(j, "fourier", x, vals)


def series_from_table(tab, amplitude=1.0, degree=48):
    return PerturbationSeries.from_samples(amplitude * tab.samples, degree,
                                           rtol=None)


class TestWq:
    def test_value_and_range(self):
        assert w_q(3) == pytest.approx(3 * np.sin(np.pi / 3) / np.pi, rel=1e-15)
        assert w_q(3) == pytest.approx(0.826993, abs=1e-6)
        for q in range(3, 60):
            assert 0.5 <= w_q(q) <= 1.0


class TestDeformedModes:
    def test_circle_modes_are_fourier(self):
        for q in [3, 5, 11]:
            cq, sq = deformed_mode(CIRCLE, q)
            assert np.max(np.abs(cq.samples - np.cos(2 * np.pi * q * X))) < 1e-10
            assert np.max(np.abs(sq.samples - np.sin(2 * np.pi * q * X))) < 1e-10

    def test_deviation_decays_like_inverse_q(self):
        devs = {}
        for q in [4, 8, 16, 32]:
            cq, _ = deformed_mode(EllipsePose(0.2), q)
            devs[q] = np.max(np.abs(cq.samples - np.cos(2 * np.pi * q * X)))
        qs = np.array(sorted(devs))
        slope = np.polyfit(np.log(qs), np.log([devs[q] for q in qs]), 1)[0]
        assert -1.3 <= slope <= -0.7

    def test_smaller_eccentricity_smaller_constant(self):
        def cstar(e):
            out = 0.0
            for q in [3, 6, 12]:
                cq, _ = deformed_mode(EllipsePose(e), q)
                out = max(out, q * np.max(np.abs(
                    cq.samples - np.cos(2 * np.pi * q * X))))
            return out
        assert cstar(0.05) < cstar(0.2)

    def test_rejects_small_q(self):
        with pytest.raises(ValueError):
            deformed_mode(CIRCLE, 2)


class TestBaseModes:
    def test_circle_closed_forms(self):
        c0, c1, s1, c2, s2 = base_modes(CIRCLE)
        r = 1 / (2 * np.pi)
        assert np.allclose(c0.samples, r, atol=1e-12)
        assert np.max(np.abs(c1.samples - np.cos(2 * np.pi * X))) < 1e-12
        assert np.max(np.abs(s1.samples - np.sin(2 * np.pi * X))) < 1e-12
        assert np.max(np.abs(c2.samples - r * np.cos(4 * np.pi * X))) < 1e-12
        assert np.max(np.abs(s2.samples - r * np.sin(4 * np.pi * X))) < 1e-12

    def test_translation_first_order(self):
        # oracle: re-express the translated ellipse and compare with the
        # first-order prediction a1 c1 + b1 s1; the residual is quadratic
        pose = EllipsePose(0.2)
        _, c1, s1, _, _ = base_modes(pose)
        devs = {}
        for delta in [1e-3, 1e-4]:
            a1, b1 = delta, -0.5 * delta
            shifted = EllipsePose(0.2, center=(a1, b1))
            n = reexpress(BoundarySpec(shifted), pose)
            pred = a1 * c1.samples + b1 * s1.samples
            devs[delta] = np.max(np.abs(n(X) - pred))
        assert devs[1e-3] / 1e-6 < 10.0
        slope = (np.log(devs[1e-3]) - np.log(devs[1e-4])) / np.log(10.0)
        assert slope == pytest.approx(2.0, abs=0.1)

    def test_homothety_first_order(self):
        pose = EllipsePose(0.15)
        c0 = base_modes(pose)[0]
        devs = {}
        for a0 in [1e-3, 1e-4]:
            grown = EllipsePose(0.15, scale=np.exp(a0))
            n = reexpress(BoundarySpec(grown), pose)
            devs[a0] = np.max(np.abs(n(X) - a0 * c0.samples))
        slope = (np.log(devs[1e-3]) - np.log(devs[1e-4])) / np.log(10.0)
        assert slope == pytest.approx(2.0, abs=0.1)

    def test_hyperbolic_first_order(self):
        pose = EllipsePose(0.1)
        _, _, _, c2, s2 = base_modes(pose)
        a2 = 1e-2
        rotated = ellipse_from_coeffs(pose, 0.0, 0.0, 0.0, a2, 0.0)
        n = reexpress(BoundarySpec(rotated), pose)
        dev = np.max(np.abs(n(X) - a2 * c2.samples))
        assert dev < 5 * a2**2


class TestWeightedInnerProduct:
    def test_fourier_orthonormal_with_unit_weight(self):
        for j in range(5):
            for k in range(5):
                val = weighted_inner_product(fourier_table(j), fourier_table(k),
                                             np.ones(GRID))
                assert val == pytest.approx(1.0 if j == k else 0.0, abs=1e-12)

    def test_circle_weighted_c0(self):
        c0 = base_modes(CIRCLE)[0]
        mu = as_boundary(CIRCLE).mu_of_x
        assert weighted_inner_product(c0, c0, mu) == pytest.approx(
            1 / (4 * np.pi), rel=1e-12)

    def test_base_dynamical_orthogonality(self):
        pose = EllipsePose(0.1)
        basis = mode_basis(pose, 31)
        mu = np.asarray(as_boundary(pose).mu_of_x(X))
        for j in range(5):
            for k in [5, 9, 18, 30]:
                val = weighted_inner_product(basis[j], basis[k], mu)
                assert abs(val) < 1e-8

    def test_grid_mismatch(self):
        small = ModeTable(0, "fourier", np.arange(64) / 64, np.ones(64))
        with pytest.raises(ValueError):
            weighted_inner_product(small, fourier_table(0), np.ones(GRID))


class TestTildeCoefficients:
    def test_circle_unit_response(self):
        q = 6
        n = series_from_table(fourier_table(2 * q))
        vals, _ = tilde_coefficients(n, CIRCLE, 2 * q + 3)
        assert vals[2 * q] == pytest.approx(1.0, abs=1e-12)
        mask = np.ones(len(vals), dtype=bool)
        mask[2 * q] = False
        assert np.max(np.abs(vals[mask])) < 1e-12

    def test_decay_diagnostic_bounded(self):
        n = PerturbationSeries.single_cos(3, 1e-3)
        vals, diag = tilde_coefficients(n, EllipsePose(0.1), 24)
        qs = np.array([max((j + 1) // 2, 1) for j in range(len(vals))])
        assert diag["frequency_weighted_max"] == pytest.approx(
            np.max(qs[1:] * np.abs(vals[1:])))
        assert diag["frequency_weighted_max"] < 10 * n.c1_norm()

    def test_parseval_constant_near_one_at_small_e(self):
        rng = np.random.default_rng(3)
        n = PerturbationSeries(1e-3 * rng.standard_normal(7) / (1 + np.arange(7)) ** 2,
                               1e-3 * rng.standard_normal(6) / (1 + np.arange(6)) ** 2)
        vals, _ = tilde_coefficients(n, EllipsePose(0.05), 40)
        l2 = np.sqrt(np.mean(n(X) ** 2))
        ratio = l2**2 / np.sum(vals**2)
        assert 0.5 < ratio < 2.0


class TestOperatorReport:
    def test_identity_at_zero_eccentricity(self):
        rep = operator_report(CIRCLE, 24)
        assert rep.gap < 1e-10

    def test_threshold_constant(self):
        # the smallness condition compares against c_star * sqrt(1 + pi^2/3)
        assert np.sqrt(1 + np.pi**2 / 3) == pytest.approx(2.07120, abs=1e-5)
        assert 1 / np.sqrt(1 + np.pi**2 / 3) == pytest.approx(0.48281, abs=1e-5)

    def test_small_eccentricity_invertible(self):
        rep = operator_report(EllipsePose(0.1), 24)
        assert rep.gap < 1.0
        assert rep.invertible_bound

    def test_gap_grows_with_eccentricity(self):
        gaps = [operator_report(EllipsePose(e), 16).gap for e in (0.05, 0.3)]
        assert gaps[0] < gaps[1]

    def test_truncation_cap(self):
        with pytest.raises(ValueError):
            operator_report(CIRCLE, 129)


class TestFiveModeProjection:
    def test_recovers_pure_base_mode(self):
        pose = EllipsePose(0.2)
        _, c1, s1, _, _ = base_modes(pose)
        n = np.sqrt(2) * c1.samples
        coeffs, n5, nperp, ortho = five_mode_projection(n, pose)
        assert coeffs[1] == pytest.approx(np.sqrt(2), rel=1e-10)
        assert np.max(np.abs(np.delete(coeffs, 1))) < 1e-10
        assert np.max(np.abs(nperp)) < 1e-10
        assert ortho < 1e-12

    def test_dynamical_mode_not_absorbed(self):
        pose = EllipsePose(0.1)
        ek = mode_basis(pose, 10)[9]
        coeffs, _, nperp, _ = five_mode_projection(ek.samples, pose)
        assert np.max(np.abs(coeffs)) < 1e-8
        assert np.max(np.abs(nperp - ek.samples)) < 1e-8

    def test_mixed_input_splits(self):
        pose = EllipsePose(0.1)
        basis = mode_basis(pose, 8)
        n = 0.3 * basis[1].samples + 0.2 * basis[7].samples
        _, n5, nperp, _ = five_mode_projection(n, pose)
        assert np.max(np.abs(n5 - 0.3 * basis[1].samples)) < 1e-8
        assert np.max(np.abs(nperp - 0.2 * basis[7].samples)) < 1e-8


class TestEllipseFromCoeffs:
    def test_identity(self):
        pose = EllipsePose(0.3, center=(0.1, 0.2), tilt=0.5, scale=1.2)
        assert ellipse_from_coeffs(pose, 0, 0, 0, 0, 0) == pose

    def test_homothety_doubles_lengths(self):
        pose = EllipsePose(0.25)
        out = ellipse_from_coeffs(pose, np.log(2.0), 0, 0, 0, 0)
        assert out.eccentricity == pytest.approx(0.25, abs=1e-12)
        assert out.scale == pytest.approx(2.0, rel=1e-12)
        assert out.semi_major == pytest.approx(2 * pose.semi_major, rel=1e-12)

    def test_translation_in_own_frame(self):
        pose = EllipsePose(0.2, tilt=np.pi / 2)
        out = ellipse_from_coeffs(pose, 0, 1e-3, 0, 0, 0)
        # (a1, b1) = (1e-3, 0) along the rotated major axis -> world y
        assert out.center[0] == pytest.approx(0.0, abs=1e-18)
        assert out.center[1] == pytest.approx(1e-3, rel=1e-12)

    def test_hyperbolic_rotation_eccentricity_bound(self):
        # |e' - e| <= C(e) sqrt(a2^2 + b2^2); near the circle C(e) ~ 2/e
        for e in [0.1, 0.3]:
            pose = EllipsePose(e)
            for a2, b2 in [(1e-3, 0.0), (0.0, 1e-3), (5e-4, -5e-4)]:
                out = ellipse_from_coeffs(pose, 0, 0, 0, a2, b2)
                assert abs(out.eccentricity - e) <= (2.5 / e) * np.hypot(a2, b2)

    def test_hyperbolic_rotation_preserves_area(self):
        pose = EllipsePose(0.2)
        out = ellipse_from_coeffs(pose, 0, 0, 0, 8e-3, 3e-3)
        area0 = np.pi * pose.semi_major * pose.semi_minor
        area1 = np.pi * out.semi_major * out.semi_minor
        assert area1 == pytest.approx(area0, rel=1e-12)


class TestFitEllipse:
    def test_exact_input_is_fixed_point(self):
        pose = EllipsePose(0.2)
        res = fit_ellipse(BoundarySpec(pose), pose)
        assert res.converged
        assert res.iterations == 0
        assert res.c1_norm < 1e-11

    def test_contracts_to_nearby_ellipse(self):
        pose0 = EllipsePose(0.2)
        target = EllipsePose(0.2, tilt=2.5e-3)
        eps = reexpress(BoundarySpec(target), pose0).c1_norm()
        assert 1e-4 < eps < 1e-2
        res = fit_ellipse(BoundarySpec(target), pose0)
        assert res.converged
        assert res.c1_norm <= eps**1.5

    def test_does_not_absorb_dynamical_mode(self):
        pose = EllipsePose(0.1)
        eps = 1e-3
        ek = mode_basis(pose, 8)[7]
        n = series_from_table(ek, amplitude=eps)
        omega = Boundary(BoundarySpec(pose, n))
        res = fit_ellipse(omega, pose)
        assert np.max(np.abs(res.coefficients)) <= 1e-2 * eps
        # the non-elliptic direction must be neither absorbed nor inflated
        assert 0.9 * n.c1_norm() <= res.c1_norm <= 1.1 * n.c1_norm()

    def test_rotation_invariance(self):
        pose0 = EllipsePose(0.15)
        pert = PerturbationSeries.single_cos(3, 5e-4)
        res_a = fit_ellipse(Boundary(BoundarySpec(pose0, pert)), pose0)
        ang = 0.7
        pose_r = EllipsePose(0.15, tilt=ang)
        res_b = fit_ellipse(Boundary(BoundarySpec(pose_r, pert)), pose_r)
        assert res_b.c1_norm == pytest.approx(res_a.c1_norm, abs=1e-10)

    def test_polish_does_not_hurt(self):
        pose0 = EllipsePose(0.1)
        target = EllipsePose(0.1, center=(2e-4, -1e-4), tilt=1e-3)
        plain = fit_ellipse(BoundarySpec(target), pose0)
        polished = fit_ellipse(BoundarySpec(target), pose0, polish=True)
        assert polished.c1_norm <= plain.c1_norm * (1 + 1e-6) + 1e-12


class TestFourierCoefficients:
    def test_round_trip(self):
        rng = np.random.default_rng(11)
        coeffs = rng.standard_normal(9)
        x = X
        f = coeffs[0] * np.ones(GRID)
        for j in range(1, 9):
            k = (j + 1) // 2
            ang = 2 * np.pi * k * x
            f = f + coeffs[j] * np.sqrt(2) * (np.cos(ang) if j % 2 == 0
                                              else np.sin(ang))
        got = fourier_coefficients(f, 9)
        assert np.allclose(got, coeffs, atol=1e-13)


class TestGramConditioning:
    @pytest.mark.parametrize("e", [0.1, 0.3, 0.5])
    def test_gram_spd_and_well_conditioned(self, e):
        pose = EllipsePose(e)
        quint = base_modes(pose)
        mu = np.asarray(as_boundary(pose).mu_of_x(quint[0].x))
        G = np.array([[weighted_inner_product(mi, mj, mu) for mj in quint]
                      for mi in quint])
        assert np.allclose(G, G.T, atol=1e-15)
        evals = np.linalg.eigvalsh(G)
        assert evals.min() > 0
        assert evals.max() / evals.min() < 1e3


class TestFitFromOffPose:
    def test_recovers_fully_displaced_ellipse(self):
        target = EllipsePose(0.12, center=(3e-3, -2e-3), tilt=0.05, scale=1.01)
        res = fit_ellipse(BoundarySpec(target), EllipsePose(0.1), max_iters=20)
        assert res.converged
        assert res.c1_norm < 1e-10
        assert res.pose.eccentricity == pytest.approx(0.12, abs=1e-9)
        assert res.pose.scale == pytest.approx(1.01, rel=1e-9)
        assert res.pose.center[0] == pytest.approx(3e-3, abs=1e-9)
