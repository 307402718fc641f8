import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from caustica.elliptic import (
    complete_first,
    complete_second,
    elliptic_integral,
    incomplete_first,
    incomplete_second,
)


def test_degenerate_modulus():
    assert elliptic_integral("K", 0.0) == pytest.approx(np.pi / 2, abs=1e-15)
    assert elliptic_integral("E", 0.0) == pytest.approx(np.pi / 2, abs=1e-15)


def test_complete_second_against_quadrature():
    # oracle: adaptive quadrature of sqrt(1 - k^2 sin^2)
    k = 0.5
    ref, _ = quad(lambda t: np.sqrt(1 - k * k * np.sin(t) ** 2), 0, np.pi / 2,
                  epsabs=1e-13, epsrel=1e-13)
    assert ref == pytest.approx(1.4674622, abs=1e-7)
    assert float(elliptic_integral("E", k)) == pytest.approx(ref, abs=1e-14)


def test_completeness_identity():
    for k in [0.0, 0.3, 0.8, 0.99]:
        assert float(elliptic_integral("F", k, np.pi / 2)) == pytest.approx(
            float(elliptic_integral("K", k)), abs=1e-14)


def test_modulus_out_of_range():
    with pytest.raises(ValueError):
        elliptic_integral("K", 1.0)
    with pytest.raises(ValueError):
        elliptic_integral("E", -0.1)


def test_quasi_periodicity():
    m = 0.4
    phi = np.linspace(-3, 3, 11)
    K = complete_first(m)
    E = complete_second(m)
    assert np.allclose(incomplete_first(phi + np.pi, m),
                       incomplete_first(phi, m) + 2 * K, atol=1e-13)
    assert np.allclose(incomplete_second(phi + np.pi, m),
                       incomplete_second(phi, m) + 2 * E, atol=1e-13)


@given(st.floats(min_value=-8.0, max_value=8.0),
       st.floats(min_value=0.0, max_value=0.95))
@settings(max_examples=200, deadline=None)
def test_incomplete_first_against_mpmath(phi, m):
    ref = float(mpmath.ellipf(phi, m))
    assert float(incomplete_first(phi, m)) == pytest.approx(ref, abs=1e-12)


@given(st.floats(min_value=-8.0, max_value=8.0),
       st.floats(min_value=0.0, max_value=0.95))
@settings(max_examples=200, deadline=None)
def test_incomplete_second_against_mpmath(phi, m):
    ref = float(mpmath.ellipe(phi, m))
    assert float(incomplete_second(phi, m)) == pytest.approx(ref, abs=1e-12)


def test_dense_grid_has_no_outliers():
    # a single glitched sample in a dense grid would wreck spectral fits;
    # compare second differences against smoothness of the integrand
    m = 0.0225
    phi = np.linspace(0.98437, 0.98438, 2001)
    vals = incomplete_first(phi, m)
    second = np.abs(np.diff(vals, 2))
    assert second.max() < 1e-12
