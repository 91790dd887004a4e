import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magspec.closed_form import (
    circle_lambda,
    circle_operator_residual,
    circle_spectrum,
    product_cylinder_lambda1,
    torus_lambda1,
    torus_spectrum,
)
from magspec.errors import BoxTooSmall

TWO_PI = 2 * np.pi


class TestCircle:
    def test_flat_circle_values(self):
        spec = circle_spectrum(TWO_PI, 1.0, 0.3, (-3, 3))
        assert spec.flux == pytest.approx(0.3)
        assert np.allclose(spec.eigenvalues[:4], [0.09, 0.49, 1.69, 2.89])
        assert list(spec.ks[:4]) == [0, 1, -1, 2]

    def test_metric_does_not_change_eigenvalues(self):
        flat = circle_spectrum(TWO_PI, 1.0, 0.3)
        warped = circle_spectrum(TWO_PI, lambda t: 1 + 0.5 * np.sin(t), lambda t: 0.3 + np.cos(2 * t))
        assert np.allclose(warped.eigenvalues, flat.eigenvalues, atol=1e-10)

    def test_length_scaling(self):
        assert circle_lambda(4.0, 0.25, 1) == pytest.approx((TWO_PI / 4.0) ** 2 * 0.75 ** 2)

    def test_half_flux_degenerate_pair(self):
        spec = circle_spectrum(TWO_PI, 1.0, 0.5, (-2, 2))
        assert spec.eigenvalues[0] == pytest.approx(0.25) == spec.eigenvalues[1]

    @pytest.mark.parametrize("index", [0, 1, 2])
    def test_eigenfunctions_solve_the_equation(self, index):
        theta = lambda t: (1 + 0.4 * np.cos(t)) * np.ones_like(t)  # noqa: E731 - mean one on [0, 2 pi)
        H = lambda t: (0.3 + 0.2 * np.sin(t)) * np.ones_like(t)  # noqa: E731
        spec = circle_spectrum(TWO_PI, theta, H, (-3, 3), n=8192)
        u = spec.eigenfunction(index)
        t = np.linspace(0.1, 6.0, 25)
        res = circle_operator_residual(u, theta, H, t, h=1e-3)
        assert np.abs(res - spec.eigenvalues[index] * u(t)).max() < 1e-5 * max(1.0, spec.eigenvalues[index])

    def test_eigenfunction_is_quasi_periodic_with_unit_modulus(self):
        spec = circle_spectrum(TWO_PI, 1.0, 0.3)
        u = spec.eigenfunction(0)
        t = np.linspace(0, 1, 5)
        assert np.allclose(np.abs(u(t)), 1.0)
        assert np.allclose(u(t + TWO_PI), u(t) * np.exp(2j * np.pi * 0.3) * np.exp(2j * np.pi * (spec.ks[0] - 0.3)))

    def test_rejects_nonpositive_metric(self):
        with pytest.raises(ValueError):
            circle_spectrum(TWO_PI, np.cos, 0.3)


class TestTorus:
    def test_square_half_flux(self):
        spec = torus_spectrum((TWO_PI, TWO_PI), (0.5, 0.5), count=5)
        assert np.allclose(spec.eigenvalues[:4], 0.5)
        assert spec.eigenvalues[4] == pytest.approx(2.5)

    def test_box_too_small(self):
        with pytest.raises(BoxTooSmall):
            torus_spectrum((TWO_PI, 1.0), (0.1, 0.0), count=8, k_box=1)

    def test_matches_brute_force(self):
        p, f = (3.0, 5.0), (0.2, -0.7)
        ks = np.array([(a, b) for a in range(-8, 9) for b in range(-8, 9)])
        brute = np.sort(np.sum((TWO_PI / np.array(p)) ** 2 * (ks - f) ** 2, axis=1))[:12]
        assert np.allclose(torus_spectrum(p, f, count=12).eigenvalues, brute)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3))
    def test_lambda1_periodic_and_symmetric(self, a, b):
        p = (TWO_PI, 4.0)
        base = torus_lambda1(p, (a, b))
        assert torus_lambda1(p, (a + 1, b - 2)) == pytest.approx(base, abs=1e-12)
        assert torus_lambda1(p, (-a, -b)) == pytest.approx(base, abs=1e-12)
        assert torus_spectrum(p, (a, b), count=1).eigenvalues[0] == pytest.approx(base, abs=1e-12)


class TestProductCylinder:
    def test_values(self):
        assert product_cylinder_lambda1(1.0, 1.0, 0.5) == pytest.approx(0.25)
        assert product_cylinder_lambda1(2.0, 2.0, 0.3) == pytest.approx(0.09 / 4)
        assert product_cylinder_lambda1(1.0, 1.0, 3.0) == 0.0

    def test_rejects_bad_dimensions(self):
        with pytest.raises(ValueError):
            product_cylinder_lambda1(0.0, 1.0, 0.5)
