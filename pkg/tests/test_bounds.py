import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magspec.bounds import (
    CSV_COLUMNS,
    BoundReport,
    certify,
    lower_bound_convex_annulus,
    lower_bound_cylinder,
    observed_orders,
    require_simply_connected,
    richardson,
    shikegawa_check,
    subdomain_upper,
    sweep_flux,
    sweep_shape,
    tol_zero,
    upper_bound_closed,
    upper_bound_general,
)
from magspec.eigensolve import smallest_eigs
from magspec.errors import MissingLambda11, NotClosed, NotSimplyConnected
from magspec.experiments import radial_annulus_eigs, radial_annulus_lambda1
from magspec.forms import HarmonicBasis, OneForm
from magspec.geometry import RectTorus, WarpedCylinder
from magspec.grid import flat_grid

TWO_PI = 2 * np.pi


class TestFormulas:
    def test_torus_upper_bound_is_exact_eigenvalue(self):
        grid = RectTorus((TWO_PI, 3.0)).grid(12, 8)
        basis = HarmonicBasis.build(grid)
        ub = upper_bound_closed(TWO_PI * 3.0, basis.combination([0.5, 0.5]), basis)
        assert ub == pytest.approx(0.25 + 0.25 * (TWO_PI / 3.0) ** 2, rel=1e-12)

    def test_upper_bound_rejects_field(self):
        grid = RectTorus((TWO_PI, TWO_PI)).grid(8)
        basis = HarmonicBasis.build(grid)
        with pytest.raises(NotClosed):
            upper_bound_closed(TWO_PI ** 2, OneForm("general", Hr="0", Ht="sin(x)").links(grid), basis)

    def test_upper_bound_general(self):
        assert upper_bound_general(2.0, 1.0, 0.0) == 0.5
        assert upper_bound_general(2.0, 1.0, 4.0, lam11=2.0) == pytest.approx(1.5)
        with pytest.raises(MissingLambda11):
            upper_bound_general(2.0, 1.0, 4.0)

    def test_lower_bounds(self):
        assert lower_bound_cylinder(1.0, TWO_PI, 0.5) == pytest.approx(0.25)
        assert lower_bound_cylinder(2.0, TWO_PI, 0.5) == pytest.approx(0.125)
        assert lower_bound_convex_annulus(1.0, 1.0, 4 * np.pi, 0.5) == pytest.approx(0.0625)
        assert lower_bound_convex_annulus(0.5, 1.5, 4 * np.pi, 0.5) == pytest.approx(1 / 144)
        with pytest.raises(ValueError):
            lower_bound_cylinder(0.5, TWO_PI, 0.5)
        with pytest.raises(ValueError):
            lower_bound_convex_annulus(2.0, 1.0, 1.0, 0.5)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-4, 4, allow_nan=False), st.floats(1, 10), st.floats(0.5, 20))
    def test_bounds_periodic_and_symmetric_in_flux(self, flux, K, L):
        b = lower_bound_cylinder(K, L, flux)
        assert lower_bound_cylinder(K, L, flux + 3) == pytest.approx(b, abs=1e-12)
        assert lower_bound_cylinder(K, L, -flux) == pytest.approx(b, abs=1e-12)
        assert b <= lower_bound_cylinder(K, L, 0.5) + 1e-15


class TestCertify:
    def test_margins_and_verdicts(self):
        lo = certify("LowerCylinder", 0.25, 0.3, "lower", 1e-6)
        up = certify("UpperClosed", 0.5, 0.6, "upper", 1e-6)
        eq = certify("TorusSharpness", 0.5, 0.5 + 1e-9, "equality-upper", 1e-8)
        assert lo.passed and lo.margin == pytest.approx(0.05)
        assert not up.passed and up.margin == pytest.approx(-0.1)
        assert eq.passed
        assert lo.csv_row()[0] == "LowerCylinder" and len(lo.csv_row()) == len(CSV_COLUMNS)

    def test_unknown_names_and_kinds(self):
        with pytest.raises(ValueError):
            certify("Whatever", 0, 0, "lower", 0)
        with pytest.raises(ValueError):
            certify("UpperClosed", 0, 0, "sideways", 0)

    def test_to_dict_is_json_ready(self):
        import json

        r = certify("UpperClosed", 1, 0.5, "upper", 0, {"flux": np.array([0.5]), "k": np.int64(2)})
        assert json.loads(json.dumps(r.to_dict()))["inputs"] == {"flux": [0.5], "k": 2}
        assert isinstance(r, BoundReport)


class TestShikegawa:
    def test_tol_zero(self):
        assert tol_zero(1e-12) == 1e-8
        assert tol_zero(1e-7) == pytest.approx(1e-6)

    def test_both_directions(self):
        assert shikegawa_check(1e-12, [1.0], 0.0).passed
        assert shikegawa_check(0.25, [0.5], 0.0, positive_floor=0.24).passed
        assert not shikegawa_check(0.1, [1.0], 0.0).passed
        assert not shikegawa_check(1e-12, [0.5], 0.0).passed
        assert not shikegawa_check(0.2, [0.5], 0.0, positive_floor=0.24).passed
        # a nonzero field forbids a zero eigenvalue even with integer flux
        assert shikegawa_check(0.3, [1.0], 0.5).passed


class TestSubdomain:
    def test_requires_simply_connected(self):
        grid = WarpedCylinder(1.0, TWO_PI).grid(5, 16)
        with pytest.raises(NotSimplyConnected):
            require_simply_connected(grid, [0])

    def test_slit_cylinder_mixed_eigenvalue(self):
        # slit along r at t=0 turns the cylinder into a rectangle with Dirichlet ends: (pi/2pi)^2
        grid = WarpedCylinder(1.0, TWO_PI).grid(9, 64)
        slit = grid.node(np.arange(grid.n_u), 0)
        links = OneForm("harmonic-flux", flux=(0.5,)).links(grid)
        nu = subdomain_upper(grid, links, slit, 2, lambda op, k: smallest_eigs(op, k, tol=1e-11))
        assert nu[0] == pytest.approx(0.25, rel=1e-3)


class TestExtrapolation:
    def test_richardson_exact_for_quadratic_error(self):
        value, err = richardson(1.0 + 4 * 0.01, 1.0 + 0.01)
        assert value == pytest.approx(1.0) and err == pytest.approx(0.01)

    def test_observed_orders(self):
        h = np.array([0.1, 0.05, 0.025])
        assert np.allclose(observed_orders(h, 3 * h ** 2), 2.0)


class TestSweeps:
    def test_sweep_order_is_input_order(self):
        table = sweep_flux(lambda f: (f - 0.2) ** 2, [0.5, 0.1, 0.9], jobs=3)
        assert np.allclose(table[:, 0], [0.5, 0.1, 0.9])
        assert np.allclose(table[:, 1], [0.09, 0.01, 0.49])

    def test_shape_detection(self):
        phi = np.round(np.arange(0, 1.0001, 0.05), 10)
        good = np.column_stack([phi, np.minimum(phi, 1 - phi) ** 2])
        shape = sweep_shape(good)
        assert shape["symmetric"] and shape["periodic"] and shape["max_at_half"]
        bad = np.column_stack([phi, (phi - 0.3) ** 2])
        assert not sweep_shape(bad)["symmetric"]


class TestRadialOracle:
    def test_no_flux_annulus_bottom(self):
        # rounding level: eps times the largest stencil entry (about 4 / h^2)
        assert radial_annulus_eigs(1.0, 2.0, 0.0, n=400)[0] == pytest.approx(0.0, abs=1e-9)

    def test_half_flux_frozen(self):
        assert radial_annulus_lambda1(1.0, 2.0, 0.5, n=2000) == pytest.approx(0.1153157, abs=2e-7)

    def test_thin_annulus_tends_to_circle(self):
        # radii 1 and 1.01: the first eigenvalue approaches (1/2)^2 / r_mean^2
        lam = radial_annulus_lambda1(1.0, 1.01, 0.5, n=200)
        assert lam == pytest.approx(0.25 / 1.005 ** 2, rel=1e-4)


def test_flat_grid_metric_callable():
    grid = flat_grid(2, 2, 1.0, 1.0)
    assert np.allclose(grid.metric_at(np.zeros(3), np.zeros(3)), np.eye(2))
