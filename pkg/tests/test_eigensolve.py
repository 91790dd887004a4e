import numpy as np
import pytest
import scipy.sparse as sp

from magspec.discretize import AssembledOperator, assemble_magnetic
from magspec.eigensolve import Spectrum, lobpcg, m_inner, rayleigh, smallest_eigs
from magspec.errors import NoConvergence, ZeroVector
from magspec.experiments import Realizer, _problem
from magspec.forms import HarmonicBasis
from magspec.geometry import RectTorus

TWO_PI = 2 * np.pi


@pytest.fixture(scope="module")
def annulus_op():
    real = Realizer({"kind": "annulus", "inner": {"shape": "circle", "radius": 1.0},
                     "outer": {"shape": "circle", "radius": 2.0}})
    return _problem(real, {"kind": "harmonic-flux", "flux": [0.5]}, 32)[3]


@pytest.fixture(scope="module")
def torus_op():
    grid = RectTorus((TWO_PI, TWO_PI)).grid(32)
    return assemble_magnetic(grid, HarmonicBasis.build(grid).combination([0.5, 0.5]))


def diagonal_op(values):
    n = len(values)
    return AssembledOperator(sp.diags(np.asarray(values, dtype=complex)).tocsr(), np.ones(n), np.arange(n), n)


class TestDense:
    def test_frozen_annulus_values(self, annulus_op):
        spec = smallest_eigs(annulus_op, 3, tol=1e-11, method="dense")
        assert annulus_op.n_dof == 288
        assert np.allclose(spec.eigenvalues, [0.11515109434990953, 0.11515109434990953, 1.015877914544963],
                           rtol=1e-10)
        assert spec.converged and spec.method == "dense"

    def test_vectors_are_m_orthonormal_and_residuals_small(self, annulus_op):
        spec = smallest_eigs(annulus_op, 3, tol=1e-11)
        G = m_inner(annulus_op, spec.vectors)
        assert np.allclose(G, np.eye(3), atol=1e-12)
        X = spec.vectors
        R = annulus_op.K @ X - (annulus_op.M[:, None] * X) * spec.eigenvalues
        assert np.linalg.norm(R / np.sqrt(annulus_op.M)[:, None], axis=0).max() < 1e-11


class TestLobpcg:
    @pytest.mark.parametrize("preconditioner", ["factorized", "jacobi"])
    def test_agrees_with_dense(self, annulus_op, preconditioner):
        dense = smallest_eigs(annulus_op, 3, tol=1e-10, method="dense").eigenvalues
        it = smallest_eigs(annulus_op, 3, tol=1e-10, method="lobpcg", preconditioner=preconditioner)
        assert np.allclose(it.eigenvalues, dense, rtol=1e-9, atol=1e-12)
        assert it.converged and it.iterations >= 1 and len(it.history) == it.iterations

    def test_fourfold_cluster(self, torus_op):
        spec = smallest_eigs(torus_op, 4, tol=1e-10, method="lobpcg", preconditioner="factorized")
        dense = smallest_eigs(torus_op, 5, tol=1e-10, method="dense").eigenvalues
        assert np.allclose(spec.eigenvalues, dense[:4], rtol=1e-10)
        assert np.ptp(spec.eigenvalues) < 1e-10

    def test_seeded_runs_are_reproducible(self, annulus_op):
        a = smallest_eigs(annulus_op, 2, tol=1e-10, method="lobpcg", seed=11)
        b = smallest_eigs(annulus_op, 2, tol=1e-10, method="lobpcg", seed=11)
        assert np.array_equal(a.eigenvalues, b.eigenvalues)
        assert a.seed == 11

    def test_no_convergence_carries_partial_spectrum(self, annulus_op):
        with pytest.raises(NoConvergence) as info:
            smallest_eigs(annulus_op, 3, tol=1e-14, method="lobpcg", preconditioner="none", maxiter=3)
        exc = info.value
        assert exc.iterations == 3 and np.isfinite(exc.worst_residual)
        assert isinstance(exc.spectrum, Spectrum) and not exc.spectrum.converged

    def test_raw_lobpcg_on_diagonal(self):
        A = sp.diags(np.arange(1.0, 201.0)).tocsr()
        lam, Y, res, its, ok, hist = lobpcg(A, 3, 1e-9, preconditioner="jacobi")
        assert ok and np.allclose(lam[:3], [1.0, 2.0, 3.0])


class TestRayleigh:
    def test_rayleigh_of_eigenvector(self, annulus_op):
        spec = smallest_eigs(annulus_op, 1, tol=1e-11)
        assert rayleigh(annulus_op, spec.vectors[:, 0]) == pytest.approx(spec.lambda1, rel=1e-12)

    def test_rayleigh_is_an_upper_bound(self, annulus_op):
        x = np.random.default_rng(3).normal(size=annulus_op.n_dof)
        assert rayleigh(annulus_op, x) >= smallest_eigs(annulus_op, 1).lambda1

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            rayleigh(diagonal_op([1.0, 2.0]), np.zeros(2))

    def test_bad_request(self):
        with pytest.raises(ValueError):
            smallest_eigs(diagonal_op([1.0, 2.0]), 3)
        with pytest.raises(ValueError):
            smallest_eigs(diagonal_op([1.0, 2.0]), 1, method="magic")

    def test_tolerance_floor_recorded(self):
        spec = smallest_eigs(diagonal_op([1e6, 2e6, 3e6]), 1, tol=1e-20)
        assert spec.tol == pytest.approx(1e3 * np.finfo(float).eps * 3e6)
