import numpy as np
import pytest
import scipy.linalg as sl

from magspec.discretize import (
    assemble_circle,
    assemble_magnetic,
    assemble_masked_planar,
    assemble_mixed,
    read_triplets,
)
from magspec.errors import Disconnected, EmptyDomain, MissingLink
from magspec.forms import HarmonicBasis, LinkField, OneForm, edge_inner_product, incidence
from magspec.geometry import RectTorus, WarpedCylinder, build_example1, build_rectangle
from magspec.grid import flat_grid

TWO_PI = 2 * np.pi


def dense_eigs(op, m):
    return sl.eigh(op.K.toarray(), np.diag(op.M), eigvals_only=True, subset_by_index=[0, m - 1])


@pytest.fixture(scope="module")
def warped():
    cyl = WarpedCylinder(1.0, TWO_PI, lambda r, t: 1 + 0.3 * r * np.cos(t) + 0.1 * np.sin(2 * t))
    grid = cyl.grid(9, 24)
    links = OneForm("general", Hr="0.2*sin(t)", Ht="0.5 + r*cos(t)").links(grid)
    return grid, links


class TestAssembly:
    def test_hermitian_and_positive(self, warped):
        op = assemble_magnetic(*warped)
        assert op.hermitian_defect() < 1e-14
        assert dense_eigs(op, 1)[0] > 0

    def test_zero_potential_is_weighted_graph_laplacian(self, warped):
        grid, _ = warped
        op = assemble_magnetic(grid, LinkField.zero(grid))
        d = incidence(grid)
        K0 = (d.T @ edge_inner_product(grid) @ d).toarray()
        assert np.allclose(op.K.toarray(), K0, atol=1e-13)
        assert np.allclose(op.K @ np.ones(op.n_dof), 0, atol=1e-12)
        assert op.M.sum() == pytest.approx(grid.area(), rel=1e-12)

    def test_gauge_conjugation(self, warped):
        grid, links = warped
        phi = np.random.default_rng(2).uniform(-3, 3, grid.n_nodes)
        K = assemble_magnetic(grid, links).K.toarray()
        Kg = assemble_magnetic(grid, links.gauge(phi)).K.toarray()
        U = np.diag(np.exp(1j * phi))
        assert np.allclose(Kg, U @ K @ U.conj().T, atol=1e-12)

    def test_integer_flux_is_gauge_trivial(self):
        grid = RectTorus((TWO_PI, TWO_PI)).grid(16)
        links = HarmonicBasis.build(grid).combination([1.0, -2.0])
        assert abs(dense_eigs(assemble_magnetic(grid, links), 1)[0]) < 1e-12

    def test_missing_link(self, warped):
        grid, links = warped
        with pytest.raises(MissingLink):
            assemble_magnetic(grid, np.full(grid.n_edges, np.nan))

    def test_triplet_round_trip(self, tmp_path, warped):
        op = assemble_magnetic(*warped)
        path = tmp_path / "op.txt"
        op.write_triplets(path)
        K, M = read_triplets(path)
        assert np.allclose(K.toarray(), op.K.toarray(), atol=1e-15)
        assert np.array_equal(M, op.M)
        assert path.read_text().splitlines()[0] == f"{op.n_dof} {op.K.nnz}"


class TestFlatOracles:
    def test_neumann_rectangle(self):
        # Neumann eigenvalues of [0,2]x[0,1]: (pi/2)^2 k^2 + pi^2 l^2
        grid = flat_grid(32, 16, 2.0, 1.0)
        lam = dense_eigs(assemble_magnetic(grid, LinkField.zero(grid)), 4)
        exact = np.array([0.0, np.pi ** 2 / 4, np.pi ** 2, np.pi ** 2])
        assert np.allclose(lam, exact, atol=5e-3 * np.pi ** 2)

    def test_torus_half_flux_second_order(self):
        errs = []
        for n in (16, 32):
            grid = RectTorus((TWO_PI, TWO_PI)).grid(n)
            links = HarmonicBasis.build(grid).combination([0.5, 0.5])
            errs.append(abs(dense_eigs(assemble_magnetic(grid, links), 1)[0] - 0.5))
        assert np.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.1)

    def test_frozen_torus_value(self):
        grid = RectTorus((TWO_PI, TWO_PI)).grid(16)
        links = HarmonicBasis.build(grid).combination([0.5, 0.5])
        # exact: 2 * (4/h^2) sin^2(h/4) with h = 2 pi / 16
        h = TWO_PI / 16
        assert dense_eigs(assemble_magnetic(grid, links), 1)[0] == pytest.approx(8 / h ** 2 * np.sin(h / 4) ** 2, rel=1e-12)


class TestMixed:
    def test_dirichlet_strip(self):
        # [0,1]x[0,1], Dirichlet on x=0, Neumann elsewhere: first eigenvalue (pi/2)^2
        grid = flat_grid(32, 32, 1.0, 1.0)
        left = grid.node(0, np.arange(grid.n_v))
        op = assemble_mixed(grid, LinkField.zero(grid), left)
        assert op.n_dof == grid.n_nodes - grid.n_v
        assert dense_eigs(op, 1)[0] == pytest.approx(np.pi ** 2 / 4, rel=2e-3)

    def test_empty_and_disconnecting_sets(self):
        grid = flat_grid(8, 8, 1.0, 1.0)
        with pytest.raises(EmptyDomain):
            assemble_mixed(grid, LinkField.zero(grid), [])
        middle = grid.node(4, np.arange(grid.n_v))
        with pytest.raises(EmptyDomain):
            assemble_mixed(grid, LinkField.zero(grid), middle)

    def test_masked_planar(self):
        mask = build_example1(0.4, 0.1)
        grid = mask.grid()
        op = assemble_masked_planar(mask, OneForm("harmonic-flux", flux=(0.5,)).links(grid))
        assert op.n_dof == grid.active_nodes().sum()
        rect = build_rectangle(1.0, 1.0, 0.25)
        assert assemble_masked_planar(rect, LinkField.zero(rect.grid())).n_dof == 25

    def test_masked_planar_rejects_disconnected(self):
        mask = build_rectangle(2.0, 1.0, 0.25)
        grid = flat_grid(8, 4, 2.0, 1.0, cell_mask=np.ones((8, 4), bool))
        object.__setattr__(grid, "cell_mask", np.r_[np.ones((3, 4)), np.zeros((2, 4)), np.ones((3, 4))].astype(bool))
        with pytest.raises(Disconnected):
            assemble_masked_planar(mask, LinkField.zero(grid))


class TestCircle:
    def test_frozen_stencil(self):
        op = assemble_circle(np.ones(64), 0.3 * np.ones(64), TWO_PI)
        h = TWO_PI / 64
        assert op.K[0, 0] == pytest.approx(2 / h)
        # covariant difference u_head exp(-i theta) - u_tail
        assert op.K[0, 1] == pytest.approx(-np.exp(-0.3j * h) / h)
        assert op.meta["flux"] == pytest.approx(0.3)
        assert op.M.sum() == pytest.approx(TWO_PI)

    def test_discrete_circle_spectrum(self):
        # flat stencil eigenvalues are (4/h^2) sin^2((k - flux) h / 2)
        n, flux = 128, 0.3
        op = assemble_circle(np.ones(n), flux * np.ones(n), TWO_PI)
        h = TWO_PI / n
        ks = np.arange(-n // 2, n // 2)
        exact = np.sort(4 / h ** 2 * np.sin((ks - flux) * h / 2) ** 2)[:5]
        assert np.allclose(dense_eigs(op, 5), exact, rtol=1e-10)
