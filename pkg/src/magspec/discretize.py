"""Gauge-covariant assembly of discrete magnetic Laplacians.

The stiffness matrix is the Galerkin matrix of ``Q_A(u) = int |du - i u A|^2``
with covariant edge differences ``D_e u = u_head exp(-i theta_e) - u_tail``.
Per cell the energy is a corner quadrature: at each of the four corners the
two incident edge differences are rebased to that corner (multiplied by
``exp(i theta_e)`` when the corner is the edge head) and combined through the
cell's inverse metric. Rebasing makes each corner term transform by a single
phase under a gauge change, so gauge invariance and Hermiticity are exact.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import Disconnected, EmptyDomain, MissingLink
from .forms import CORNER_AT_HEAD, LinkField, corner_blocks


@dataclass(frozen=True, eq=False)
class AssembledOperator:
    """Hermitian pencil ``(K, M)`` restricted to the free degrees of freedom."""

    K: sp.csr_matrix
    M: np.ndarray
    dof_nodes: np.ndarray
    n_nodes: int
    meta: dict = field(default_factory=dict)

    @property
    def n_dof(self):
        return self.M.size

    def scaled(self):
        """``M^{-1/2} K M^{-1/2}`` as a CSR matrix."""
        s = sp.diags(1.0 / np.sqrt(self.M))
        return (s @ self.K @ s).tocsr()

    def to_nodes(self, x):
        """Scatter a dof vector back onto all grid nodes (zero elsewhere)."""
        out = np.zeros(self.n_nodes, dtype=np.result_type(x, float))
        out[self.dof_nodes] = x
        return out

    def from_nodes(self, u):
        return np.asarray(u)[self.dof_nodes]

    def hermitian_defect(self):
        diff = self.K - self.K.getH()
        return float(np.abs(diff.data).max(initial=0.0))

    def write_triplets(self, path):
        """Text export: header ``n nnz_K``, then ``K i j re im`` rows and ``M i i value`` rows."""
        K = self.K.tocoo()
        with open(path, "w") as fh:
            fh.write(f"{self.n_dof} {K.nnz}\n")
            for i, j, v in zip(K.row, K.col, K.data):
                fh.write(f"K {i} {j} {v.real:.17g} {v.imag:.17g}\n")
            for i, m in enumerate(self.M):
                fh.write(f"M {i} {i} {m:.17g} 0\n")


def read_triplets(path):
    """Inverse of :meth:`AssembledOperator.write_triplets`; returns ``(K, M)``."""
    with open(path) as fh:
        n, _ = (int(x) for x in fh.readline().split())
        rows, cols, vals, mass = [], [], [], np.zeros(n)
        for line in fh:
            tag, i, j, re, im = line.split()
            if tag == "K":
                rows.append(int(i))
                cols.append(int(j))
                vals.append(float(re) + 1j * float(im))
            else:
                mass[int(i)] = float(re)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n)), mass


def _check_links(grid, links):
    if isinstance(links, LinkField):
        if links.grid is not grid and links.grid.n_edges != grid.n_edges:
            raise MissingLink("link field belongs to a different grid")
        theta = links.theta
    else:
        theta = np.asarray(links, dtype=float)
    if theta.shape != (grid.n_edges,):
        raise MissingLink(f"expected {grid.n_edges} link phases, got {theta.shape}")
    if not np.all(np.isfinite(theta[grid.active_edges()])):
        raise MissingLink("undefined link phase on an active edge")
    return theta


def _stiffness(grid, theta):
    """Full node-indexed stiffness matrix (CSR, complex)."""
    edges, wg = corner_blocks(grid)  # (n, 4, 2), (n, 2, 2)
    tail, head = grid.edge_endpoints()
    h = np.array([grid.h_u, grid.h_v])
    ph = np.exp(-1j * theta[edges])
    rebase = np.where(CORNER_AT_HEAD[None], np.exp(1j * theta[edges]), 1.0)
    # each corner row a touches two nodes: (head, coefficient) and (tail, coefficient)
    nodes = np.stack([head[edges], tail[edges]], axis=-1)  # (n, 4, 2, 2)
    coef = np.stack([rebase * ph, -rebase], axis=-1) / h[None, None, :, None]
    rows, cols, vals = [], [], []
    for a in range(2):
        for b in range(2):
            w = wg[:, a, b][:, None]
            for p in range(2):
                for q in range(2):
                    rows.append(nodes[:, :, a, p].ravel())
                    cols.append(nodes[:, :, b, q].ravel())
                    vals.append((np.conj(coef[:, :, a, p]) * w * coef[:, :, b, q]).ravel())
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.n_nodes, grid.n_nodes),
    ).tocsr()
    K.sum_duplicates()
    # symmetrize away rounding so K is Hermitian bit for bit
    return ((K + K.getH()) * 0.5).tocsr()


def _restrict(grid, K, free, meta):
    dof = np.nonzero(free)[0]
    if dof.size == 0:
        raise EmptyDomain("no free degrees of freedom")
    mass = grid.lumped_mass()[dof]
    Kr = K[dof][:, dof].tocsr()
    return AssembledOperator(Kr, mass, dof, grid.n_nodes, meta)


def assemble_magnetic(grid, links, label=""):
    """Magnetic Neumann (natural) problem on all active nodes."""
    theta = _check_links(grid, links)
    K = _stiffness(grid, theta)
    meta = {"grid": grid.name, "potential": getattr(links, "label", label), "bc": "magnetic-neumann"}
    return _restrict(grid, K, grid.active_nodes(), meta)


def assemble_mixed(grid, links, dirichlet_nodes, label=""):
    """Dirichlet on ``dirichlet_nodes`` (eliminated), natural condition elsewhere."""
    theta = _check_links(grid, links)
    dirichlet = np.zeros(grid.n_nodes, bool)
    dirichlet[np.asarray(dirichlet_nodes, dtype=int)] = True
    if not dirichlet.any():
        raise EmptyDomain("no Dirichlet nodes given")
    free = grid.active_nodes() & ~dirichlet
    if not free.any():
        raise EmptyDomain("Dirichlet set covers the whole grid")
    _, b0 = grid.betti1(np.nonzero(dirichlet)[0])
    if b0 != 1:
        raise EmptyDomain(f"Dirichlet elimination leaves {b0} components")
    K = _stiffness(grid, theta)
    meta = {
        "grid": grid.name,
        "potential": getattr(links, "label", label),
        "bc": f"mixed ({int(dirichlet.sum())} dirichlet nodes)",
    }
    op = _restrict(grid, K, free, meta)
    object.__setattr__(op, "meta", {**meta, "dirichlet_nodes": np.nonzero(dirichlet)[0]})
    return op


def assemble_masked_planar(mask, links, dirichlet_nodes=None):
    """Flat-metric assembly on a cell mask (staircase boundary, natural condition)."""
    grid = links.grid if isinstance(links, LinkField) else mask.grid()
    _, b0 = grid.betti1()
    if b0 != 1:
        raise Disconnected(f"mask has {b0} components")
    if dirichlet_nodes is not None and len(dirichlet_nodes):
        return assemble_mixed(grid, links, dirichlet_nodes)
    return assemble_magnetic(grid, links)


def assemble_circle(theta, H, length=None):
    """1-D periodic covariant stencil for the circle with metric ``theta^2 dt^2``.

    ``theta`` and ``H`` are node samples on ``n`` uniform parameter nodes of
    ``[0, length)``; the edge phase is the trapezoid integral of ``H``.
    """
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    H = np.asarray(H, dtype=float) * np.ones(n)
    if np.any(theta <= 0):
        raise ValueError("metric density must be positive")
    length = float(n if length is None else length)
    h = length / n
    theta = theta * n / theta.sum()
    nxt = np.roll(np.arange(n), -1)
    link = 0.5 * h * (H + H[nxt])
    w = 1.0 / (h * 0.5 * (theta + theta[nxt]))
    ph = np.exp(-1j * link)
    idx = np.arange(n)
    rows = np.concatenate([idx, nxt, idx, nxt])
    cols = np.concatenate([idx, nxt, nxt, idx])
    vals = np.concatenate([w, w, -w * ph, -w * np.conj(ph)])
    K = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    K = ((K + K.getH()) * 0.5).tocsr()
    meta = {"grid": f"circle(n={n})", "potential": "H dt", "bc": "periodic", "flux": float(link.sum() / (2 * np.pi))}
    return AssembledOperator(K, theta * h, np.arange(n), n, meta)
