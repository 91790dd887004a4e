"""Logically rectangular node grids carrying a per-cell Riemannian metric.

Nodes are indexed ``k = i * n_v + j`` with ``i`` along the first coordinate
(``u``) and ``j`` along the second (``v``). A periodic direction has as many
cells as nodes; a bounded direction has one cell fewer. An optional cell mask
switches cells off (planar regions with holes); nodes touched by no active
cell drop out of every assembled operator.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import MetricNotSPD, OpenPath


@dataclass(frozen=True)
class Generator:
    """One generator of first homology together with a loop representing it.

    ``kind`` is ``"periodic-u"``, ``"periodic-v"`` or ``"hole"``; holes carry a
    planar ``center`` strictly inside the hole, used for the angle form.
    """

    kind: str
    loop: tuple
    center: Optional[tuple] = None
    label: str = ""


@dataclass(frozen=True, eq=False)
class Grid2D:
    n_u: int
    n_v: int
    h_u: float
    h_v: float
    periodic: tuple
    metric: np.ndarray
    cell_mask: Optional[np.ndarray] = None
    origin: tuple = (0.0, 0.0)
    metric_at: Optional[Callable] = None
    embedding: Optional[Callable] = None
    generators: tuple = ()
    name: str = "grid"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        metric = np.asarray(self.metric, dtype=float)
        if metric.shape != (self.nc_u, self.nc_v, 2, 2):
            raise ValueError(
                f"metric shape {metric.shape} != {(self.nc_u, self.nc_v, 2, 2)}"
            )
        object.__setattr__(self, "metric", metric)
        if self.cell_mask is None:
            object.__setattr__(self, "cell_mask", np.ones((self.nc_u, self.nc_v), bool))
        g = metric[self.cell_mask]
        sym = np.abs(g[:, 0, 1] - g[:, 1, 0]).max(initial=0.0)
        det = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] * g[:, 1, 0]
        if sym > 1e-12 * max(1.0, np.abs(g).max(initial=1.0)) or np.any(g[:, 0, 0] <= 0) or np.any(det <= 0):
            raise MetricNotSPD(f"{self.name}: cell metric not symmetric positive definite")

    # -- shape -------------------------------------------------------------
    @property
    def nc_u(self):
        return self.n_u if self.periodic[0] else self.n_u - 1

    @property
    def nc_v(self):
        return self.n_v if self.periodic[1] else self.n_v - 1

    @property
    def n_nodes(self):
        return self.n_u * self.n_v

    def node(self, i, j):
        return (np.asarray(i) % self.n_u) * self.n_v + (np.asarray(j) % self.n_v)

    def node_coords(self):
        """Grid coordinates ``(u, v)`` of every node, each shaped ``(n_u, n_v)``."""
        u = self.origin[0] + self.h_u * np.arange(self.n_u)
        v = self.origin[1] + self.h_v * np.arange(self.n_v)
        return np.meshgrid(u, v, indexing="ij")

    def cell_centers(self):
        u = self.origin[0] + self.h_u * (np.arange(self.nc_u) + 0.5)
        v = self.origin[1] + self.h_v * (np.arange(self.nc_v) + 0.5)
        return np.meshgrid(u, v, indexing="ij")

    def coords(self, u, v):
        """Variable bindings for expressions: grid coords plus planar embedding."""
        if self.embedding is not None:
            x, y = self.embedding(u, v)
        else:
            x, y = u, v
        return {"r": u, "t": v, "x": x, "y": y}

    # -- cells and edges ---------------------------------------------------
    def active_cells(self):
        """Index arrays ``(ci, cj)`` of active cells."""
        return np.nonzero(self.cell_mask)

    def cell_corners(self, ci=None, cj=None):
        """Corner node indices ``[n00, n10, n01, n11]`` per active cell."""
        if ci is None:
            ci, cj = self.active_cells()
        return np.stack(
            [self.node(ci, cj), self.node(ci + 1, cj), self.node(ci, cj + 1), self.node(ci + 1, cj + 1)],
            axis=1,
        )

    def cell_weights(self, ci=None, cj=None):
        """Riemannian area of each active cell, one-point quadrature."""
        if ci is None:
            ci, cj = self.active_cells()
        g = self.metric[ci, cj]
        det = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] ** 2
        return np.sqrt(det) * self.h_u * self.h_v

    def active_nodes(self):
        """Boolean mask over nodes touched by at least one active cell."""
        used = np.zeros(self.n_nodes, bool)
        used[self.cell_corners().ravel()] = True
        return used

    def lumped_mass(self):
        mass = np.zeros(self.n_nodes)
        np.add.at(mass, self.cell_corners(), self.cell_weights()[:, None] / 4.0)
        return mass

    def area(self):
        return float(self.cell_weights().sum())

    @property
    def n_edges_u(self):
        return self.nc_u * self.n_v

    @property
    def n_edges(self):
        return self.nc_u * self.n_v + self.n_u * self.nc_v

    def edge_index_u(self, i, j):
        return (np.asarray(i) % self.n_u) * self.n_v + (np.asarray(j) % self.n_v)

    def edge_index_v(self, i, j):
        return self.n_edges_u + (np.asarray(i) % self.n_u) * self.nc_v + (np.asarray(j) % self.n_v)

    def edge_endpoints(self):
        """Tail and head node of every edge, u-edges first then v-edges."""
        iu, ju = np.meshgrid(np.arange(self.nc_u), np.arange(self.n_v), indexing="ij")
        iv, jv = np.meshgrid(np.arange(self.n_u), np.arange(self.nc_v), indexing="ij")
        tail = np.concatenate([self.node(iu, ju).ravel(), self.node(iv, jv).ravel()])
        head = np.concatenate([self.node(iu + 1, ju).ravel(), self.node(iv, jv + 1).ravel()])
        return tail, head

    def edge_geometry(self):
        """Start point ``(u, v)`` and direction (0 for u, 1 for v) of every edge."""
        iu, ju = np.meshgrid(np.arange(self.nc_u), np.arange(self.n_v), indexing="ij")
        iv, jv = np.meshgrid(np.arange(self.n_u), np.arange(self.nc_v), indexing="ij")
        u0 = self.origin[0] + self.h_u * np.concatenate([iu.ravel(), iv.ravel()])
        v0 = self.origin[1] + self.h_v * np.concatenate([ju.ravel(), jv.ravel()])
        direction = np.concatenate([np.zeros(iu.size, int), np.ones(iv.size, int)])
        return u0, v0, direction

    def cell_edges(self, ci=None, cj=None):
        """Edge indices ``[eu0, eu1, ev0, ev1]`` (bottom, top, left, right) per active cell."""
        if ci is None:
            ci, cj = self.active_cells()
        return np.stack(
            [
                self.edge_index_u(ci, cj),
                self.edge_index_u(ci, cj + 1),
                self.edge_index_v(ci, cj),
                self.edge_index_v(ci + 1, cj),
            ],
            axis=1,
        )

    def active_edges(self):
        used = np.zeros(self.n_edges, bool)
        used[self.cell_edges().ravel()] = True
        return used

    def boundary_nodes(self):
        """Active nodes lying on the boundary of the union of active cells."""
        count = np.zeros(self.n_nodes, int)
        np.add.at(count, self.cell_corners().ravel(), 1)
        return (count > 0) & (count < 4)

    def boundary_tags(self):
        tags = np.full(self.n_nodes, "interior", dtype=object)
        tags[self.boundary_nodes()] = "neumann"
        tags[~self.active_nodes()] = "inactive"
        return tags

    # -- loops -------------------------------------------------------------
    def loop_edges(self, loop):
        """Signed edge list ``(edge_index, sign)`` of a closed node cycle.

        ``loop`` is a sequence of node indices; the cycle closes from the last
        node back to the first. Raises OpenPath if two consecutive nodes are
        not grid neighbours.
        """
        nodes = list(loop)
        if len(nodes) < 2:
            raise OpenPath("a loop needs at least two nodes")
        if nodes[0] == nodes[-1]:
            nodes = nodes[:-1]
        edges, signs = [], []
        for a, b in zip(nodes, nodes[1:] + nodes[:1]):
            ia, ja = divmod(int(a), self.n_v)
            ib, jb = divmod(int(b), self.n_v)
            di, dj = ib - ia, jb - ja
            if self.periodic[0] and abs(di) == self.n_u - 1 and self.n_u > 2:
                di = -np.sign(di)
            if self.periodic[1] and abs(dj) == self.n_v - 1 and self.n_v > 2:
                dj = -np.sign(dj)
            if (di, dj) == (1, 0):
                edges.append(int(self.edge_index_u(ia, ja))); signs.append(1.0)
            elif (di, dj) == (-1, 0):
                edges.append(int(self.edge_index_u(ib, jb))); signs.append(-1.0)
            elif (di, dj) == (0, 1):
                edges.append(int(self.edge_index_v(ia, ja))); signs.append(1.0)
            elif (di, dj) == (0, -1):
                edges.append(int(self.edge_index_v(ib, jb))); signs.append(-1.0)
            else:
                raise OpenPath(f"nodes {a} and {b} are not adjacent")
        return np.array(edges, int), np.array(signs)

    def loop_u(self, j=0):
        """Node cycle once around the periodic u direction at row ``j``."""
        if not self.periodic[0]:
            raise OpenPath("u is not periodic")
        return tuple(int(k) for k in self.node(np.arange(self.n_u), j))

    def loop_v(self, i=0):
        """Node cycle once around the periodic v direction at column ``i``."""
        if not self.periodic[1]:
            raise OpenPath("v is not periodic")
        return tuple(int(k) for k in self.node(i, np.arange(self.n_v)))

    def betti1(self, removed_nodes=None):
        """First Betti number of the active complex minus ``removed_nodes``.

        Uses nodes, edges and cells whose vertices all survive; b1 = b0 - V + E - F.
        """
        keep = self.active_nodes().copy()
        if removed_nodes is not None:
            keep[np.asarray(removed_nodes, int)] = False
        corners = self.cell_corners()
        cells_ok = keep[corners].all(axis=1)
        tail, head = self.edge_endpoints()
        edge_ok = self.active_edges() & keep[tail] & keep[head]
        n_v = int(keep.sum())
        n_e = int(edge_ok.sum())
        n_f = int(cells_ok.sum())
        b0 = _components(np.nonzero(keep)[0], tail[edge_ok], head[edge_ok], self.n_nodes)
        # a fully periodic grid with every cell present is a closed surface (b2 = 1)
        closed = all(self.periodic) and n_f == self.nc_u * self.nc_v
        return b0 - n_v + n_e - n_f + int(closed), b0


def _components(nodes, tail, head, n_total):
    import scipy.sparse as sp
    from scipy.sparse.csgraph import connected_components

    if nodes.size == 0:
        return 0
    adj = sp.coo_matrix((np.ones(tail.size), (tail, head)), shape=(n_total, n_total)).tocsr()
    sub = adj[nodes][:, nodes]
    n, _ = connected_components(sub, directed=False)
    return int(n)


def flat_grid(n_u, n_v, length_u, length_v, periodic=(False, False), origin=(0.0, 0.0), cell_mask=None, name="flat"):
    """Cartesian grid with identity metric; ``n_u, n_v`` count cells."""
    nodes_u = n_u if periodic[0] else n_u + 1
    nodes_v = n_v if periodic[1] else n_v + 1
    metric = np.broadcast_to(np.eye(2), (n_u, n_v, 2, 2)).copy()
    gens = []
    grid = Grid2D(nodes_u, nodes_v, length_u / n_u, length_v / n_v, tuple(periodic), metric,
                  cell_mask=cell_mask, origin=origin, name=name,
                  metric_at=lambda u, v: np.broadcast_to(np.eye(2), np.shape(u) + (2, 2)))
    if periodic[0]:
        gens.append(Generator("periodic-u", grid.loop_u(0), label="u"))
    if periodic[1]:
        gens.append(Generator("periodic-v", grid.loop_v(0), label="v"))
    object.__setattr__(grid, "generators", tuple(gens))
    return grid
