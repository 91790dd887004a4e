"""Potential 1-forms on grids: link phases, fluxes, harmonic bases and lattice distances.

A 1-form enters the numerics only through its line integrals along grid
edges (the link phases). Edge orientation follows increasing grid
coordinates; planar hole loops are counterclockwise.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NotClosed, OpenPath, SolverFail
from .expr import Expression

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# Corner quadrature shared by the 1-form inner product and the assembler
# ---------------------------------------------------------------------------

# corner -> (u-edge slot, v-edge slot) in the [eu0, eu1, ev0, ev1] cell layout;
# and whether the corner is the head (not the tail) of that edge
CORNER_EDGES = np.array([[0, 2], [0, 3], [1, 2], [1, 3]])
CORNER_AT_HEAD = np.array([[False, False], [True, False], [False, True], [True, True]])


def corner_blocks(grid):
    """Per active cell: edge indices ``(n, 4, 2)`` and weighted inverse metrics ``(n, 2, 2)``.

    Each cell contributes ``(w/4) * sum_corners b_c^T G^{-1} b_c`` where ``b_c``
    collects the two edge differences meeting at the corner, divided by the
    edge lengths.
    """
    ci, cj = grid.active_cells()
    edges = grid.cell_edges(ci, cj)[:, CORNER_EDGES]
    ginv = np.linalg.inv(grid.metric[ci, cj])
    w = grid.cell_weights(ci, cj)
    return edges, ginv * (w / 4.0)[:, None, None]


def edge_inner_product(grid):
    """Sparse SPD-on-active-edges matrix S with ``<a, b> = a^T S b`` for edge cochains."""
    edges, wg = corner_blocks(grid)
    h = np.array([grid.h_u, grid.h_v])
    rows, cols, vals = [], [], []
    for a in range(2):
        for b in range(2):
            rows.append(edges[:, :, a].ravel())
            cols.append(edges[:, :, b].ravel())
            vals.append(np.repeat(wg[:, a, b] / (h[a] * h[b]), 4))
    S = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.n_edges, grid.n_edges),
    )
    return S.tocsr()


def incidence(grid):
    """Coboundary d: node functions -> edge cochains (head minus tail)."""
    tail, head = grid.edge_endpoints()
    ne = grid.n_edges
    data = np.concatenate([np.ones(ne), -np.ones(ne)])
    rows = np.concatenate([np.arange(ne), np.arange(ne)])
    return sp.csr_matrix((data, (rows, np.concatenate([head, tail]))), shape=(ne, grid.n_nodes))


# ---------------------------------------------------------------------------
# Link fields and fluxes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FluxVector:
    values: tuple
    labels: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in np.atleast_1d(self.values)))
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"c{k}" for k in range(len(self.values))))

    @property
    def array(self):
        return np.array(self.values)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True, eq=False)
class LinkField:
    """Edge line integrals of a potential on a fixed grid."""

    grid: object
    theta: np.ndarray
    label: str = ""

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.shape != (self.grid.n_edges,):
            raise ValueError(f"expected {self.grid.n_edges} link phases, got {theta.shape}")
        theta = np.where(self.grid.active_edges(), theta, 0.0)
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def zero(cls, grid):
        return cls(grid, np.zeros(grid.n_edges), "zero")

    def __add__(self, other):
        return LinkField(self.grid, self.theta + other.theta, f"{self.label}+{other.label}")

    def scaled(self, c):
        return LinkField(self.grid, c * self.theta, self.label)

    def gauge(self, phi):
        """Links of ``A + d(phi)`` for a node function ``phi``."""
        tail, head = self.grid.edge_endpoints()
        phi = np.asarray(phi, dtype=float).ravel()
        return LinkField(self.grid, self.theta + phi[head] - phi[tail], self.label + "+dphi")

    def holonomy(self, loop):
        edges, signs = self.grid.loop_edges(loop)
        return float(np.dot(signs, self.theta[edges]))

    def curl(self):
        """Circulation around every active cell (discrete B = dA times cell area)."""
        e = self.grid.cell_edges()
        t = self.theta
        return t[e[:, 0]] + t[e[:, 3]] - t[e[:, 1]] - t[e[:, 2]]

    def max_curl(self):
        c = self.curl()
        return float(np.abs(c).max(initial=0.0))

    def flux(self):
        gens = self.grid.generators
        return FluxVector(
            tuple(self.holonomy(g.loop) / TWO_PI for g in gens), tuple(g.label for g in gens)
        )

    def norm2(self, S=None):
        S = edge_inner_product(self.grid) if S is None else S
        return float(self.theta @ (S @ self.theta))


def line_integral(links, loop):
    """``oint A`` along a closed node cycle; the flux is this value over 2 pi."""
    if len(loop) < 2:
        raise OpenPath("a loop needs at least two nodes")
    return links.holonomy(loop)


def dist_flux_to_lattice(phi):
    """Euclidean distance of a flux vector to the integer lattice."""
    v = phi.array if isinstance(phi, FluxVector) else np.atleast_1d(np.asarray(phi, dtype=float))
    return float(np.linalg.norm(v - np.round(v)))


# ---------------------------------------------------------------------------
# Potentials from formulas
# ---------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def _edge_integrals(component, grid, tol=1e-12, max_rounds=30):
    """Adaptive Gauss-Legendre integral of ``component(u, v, direction)`` along every edge."""
    u0, v0, direction = grid.edge_geometry()
    h = np.where(direction == 0, grid.h_u, grid.h_v)
    du = np.where(direction == 0, h, 0.0)
    dv = np.where(direction == 1, h, 0.0)

    def rule(idx, a, b):
        s = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * _GL_X[None, :]
        uu = u0[idx, None] + s * du[idx, None]
        vv = v0[idx, None] + s * dv[idx, None]
        f = component(uu, vv, direction[idx, None] * np.ones_like(s, dtype=int))
        return 0.5 * (b - a) * h[idx] * (f @ _GL_W)

    out = np.zeros(u0.size)
    idx = np.arange(u0.size)
    a = np.zeros(u0.size)
    b = np.ones(u0.size)
    whole = rule(idx, a, b)
    for _ in range(max_rounds):
        mid = 0.5 * (a + b)
        left, right = rule(idx, a, mid), rule(idx, mid, b)
        err = np.abs(left + right - whole)
        ok = err <= tol * np.maximum(1.0, np.abs(whole)) * np.maximum(b - a, 1e-6)
        np.add.at(out, idx[ok], (left + right)[ok])
        keep = ~ok
        if not keep.any():
            return out
        idx = np.concatenate([idx[keep], idx[keep]])
        a, b = np.concatenate([a[keep], mid[keep]]), np.concatenate([mid[keep], b[keep]])
        whole = np.concatenate([left[keep], right[keep]])
    raise SolverFail("edge quadrature did not reach tolerance")


@dataclass(frozen=True, eq=False)
class OneForm:
    """A potential description that can be realized as link phases on any grid.

    kinds:
      ``harmonic-flux``  harmonic representative with prescribed fluxes
      ``closed-form``    components ``Hr dr + Ht dt`` (closedness is checked)
      ``general``        components without the closedness check
      ``exact``          ``d(phi)`` for a scalar expression ``phi``
    Expressions may use the grid coordinates ``r, t`` and planar ``x, y``.
    """

    kind: str
    flux: tuple = ()
    Hr: object = None
    Ht: object = None
    phi: object = None
    label: str = ""
    closed_tol: float = 1e-9

    def __post_init__(self):
        if self.kind not in ("harmonic-flux", "closed-form", "general", "exact"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        for name in ("Hr", "Ht", "phi"):
            val = getattr(self, name)
            if isinstance(val, (str, int, float)):
                object.__setattr__(self, name, Expression(val))

    @classmethod
    def from_config(cls, spec):
        kind = spec["kind"]
        if kind == "harmonic-flux":
            return cls(kind, flux=tuple(float(f) for f in np.atleast_1d(spec["flux"])))
        if kind in ("closed-form", "general"):
            return cls(kind, Hr=spec.get("Hr", "0"), Ht=spec.get("Ht", "0"))
        if kind == "exact":
            return cls(kind, phi=spec["phi"])
        raise ValueError(f"unknown potential kind {kind!r}")

    @property
    def closed(self):
        return self.kind != "general"

    def links(self, grid, basis=None):
        if self.kind == "harmonic-flux":
            basis = HarmonicBasis.build(grid) if basis is None else basis
            if len(self.flux) != len(basis.forms):
                raise ValueError(f"{len(self.flux)} fluxes for {len(basis.forms)} generators")
            theta = sum(f * a.theta for f, a in zip(self.flux, basis.forms))
            return LinkField(grid, np.asarray(theta) * np.ones(grid.n_edges), "harmonic")
        if self.kind == "exact":
            u, v = grid.node_coords()
            vals = self.phi(**grid.coords(u, v)).ravel()
            return LinkField.zero(grid).gauge(vals)

        def component(u, v, direction):
            env = grid.coords(u, v)
            fu = self.Hr(**env) if self.Hr is not None else 0.0
            fv = self.Ht(**env) if self.Ht is not None else 0.0
            return np.where(direction == 0, fu, fv)

        links = LinkField(grid, _edge_integrals(component, grid), self.kind)
        if self.kind == "closed-form":
            scale = max(1.0, float(np.abs(links.theta).max(initial=0.0)))
            if links.max_curl() > self.closed_tol * scale:
                raise NotClosed(f"potential has cell circulation {links.max_curl():.3e}")
        return links


def links_from_samples(grid, a_u, a_v):
    """Trapezoid link phases from node samples of the covariant components."""
    a_u = np.asarray(a_u, dtype=float).ravel()
    a_v = np.asarray(a_v, dtype=float).ravel()
    tail, head = grid.edge_endpoints()
    nu = grid.n_edges_u
    theta = np.empty(grid.n_edges)
    theta[:nu] = 0.5 * grid.h_u * (a_u[tail[:nu]] + a_u[head[:nu]])
    theta[nu:] = 0.5 * grid.h_v * (a_v[tail[nu:]] + a_v[head[nu:]])
    return LinkField(grid, theta, "sampled")


# ---------------------------------------------------------------------------
# Hodge normalization and harmonic bases
# ---------------------------------------------------------------------------


def _scalar_laplacian(grid, S=None):
    S = edge_inner_product(grid) if S is None else S
    d = incidence(grid)
    return d, S, (d.T @ S @ d).tocsr()


def coclosed_gauge(links, tol=1e-10):
    """Node function ``phi`` such that ``A + d(phi)`` is discretely co-closed and tangential."""
    grid = links.grid
    d, S, L = _scalar_laplacian(grid)
    active = np.nonzero(grid.active_nodes())[0]
    rhs = -(d.T @ (S @ links.theta))[active]
    rhs -= rhs.mean()
    Lr = L[active][:, active].tocsc()
    # pin one node: the Neumann problem is determined up to constants
    keep = np.arange(1, active.size)
    phi_r = np.zeros(active.size)
    if keep.size:
        try:
            phi_r[keep] = spla.spsolve(Lr[keep][:, keep], rhs[keep])
        except RuntimeError as exc:
            raise SolverFail(f"Poisson solve failed: {exc}") from None
    resid = np.linalg.norm(Lr @ phi_r - rhs)
    if not np.isfinite(resid) or resid > tol * max(1.0, np.linalg.norm(rhs)) * 1e3:
        raise SolverFail(f"Poisson residual {resid:.3e}")
    phi = np.zeros(grid.n_nodes)
    phi[active] = phi_r - phi_r.mean()
    return phi


def normalize_coclosed(links):
    """Return ``A + d(phi)`` with vanishing discrete divergence (natural boundary flux)."""
    return links.gauge(coclosed_gauge(links))


def divergence(links):
    """Discrete ``delta A`` per node: the weighted adjoint of d applied to the links."""
    d, S, _ = _scalar_laplacian(links.grid)
    return d.T @ (S @ links.theta)


def _angle_form(grid, center):
    u, v = grid.node_coords()
    x, y = grid.embedding(u, v) if grid.embedding is not None else (u, v)
    ang = np.arctan2(np.ravel(y) - center[1], np.ravel(x) - center[0])
    tail, head = grid.edge_endpoints()
    return np.angle(np.exp(1j * (ang[head] - ang[tail])))


def _flux_one_cochain(grid, gen):
    nu = grid.n_edges_u
    theta = np.zeros(grid.n_edges)
    if gen.kind == "periodic-u":
        theta[:nu] = TWO_PI / grid.n_u
    elif gen.kind == "periodic-v":
        theta[nu:] = TWO_PI / grid.n_v
    elif gen.kind == "hole":
        theta = _angle_form(grid, gen.center)
    else:
        raise ValueError(f"unknown generator kind {gen.kind!r}")
    return theta


@dataclass(frozen=True, eq=False)
class HarmonicBasis:
    """Discrete harmonic forms dual to the grid's homology generators."""

    grid: object
    forms: tuple
    gram: np.ndarray
    labels: tuple = ()

    @classmethod
    def build(cls, grid, normalize=True):
        forms = []
        for gen in grid.generators:
            links = LinkField(grid, _flux_one_cochain(grid, gen), gen.label)
            if normalize:
                links = normalize_coclosed(links)
            forms.append(links)
        S = edge_inner_product(grid)
        gram = np.array([[a.theta @ (S @ b.theta) for b in forms] for a in forms]).reshape(len(forms), len(forms))
        return cls(grid, tuple(forms), gram, tuple(g.label for g in grid.generators))

    @property
    def m(self):
        return len(self.forms)

    def combination(self, coeffs):
        theta = np.zeros(self.grid.n_edges)
        for c, a in zip(coeffs, self.forms):
            theta = theta + c * a.theta
        return LinkField(self.grid, theta, "combination")

    def duality_matrix(self):
        """``(1/2pi) oint_{c_i} A_j``; the identity for a valid basis."""
        return np.array([[a.holonomy(g.loop) / TWO_PI for a in self.forms] for g in self.grid.generators])


def lattice_search_radius(norm_h, gram, requested=3):
    """Box radius that certainly contains the closest lattice point to a form of norm ``norm_h``."""
    lam_min = float(np.linalg.eigvalsh(gram).min())
    if lam_min <= 0:
        raise SolverFail("Gram matrix is not positive definite")
    return max(int(requested), int(np.ceil(2.0 * norm_h / np.sqrt(lam_min))))


def _lattice_min(flux, gram, search_radius):
    flux = np.asarray(flux, dtype=float)
    norm_h = float(np.sqrt(max(flux @ gram @ flux, 0.0)))
    radius = lattice_search_radius(norm_h, gram, search_radius)
    best, best_k = np.inf, None
    m = flux.size
    ks = np.array(list(itertools.product(range(-radius, radius + 1), repeat=m)), dtype=float)
    diff = flux[None, :] - ks
    vals = np.einsum("ki,ij,kj->k", diff, gram, diff)
    i = int(np.argmin(vals))
    best, best_k = max(float(vals[i]), 0.0), ks[i].astype(int)
    return best, best_k, radius


def dist_form_to_lattice(h, basis, search_radius=3):
    """L2 distance from (the harmonic part of) a closed form to the integral lattice.

    ``h`` may be a LinkField (its fluxes determine the harmonic part) or a
    flux vector. The search box is widened automatically to a radius that
    certifies the minimizer.
    """
    flux = h.flux().array if isinstance(h, LinkField) else np.atleast_1d(np.asarray(
        h.array if isinstance(h, FluxVector) else h, dtype=float))
    d2, _, _ = _lattice_min(flux, basis.gram, search_radius)
    return float(np.sqrt(d2))


def compare_distances(h, basis):
    """``(d(h, L_Z)^2, (sum_j |A_j|^2) * d(Phi^h, Z^m)^2)``; the first never exceeds the second."""
    flux = h.flux() if isinstance(h, LinkField) else FluxVector(h)
    lhs = dist_form_to_lattice(flux, basis) ** 2
    rhs = float(np.trace(basis.gram)) * dist_flux_to_lattice(flux) ** 2
    return lhs, rhs


# ---------------------------------------------------------------------------
# Gauge reductions
# ---------------------------------------------------------------------------


def gauge_reduce_cylinder(links, tol=1e-9):
    """Gauge a closed potential on an ``(r, t)`` cylinder grid to the form ``H(t) dt``.

    Returns ``(phi, H)`` where ``phi`` is the node gauge function (zero on the
    ``r = 0`` line) and ``H`` holds the t-link phases of ``A + d(phi)`` along
    ``r = 0`` divided by the t-spacing.
    """
    grid = links.grid
    if grid.periodic != (False, True):
        raise ValueError("expected a grid bounded in r and periodic in t")
    scale = max(1.0, float(np.abs(links.theta).max(initial=0.0)))
    if links.max_curl() > tol * scale:
        raise NotClosed(f"potential has cell circulation {links.max_curl():.3e}")
    theta_r = links.theta[: grid.n_edges_u].reshape(grid.nc_u, grid.n_v)
    phi = np.zeros((grid.n_u, grid.n_v))
    phi[1:] = -np.cumsum(theta_r, axis=0)
    theta_t = links.theta[grid.n_edges_u:].reshape(grid.n_u, grid.nc_v)
    H = theta_t[0] / grid.h_v
    return phi.ravel(), H


def trivialize_gauge(links, nodes):
    """Node phases ``chi`` with ``A + d(-chi) = 0`` on the edges among ``nodes``.

    Valid when the potential is closed and the node set spans a simply
    connected subcomplex; the phases are propagated by breadth-first search.
    """
    grid = links.grid
    nodes = np.asarray(nodes)
    mask = np.zeros(grid.n_nodes, bool)
    mask[nodes] = True
    tail, head = grid.edge_endpoints()
    sel = grid.active_edges() & mask[tail] & mask[head]
    t, hd, th = tail[sel], head[sel], links.theta[sel]
    adj = sp.coo_matrix((np.ones(t.size), (t, hd)), shape=(grid.n_nodes, grid.n_nodes)).tocsr()
    adj = adj + adj.T
    chi = np.full(grid.n_nodes, np.nan)
    from scipy.sparse.csgraph import breadth_first_order

    lookup = {}
    for a, b, v in zip(t, hd, th):
        lookup[(a, b)] = v
        lookup[(b, a)] = -v
    for start in nodes:
        if not np.isnan(chi[start]):
            continue
        order, pred = breadth_first_order(adj, start, directed=False, return_predecessors=True)
        chi[start] = 0.0
        for n in order[1:]:
            p = pred[n]
            chi[n] = chi[p] + lookup[(p, n)]
    return np.nan_to_num(chi)
