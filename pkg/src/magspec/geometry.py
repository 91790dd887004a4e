"""Model domains and the geometric quantities that enter the eigenvalue bounds."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    CriticalPoint,
    Degenerate,
    Disconnected,
    NonConvex,
    RayMiss,
    ResolutionTooCoarse,
)
from .grid import Generator, Grid2D, flat_grid

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# Simple model domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CircleDomain:
    """Circle of length ``length`` with metric ``theta(t)^2 dt^2`` sampled at n nodes.

    The samples are rescaled on construction so that the parametrization has
    total length ``length``.
    """

    length: float
    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 1 or theta.size < 3:
            raise ValueError("theta must be a 1-D sample array")
        if np.any(theta <= 0):
            raise Degenerate("metric density must be positive")
        object.__setattr__(self, "theta", theta * theta.size / theta.sum())

    @classmethod
    def from_function(cls, length, theta_fn, n):
        t = length * np.arange(n) / n
        return cls(length, np.asarray(theta_fn(t), dtype=float) * np.ones(n))

    @property
    def n(self):
        return self.theta.size

    @property
    def nodes(self):
        return self.length * np.arange(self.n) / self.n


@dataclass(frozen=True)
class RectTorus:
    periods: tuple

    def __post_init__(self):
        if len(self.periods) == 0 or any(p <= 0 for p in self.periods):
            raise ValueError("torus periods must be positive")

    @property
    def area(self):
        return float(np.prod(self.periods))

    def grid(self, n_u, n_v=None):
        if len(self.periods) != 2:
            raise ValueError("numerical tori are two-dimensional")
        n_v = n_u if n_v is None else n_v
        return flat_grid(n_u, n_v, self.periods[0], self.periods[1], periodic=(True, True), name="torus")


@dataclass(frozen=True, eq=False)
class WarpedCylinder:
    """``[0, a] x S^1`` with metric ``dr^2 + theta(r, t)^2 dt^2``, t in ``[0, L0)``."""

    height: float
    base_length: float
    warp: Callable = lambda r, t: np.ones(np.broadcast(r, t).shape)
    label: str = "cylinder"

    def sample(self, n_r, n_t):
        r = np.linspace(0.0, self.height, n_r)
        t = self.base_length * np.arange(n_t) / n_t
        rr, tt = np.meshgrid(r, t, indexing="ij")
        return np.asarray(self.warp(rr, tt), dtype=float) * np.ones(rr.shape)

    def metric_at(self, r, t):
        th = np.asarray(self.warp(r, t), dtype=float) * np.ones(np.broadcast(r, t).shape)
        g = np.zeros(th.shape + (2, 2))
        g[..., 0, 0] = 1.0
        g[..., 1, 1] = th ** 2
        return g

    def grid(self, n_r, n_t):
        """Grid with ``n_r`` nodes across (bounded) and ``n_t`` nodes around (periodic)."""
        if n_r < 2 or n_t < 3:
            raise ValueError("cylinder grid too small")
        h_r = self.height / (n_r - 1)
        h_t = self.base_length / n_t
        rc = h_r * (np.arange(n_r - 1) + 0.5)
        tc = h_t * (np.arange(n_t) + 0.5)
        centres = np.meshgrid(rc, tc, indexing="ij")
        if np.any(self.sample(n_r, n_t) <= 0) or np.any(np.asarray(self.warp(*centres)) <= 0):
            raise Degenerate("warp must be positive")
        metric = self.metric_at(*centres)
        grid = Grid2D(n_r, n_t, h_r, h_t, (False, True), metric, metric_at=self.metric_at, name=self.label)
        object.__setattr__(grid, "generators", (Generator("periodic-v", grid.loop_v(0), label="t"),))
        return grid


# ---------------------------------------------------------------------------
# Convex curves and annuli
# ---------------------------------------------------------------------------


def _periodic_spline(s, values, period):
    s_ext = np.append(s, period)
    v_ext = np.concatenate([values, values[:1]], axis=0)
    return CubicSpline(s_ext, v_ext, bc_type="periodic", axis=0)


@dataclass(frozen=True, eq=False)
class ConvexCurve:
    """Closed convex planar curve resampled at n uniform arc-length nodes (CCW)."""

    points: np.ndarray
    length: float
    curvature: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    name: str = "curve"
    _spline: Optional[CubicSpline] = field(default=None, repr=False)
    _kspline: Optional[CubicSpline] = field(default=None, repr=False)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def ds(self):
        return self.length / self.n

    @property
    def s(self):
        return self.ds * np.arange(self.n)

    def at(self, s):
        return self._spline(np.mod(s, self.length))

    def tangent_at(self, s):
        d = self._spline(np.mod(s, self.length), 1)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def normal_at(self, s):
        t = self.tangent_at(s)
        return np.stack([t[..., 1], -t[..., 0]], axis=-1)

    def curvature_at(self, s):
        return self._kspline(np.mod(s, self.length))

    def contains(self, p):
        """Winding test for points strictly inside the polygon of nodes."""
        p = np.atleast_2d(p)
        rel = self.points[None, :, :] - p[:, None, :]
        ang = np.arctan2(rel[..., 1], rel[..., 0])
        dang = np.diff(np.concatenate([ang, ang[:, :1]], axis=1), axis=1)
        dang = (dang + np.pi) % TWO_PI - np.pi
        return np.abs(dang.sum(axis=1)) > np.pi

    @classmethod
    def from_parametric(cls, fn, period=TWO_PI, n=1024, name="curve", oversample=64, tol=1e-6):
        """Resample a closed parametric curve ``fn(phi) -> (..., 2)`` to uniform arc length."""
        if n < 8 or n & (n - 1):
            raise ValueError("curve resolution must be a power of two >= 8")
        m = n * oversample
        phi = period * np.arange(m + 1) / m
        pts = np.asarray(fn(phi), dtype=float)
        area = 0.5 * np.sum(pts[:-1, 0] * pts[1:, 1] - pts[1:, 0] * pts[:-1, 1])
        if area < 0:
            pts = pts[::-1]
            phi = phi[::-1]
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        s_dense = np.concatenate([[0.0], np.cumsum(seg)])
        length = float(s_dense[-1])
        s_nodes = length * np.arange(n) / n
        phi_nodes = np.interp(s_nodes, s_dense, phi)
        points = np.asarray(fn(phi_nodes), dtype=float)
        # derivatives in the curve parameter; the orientation fix reverses the parameter
        step = abs(period) * 2e-5
        sign = 1.0 if area >= 0 else -1.0
        fwd = np.asarray(fn(phi_nodes + sign * step), dtype=float)
        bwd = np.asarray(fn(phi_nodes - sign * step), dtype=float)
        d1 = (fwd - bwd) / (2 * step)
        d2 = (fwd - 2 * points + bwd) / step ** 2
        speed = np.linalg.norm(d1, axis=1)
        curvature = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed ** 3
        return cls._finish(points, length, name, tol, d1 / speed[:, None], curvature)

    @classmethod
    def from_points(cls, points, n=1024, name="polyline", tol=1e-6):
        """Smooth closed curve through explicit points (periodic cubic spline)."""
        pts = np.asarray(points, dtype=float)
        if np.allclose(pts[0], pts[-1]):
            pts = pts[:-1]
        chord = np.linalg.norm(np.diff(np.vstack([pts, pts[:1]]), axis=0), axis=1)
        knots = np.concatenate([[0.0], np.cumsum(chord)])
        spline = CubicSpline(knots, np.vstack([pts, pts[:1]]), bc_type="periodic", axis=0)
        return cls.from_parametric(lambda p: spline(p), period=knots[-1], n=n, name=name, tol=tol)

    @classmethod
    def _finish(cls, points, length, name, tol, tangent, curvature):
        n = points.shape[0]
        ds = length / n
        spline = _periodic_spline(ds * np.arange(n), points, length)
        if np.any(curvature < -tol * max(1.0, np.abs(curvature).max())):
            raise NonConvex(f"{name}: negative curvature {curvature.min():.3e}")
        normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
        kspline = _periodic_spline(ds * np.arange(n), curvature, length)
        return cls(points, length, curvature, normal, tangent, name, spline, kspline)


def circle(radius, center=(0.0, 0.0), n=1024):
    cx, cy = center
    return ConvexCurve.from_parametric(
        lambda p: np.stack([cx + radius * np.cos(p), cy + radius * np.sin(p)], axis=-1),
        n=n, name=f"circle(r={radius})",
    )


def ellipse(a, b, center=(0.0, 0.0), n=1024):
    cx, cy = center
    return ConvexCurve.from_parametric(
        lambda p: np.stack([cx + a * np.cos(p), cy + b * np.sin(p)], axis=-1),
        n=n, name=f"ellipse({a},{b})",
    )


def rounded_rectangle(width, height, radius, center=(0.0, 0.0), n=1024):
    """Rectangle with circular corners, parametrized by arc length."""
    if not 0 < radius <= min(width, height) / 2:
        raise ValueError("corner radius must lie in (0, min(width, height)/2]")
    wx, wy = width / 2 - radius, height / 2 - radius
    pieces = [
        ("line", (wx + radius, -wy), (0.0, 1.0), 2 * wy),
        ("arc", (wx, wy), 0.0, np.pi / 2 * radius),
        ("line", (wx, wy + radius), (-1.0, 0.0), 2 * wx),
        ("arc", (-wx, wy), np.pi / 2, np.pi / 2 * radius),
        ("line", (-wx - radius, wy), (0.0, -1.0), 2 * wy),
        ("arc", (-wx, -wy), np.pi, np.pi / 2 * radius),
        ("line", (-wx, -wy - radius), (1.0, 0.0), 2 * wx),
        ("arc", (wx, -wy), 1.5 * np.pi, np.pi / 2 * radius),
    ]
    bounds = np.concatenate([[0.0], np.cumsum([p[3] for p in pieces])])
    perimeter = bounds[-1]

    def fn(s):
        s = np.mod(np.asarray(s, dtype=float), perimeter)
        out = np.zeros(s.shape + (2,))
        for (kind, a, b, size), lo, hi in zip(pieces, bounds[:-1], bounds[1:]):
            sel = (s >= lo) & (s < hi)
            d = s[sel] - lo
            if kind == "line":
                out[sel] = np.array(a) + d[:, None] * np.array(b)
            else:
                ang = b + d / radius
                out[sel] = np.array(a) + radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        return out + np.array(center)

    return ConvexCurve.from_parametric(fn, period=perimeter, n=n, name="rounded-rectangle")


def curve_from_spec(spec, n=1024):
    """Build a curve from a config dict (named shape or explicit point list)."""
    kind = spec.get("shape", spec.get("kind"))
    center = tuple(spec.get("center", (0.0, 0.0)))
    if kind in ("circle", "offset-circle"):
        return circle(float(spec["radius"]), center, n)
    if kind == "ellipse":
        return ellipse(float(spec["a"]), float(spec["b"]), center, n)
    if kind == "rounded-rectangle":
        return rounded_rectangle(float(spec["width"]), float(spec["height"]), float(spec["radius"]), center, n)
    if kind == "points":
        return ConvexCurve.from_points(spec["points"], n)
    raise ValueError(f"unknown curve shape {kind!r}")


@dataclass(frozen=True, eq=False)
class AnnulusDomain:
    inner: ConvexCurve
    outer: ConvexCurve
    rho: np.ndarray
    beta: float
    B_dist: float
    L_outer: float
    _rho_spline: Optional[CubicSpline] = field(default=None, repr=False)

    @classmethod
    def build(cls, inner, outer):
        rho, beta, big_b = ray_lengths_between(inner, outer)
        spline = _periodic_spline(inner.s, rho, inner.length)
        return cls(inner, outer, rho, beta, big_b, outer.length, spline)

    def rho_at(self, s, derivative=0):
        return self._rho_spline(np.mod(s, self.inner.length), derivative)

    @property
    def area(self):
        def shoelace(p):
            return 0.5 * np.sum(p[:, 0] * np.roll(p[:, 1], -1) - np.roll(p[:, 0], -1) * p[:, 1])

        return shoelace(self.outer.points) - shoelace(self.inner.points)


def _ray_hits(p, d, outer):
    """Segment-wise ray/polyline intersections: returns (segment index, count) per ray."""
    q0 = outer.points
    q1 = np.roll(outer.points, -1, axis=0)
    e = q1 - q0
    hit_seg = np.full(p.shape[0], -1)
    counts = np.zeros(p.shape[0], int)
    for start in range(0, p.shape[0], 256):
        pp = p[start:start + 256, None, :]
        dd = d[start:start + 256, None, :]
        w = q0[None] - pp
        den = dd[..., 0] * (-e[None, :, 1]) - dd[..., 1] * (-e[None, :, 0])
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (w[..., 0] * (-e[None, :, 1]) - w[..., 1] * (-e[None, :, 0])) / den
            sig = (dd[..., 0] * w[..., 1] - dd[..., 1] * w[..., 0]) / den
        ok = (np.abs(den) > 0) & (t > 0) & (sig >= -1e-12) & (sig <= 1 + 1e-12)
        t_hit = np.where(ok, t, np.nan)
        # a ray through a polygon vertex touches two segments at the same distance
        spread = np.nanmax(t_hit, axis=1, initial=-np.inf) - np.nanmin(t_hit, axis=1, initial=np.inf)
        n_ok = ok.sum(axis=1)
        counts[start:start + 256] = np.where((n_ok > 1) & (spread < 1e-9), 1, n_ok)
        hit_seg[start:start + 256] = np.where(ok.any(axis=1), ok.argmax(axis=1), -1)
    return hit_seg, counts


def ray_lengths_between(inner, outer, refine_steps=60):
    """Distance along the outward normal ray from each inner node to the outer curve."""
    if np.any(inner.curvature < -1e-9) or np.any(outer.curvature < -1e-9):
        raise NonConvex("annulus curves must be convex")
    p = inner.points
    d = inner.normal
    if not np.all(outer.contains(p)):
        raise RayMiss("inner curve is not strictly inside the outer curve")
    seg, counts = _ray_hits(p, d, outer)
    if np.any(counts == 0):
        raise RayMiss(f"{int((counts == 0).sum())} normal rays miss the outer curve")
    if np.any(counts > 1):
        raise RayMiss("a normal ray meets the outer curve more than once")
    # binary refinement on the outer spline parameter inside the hit segment
    lo = seg * outer.ds
    hi = lo + outer.ds

    def side(sig):
        q = outer.at(sig) - p
        return d[:, 0] * q[:, 1] - d[:, 1] * q[:, 0]

    f_lo, f_hi = side(lo), side(hi)
    # a hit on a segment end has no sign change; take that end directly
    endpoint = np.where(np.abs(f_lo) <= np.abs(f_hi), lo, hi)
    bracketed = np.sign(f_lo) != np.sign(f_hi)
    for _ in range(refine_steps):
        mid = 0.5 * (lo + hi)
        f_mid = side(mid)
        left = np.sign(f_mid) == np.sign(f_lo)
        lo = np.where(left, mid, lo)
        f_lo = np.where(left, f_mid, f_lo)
        hi = np.where(left, hi, mid)
    q = outer.at(np.where(bracketed, 0.5 * (lo + hi), endpoint))
    rho = np.einsum("ij,ij->i", q - p, d)
    return rho, float(rho.min()), float(rho.max())


def ray_lengths(annulus):
    """``(rho(s), beta, B_dist)`` for an annulus (recomputed from its curves)."""
    return ray_lengths_between(annulus.inner, annulus.outer)


def normal_coordinates(annulus, n_t, n_s):
    """Logically rectangular grid over ``(tau, s) in [0, 1] x [0, L_inner)``.

    The planar point is ``gamma(s) + tau * rho(s) * N(s)``; the per-cell metric is
    the pull-back of the Euclidean metric under that map.
    """
    if n_t < 8 or n_s < 8:
        raise ValueError("normal coordinate grids need at least 8 nodes per direction")
    inner = annulus.inner

    def metric_at(tau, s):
        tau = np.asarray(tau, dtype=float)
        rho = annulus.rho_at(s)
        drho = annulus.rho_at(s, 1)
        k = inner.curvature_at(s)
        theta = 1.0 + tau * rho * k
        if np.any(theta <= 0):
            raise Degenerate("1 + t k(s) must stay positive")
        g = np.empty(np.broadcast(tau, s).shape + (2, 2))
        g[..., 0, 0] = rho ** 2
        g[..., 0, 1] = g[..., 1, 0] = tau * rho * drho
        g[..., 1, 1] = (tau * drho) ** 2 + theta ** 2
        return g

    def embedding(tau, s):
        base = inner.at(s)
        nrm = inner.normal_at(s)
        r = (np.asarray(tau) * annulus.rho_at(s))[..., None]
        pt = base + r * nrm
        return pt[..., 0], pt[..., 1]

    h_t = 1.0 / (n_t - 1)
    h_s = inner.length / n_s
    tc = h_t * (np.arange(n_t - 1) + 0.5)
    sc = h_s * (np.arange(n_s) + 0.5)
    metric = metric_at(*np.meshgrid(tc, sc, indexing="ij"))
    grid = Grid2D(n_t, n_s, h_t, h_s, (False, True), metric, metric_at=metric_at,
                  embedding=embedding, name="annulus")
    object.__setattr__(grid, "generators", (Generator("periodic-v", grid.loop_v(0), label="inner"),))
    return grid


# ---------------------------------------------------------------------------
# Foliations
# ---------------------------------------------------------------------------


def _cell_gradients(grid, psi):
    psi = np.asarray(psi, dtype=float).reshape(grid.n_nodes)
    corners = grid.cell_corners()
    p = psi[corners]
    du = 0.5 * ((p[:, 1] - p[:, 0]) + (p[:, 3] - p[:, 2])) / grid.h_u
    dv = 0.5 * ((p[:, 2] - p[:, 0]) + (p[:, 3] - p[:, 1])) / grid.h_v
    return du, dv


def gradient_norms(grid, psi):
    """Riemannian ``|grad psi|`` at each active cell centre."""
    ci, cj = grid.active_cells()
    g = grid.metric[ci, cj]
    ginv = np.linalg.inv(g)
    du, dv = _cell_gradients(grid, psi)
    sq = ginv[:, 0, 0] * du ** 2 + 2 * ginv[:, 0, 1] * du * dv + ginv[:, 1, 1] * dv ** 2
    return np.sqrt(sq)


def level_lengths(grid, psi, levels):
    """Riemannian length of each level set of node-sampled ``psi`` (marching squares)."""
    psi = np.asarray(psi, dtype=float).reshape(grid.n_nodes)
    ci, cj = grid.active_cells()
    corners = grid.cell_corners(ci, cj)
    vals = psi[corners]  # n00, n10, n01, n11
    local = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], float)
    # bottom, right, top, left
    edge_pairs = [(0, 1), (1, 3), (2, 3), (0, 2)]
    vmin, vmax = psi[grid.active_nodes()].min(), psi[grid.active_nodes()].max()
    scale = np.array([grid.h_u, grid.h_v])
    origin_u = grid.origin[0] + grid.h_u * ci
    origin_v = grid.origin[1] + grid.h_v * cj
    g_cell = grid.metric[ci, cj]
    out = []
    for c in np.atleast_1d(levels):
        above = vals > c if c <= vmin else vals >= c
        pts = np.full((len(ci), 4, 2), np.nan)
        cross = np.zeros((len(ci), 4), bool)
        for k, (a, b) in enumerate(edge_pairs):
            x = above[:, a] != above[:, b]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (c - vals[:, a]) / (vals[:, b] - vals[:, a])
            t = np.clip(np.where(x, t, 0.0), 0.0, 1.0)
            pts[:, k] = local[a] + t[:, None] * (local[b] - local[a])
            cross[:, k] = x
        n_cross = cross.sum(axis=1)
        seg_a = np.zeros((len(ci), 2, 2))
        seg_b = np.zeros((len(ci), 2, 2))
        valid = np.zeros((len(ci), 2), bool)
        two = n_cross == 2
        if np.any(two):
            idx = np.argsort(~cross[two], axis=1, kind="stable")[:, :2]
            rows = np.nonzero(two)[0]
            seg_a[two, 0] = pts[rows, idx[:, 0]]
            seg_b[two, 0] = pts[rows, idx[:, 1]]
            valid[two, 0] = True
        four = n_cross == 4
        if np.any(four):
            rows = np.nonzero(four)[0]
            centre_above = vals[rows].mean(axis=1) >= c
            joined = centre_above == above[rows, 0]
            # joined: cut corners 10 and 01 -> (bottom, right), (top, left)
            first = np.where(joined[:, None], [[0, 1]], [[0, 3]])
            second = np.where(joined[:, None], [[2, 3]], [[1, 2]])
            seg_a[rows, 0] = pts[rows, first[:, 0]]
            seg_b[rows, 0] = pts[rows, first[:, 1]]
            seg_a[rows, 1] = pts[rows, second[:, 0]]
            seg_b[rows, 1] = pts[rows, second[:, 1]]
            valid[rows] = True
        total = 0.0
        for k in range(2):
            sel = valid[:, k]
            if not np.any(sel):
                continue
            delta = (seg_b[sel, k] - seg_a[sel, k]) * scale
            if grid.metric_at is not None:
                mid = 0.5 * (seg_a[sel, k] + seg_b[sel, k]) * scale
                g = grid.metric_at(origin_u[sel] + mid[:, 0], origin_v[sel] + mid[:, 1])
            else:
                g = g_cell[sel]
            total += np.sum(np.sqrt(np.einsum("ni,nij,nj->n", delta, g, delta)))
        out.append(total)
    return np.array(out)


def foliation_constant(grid, psi, levels=None, tol=1e-10):
    """``(K, L_max)``: gradient ratio of ``psi`` and the longest sampled level curve."""
    norms = gradient_norms(grid, psi)
    scale = max(norms.max(initial=0.0), 1e-300)
    if norms.min(initial=np.inf) < tol * scale:
        raise CriticalPoint("psi has a (near) critical point")
    K = float(norms.max() / norms.min())
    psi_active = np.asarray(psi, dtype=float).reshape(grid.n_nodes)[grid.active_nodes()]
    if levels is None:
        levels = np.linspace(psi_active.min(), psi_active.max(), 17)
    lengths = level_lengths(grid, psi, levels)
    return K, float(lengths.max())


# ---------------------------------------------------------------------------
# Masked planar regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PlanarMask:
    """Union of Cartesian cells of size h inside a bounding box, possibly with holes."""

    box: tuple
    h: float
    cell_mask: np.ndarray
    hole_loops: tuple = ()
    hole_centers: tuple = ()
    name: str = "mask"

    def __post_init__(self):
        grid = self.grid()
        b1, b0 = grid.betti1()
        if b0 != 1:
            raise Disconnected(f"{self.name}: region has {b0} components")
        if b1 != len(self.hole_loops):
            raise ValueError(f"{self.name}: {b1} holes but {len(self.hole_loops)} hole loops")

    @property
    def shape(self):
        return self.cell_mask.shape

    def grid(self):
        x0, y0, x1, y1 = self.box
        nx, ny = self.cell_mask.shape
        grid = flat_grid(nx, ny, x1 - x0, y1 - y0, origin=(x0, y0), cell_mask=self.cell_mask, name=self.name)
        gens = tuple(
            Generator("hole", tuple(loop), center=tuple(c), label=f"hole{k}")
            for k, (loop, c) in enumerate(zip(self.hole_loops, self.hole_centers))
        )
        object.__setattr__(grid, "generators", gens)
        return grid

    def node_xy(self):
        return self.grid().node_coords()


def _rect_loop(grid, i0, i1, j0, j1):
    """Counterclockwise node cycle around the cell block [i0, i1) x [j0, j1)."""
    path = [(i, j0) for i in range(i0, i1)]
    path += [(i1, j) for j in range(j0, j1)]
    path += [(i, j1) for i in range(i1, i0, -1)]
    path += [(i0, j) for j in range(j1, j0, -1)]
    return tuple(int(grid.node(i, j)) for i, j in path)


def _steps(length, h, what):
    k = length / h
    if abs(k - round(k)) > 1e-6 * max(1.0, k):
        raise ValueError(f"h={h} does not divide {what}={length}")
    return int(round(k))


def build_rectangle(width, height, h, origin=(0.0, 0.0)):
    """Simply connected Cartesian rectangle (no homology)."""
    nx, ny = _steps(width, h, "width"), _steps(height, h, "height")
    box = (origin[0], origin[1], origin[0] + width, origin[1] + height)
    return PlanarMask(box, h, np.ones((nx, ny), bool), name="rectangle")


def build_example1(eps, h):
    """``closure([-4,4]x[0,4] minus [-3,3]x[eps,2])`` as a cell mask with one hole.

    The channel under the hole must contain at least three cell rows.
    """
    if not 0 < eps < 2:
        raise ValueError("eps must lie in (0, 2)")
    if h <= 0:
        raise ValueError("h must be positive")
    rows = eps / h
    if round(rows) < 3 or rows < 3 - 1e-6:
        raise ResolutionTooCoarse(f"eps={eps} channel has {rows:.2f} < 3 cell rows at h={h}")
    nx, ny = _steps(8.0, h, "8"), _steps(4.0, h, "4")
    i0, i1 = _steps(1.0, h, "1"), _steps(7.0, h, "7")
    j0, j1 = _steps(eps, h, "eps"), _steps(2.0, h, "2")
    mask = np.ones((nx, ny), bool)
    mask[i0:i1, j0:j1] = False
    box = (-4.0, 0.0, 4.0, 4.0)
    tmp = flat_grid(nx, ny, 8.0, 4.0, origin=(-4.0, 0.0))
    loop = _rect_loop(tmp, i0, i1, j0, j1)
    return PlanarMask(box, h, mask, (loop,), ((0.0, 0.5 * (eps + 2.0)),), name=f"example1(eps={eps})")


def example1_channel_rows(mask):
    """Number of cell rows in the channel below the hole."""
    i_mid = mask.cell_mask.shape[0] // 2
    column = mask.cell_mask[i_mid]
    return int(np.argmin(column)) if not column.all() else column.size
