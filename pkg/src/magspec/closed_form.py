"""Exact spectra for circles (any metric, any potential) and flat rectangular tori."""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, simpson
from scipy.interpolate import CubicSpline

from .errors import BoxTooSmall

TWO_PI = 2.0 * np.pi


def _as_fn(f):
    if callable(f):
        return f
    return lambda t: float(f) * np.ones_like(np.asarray(t, dtype=float))


def _dist_to_int(x):
    x = np.asarray(x, dtype=float)
    return np.abs(x - np.round(x))


@dataclass(frozen=True, eq=False)
class CircleSpectrum:
    ks: np.ndarray
    eigenvalues: np.ndarray
    flux: float
    length: float
    _phi: CubicSpline = None
    _s: CubicSpline = None

    def eigenfunction(self, index):
        """Sampler ``u(t) = exp(i phi(t)) exp(2 pi i (k - flux) s(t) / L)`` for the index-th pair."""
        k = self.ks[index]
        L, flux = self.length, self.flux

        def u(t):
            t = np.asarray(t, dtype=float)
            wraps = np.floor(t / L)
            tt = t - wraps * L
            phase = self._phi(tt) + wraps * TWO_PI * flux + TWO_PI * (k - flux) * (self._s(tt) + wraps * L) / L
            return np.exp(1j * phase)

        return u


def circle_lambda(length, flux, k):
    return (TWO_PI / length) ** 2 * (np.asarray(k) - flux) ** 2


def circle_spectrum(length, theta, H, k_range=(-4, 4), n=4096):
    """Spectrum of the magnetic Laplacian on a circle with metric ``theta^2 dt^2`` and potential ``H dt``.

    ``theta`` and ``H`` are callables (or constants) on ``[0, length)``.
    ``theta`` is rescaled so that the circle has length ``length``.
    """
    if n % 2:
        n += 1
    t = np.linspace(0.0, length, n + 1)
    th = np.asarray(_as_fn(theta)(t), dtype=float) * np.ones(n + 1)
    if np.any(th <= 0):
        raise ValueError("metric density must be positive")
    th = th * length / simpson(th, x=t)
    hv = np.asarray(_as_fn(H)(t), dtype=float) * np.ones(n + 1)
    phi = cumulative_simpson(hv, x=t, initial=0.0)
    s = cumulative_simpson(th, x=t, initial=0.0)
    flux = float(phi[-1] / TWO_PI)
    ks = np.arange(k_range[0], k_range[1] + 1)
    lam = circle_lambda(length, flux, ks)
    order = np.lexsort((ks, lam))
    return CircleSpectrum(ks[order], lam[order], flux, float(length), CubicSpline(t, phi), CubicSpline(t, s))


def circle_operator_residual(u, theta, H, t, h=1e-3):
    """``Delta_A u`` evaluated by central differences for ``A = H dt``, metric ``theta^2 dt^2``.

    Uses ``Delta_A u = -(1/theta) (d/dt - iH) [(1/theta)(d/dt - iH) u]``.
    """
    theta, H = _as_fn(theta), _as_fn(H)

    def inner(tt):
        du = (u(tt + h / 2) - u(tt - h / 2)) / h
        return (du - 1j * H(tt) * u(tt)) / theta(tt)

    dinner = (inner(t + h / 2) - inner(t - h / 2)) / h
    return -(dinner - 1j * H(t) * inner(t)) / theta(t)


@dataclass(frozen=True, eq=False)
class TorusSpectrum:
    ks: np.ndarray
    eigenvalues: np.ndarray
    fluxes: tuple
    periods: tuple
    radius: int


def torus_lambda(periods, fluxes, k):
    p = np.asarray(periods, dtype=float)
    return np.sum((TWO_PI / p) ** 2 * (np.asarray(k, dtype=float) - np.asarray(fluxes)) ** 2, axis=-1)


def torus_spectrum(periods, fluxes, count=10, k_box=None):
    """Lowest ``count`` eigenvalues on the flat torus ``prod R/p_j Z`` with flux vector ``fluxes``.

    The integer box around the nearest lattice point has half-width ``k_box``;
    it is certified when every point outside it lies above the ``count``-th
    eigenvalue. Without ``k_box`` the box grows until certified.
    """
    p = np.asarray(periods, dtype=float)
    f = np.asarray(fluxes, dtype=float)
    if p.shape != f.shape or np.any(p <= 0):
        raise ValueError("need one positive period per flux")
    centre = np.round(f).astype(int)
    radius = 1 if k_box is None else int(k_box)
    while True:
        offsets = np.array(list(itertools.product(range(-radius, radius + 1), repeat=p.size)))
        ks = centre[None, :] + offsets
        lam = torus_lambda(p, f, ks)
        order = np.lexsort(tuple(ks[:, j] for j in reversed(range(p.size))) + (lam,))
        ks, lam = ks[order], lam[order]
        outside = float(np.min((TWO_PI / p) ** 2) * (radius + 0.5) ** 2)
        if count <= lam.size and lam[count - 1] <= outside:
            return TorusSpectrum(ks[:count], lam[:count], tuple(f), tuple(p), radius)
        if k_box is not None:
            raise BoxTooSmall(f"box radius {k_box} does not certify {count} eigenvalues")
        radius += 1


def torus_lambda1(periods, fluxes):
    p = np.asarray(periods, dtype=float)
    return float(np.sum((TWO_PI / p) ** 2 * _dist_to_int(fluxes) ** 2))


def product_cylinder_lambda1(a, R, flux):
    """First eigenvalue of ``[0, a] x S^1(R)`` with flux ``flux``: ``d(flux, Z)^2 / R^2``."""
    if a <= 0 or R <= 0:
        raise ValueError("height and radius must be positive")
    return float(_dist_to_int(flux) ** 2 / R ** 2)
