"""Lowest eigenpairs of the Hermitian pencil ``K x = lambda M x``.

The pencil is reduced to the standard problem ``A y = lambda y`` with
``A = M^{-1/2} K M^{-1/2}``. Small problems go to a dense Hermitian solver;
larger ones to a block locally optimal preconditioned conjugate gradient
iteration (LOBPCG) with full reorthogonalization.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sl
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NoConvergence, ZeroVector

DENSE_MAX = 3000
DEFAULT_SEED = 20240611


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    iterations: int
    converged: bool
    method: str
    tol: float
    seed: int = None
    history: tuple = ()
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.eigenvalues.size

    @property
    def lambda1(self):
        return float(self.eigenvalues[0])

    def diagnostics(self):
        return {
            "method": self.method,
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "tol": float(self.tol),
            "seed": self.seed,
            "max_residual": float(self.residuals.max(initial=0.0)),
            "residual_history": [float(r) for r in self.history],
            **{k: v for k, v in self.meta.items() if isinstance(v, (int, float, str, bool))},
        }


def _residuals(A, Y, lam):
    R = A @ Y - Y * lam[None, :]
    return np.linalg.norm(R, axis=0)


def _dense(A, m):
    H = A.toarray()
    lam, Y = sl.eigh(H, subset_by_index=[0, m - 1], driver="evr")
    return lam, Y


def _rayleigh_ritz(A, Q, AQ=None):
    AQ = A @ Q if AQ is None else AQ
    H = Q.conj().T @ AQ
    H = 0.5 * (H + H.conj().T)
    theta, C = np.linalg.eigh(H)
    return theta, C, AQ


def _orthonormalize(V, drop=1e-12):
    """SVQB-style orthonormalization that drops numerically dependent columns."""
    if V.shape[1] == 0:
        return V
    G = V.conj().T @ V
    G = 0.5 * (G + G.conj().T)
    d = np.sqrt(np.maximum(np.real(np.diag(G)), 0.0))
    keep = d > 0
    V, G, d = V[:, keep], G[np.ix_(keep, keep)], d[keep]
    Gs = G / np.outer(d, d)
    w, U = np.linalg.eigh(Gs)
    good = w > drop * w.max(initial=0.0)
    return (V / d[None, :]) @ (U[:, good] / np.sqrt(w[good])[None, :])


def _project_out(V, X):
    for _ in range(2):
        V = V - X @ (X.conj().T @ V)
    return V


def _cluster_end(theta, m, rel_gap):
    end = m
    while end < theta.size - 1 and abs(theta[end] - theta[end - 1]) <= rel_gap * max(1.0, abs(theta[end])):
        end += 1
    return end


def _preconditioner(A, kind, shift):
    if kind in (None, "none"):
        return lambda R, theta: R
    if kind == "jacobi":
        diag = np.real(A.diagonal())
        diag = np.where(diag > 0, diag, 1.0)
        return lambda R, theta: R / diag[:, None]
    if kind == "factorized":
        n = A.shape[0]
        lu = spla.splu((A + shift * sp.identity(n, format="csr")).tocsc())
        return lambda R, theta: lu.solve(np.ascontiguousarray(R))
    raise ValueError(f"unknown preconditioner {kind!r}")


def lobpcg(A, m, tol, block=None, preconditioner="jacobi", shift=0.1, seed=DEFAULT_SEED,
           maxiter=1000, cluster_gap=1e-6, X0=None):
    """Block LOBPCG for the ``m`` smallest eigenpairs of the Hermitian matrix ``A``.

    Returns ``(theta, Y, residuals, iterations, converged, history)``.
    """
    n = A.shape[0]
    nb = min(max(m + 4, block or 0), n // 2 if n >= 2 * (m + 4) else n)
    if nb < m:
        raise ValueError("block size smaller than the number of wanted pairs")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, nb)) + 1j * rng.standard_normal((n, nb))
    if X0 is not None:
        X[:, : X0.shape[1]] = X0
    X = _orthonormalize(X)
    theta, C, AX = _rayleigh_ritz(A, X)
    X, AX = X @ C, AX @ C
    apply_t = _preconditioner(A, preconditioner, shift)
    P = AP = None
    history = []
    res = np.full(nb, np.inf)
    it = 0
    for it in range(1, maxiter + 1):
        R = AX - X * theta[None, :]
        res = np.linalg.norm(R, axis=0)
        end = _cluster_end(theta, m, cluster_gap)
        history.append(float(res[:end].max()))
        if res[:end].max() <= tol:
            return theta, X, res, it, True, history
        active = res > tol * 1e-2
        W = apply_t(R[:, active], theta[active])
        blocks = [W] if P is None else [W, P]
        V = _project_out(np.hstack(blocks), X)
        V = _project_out(_orthonormalize(V), X)
        V = _orthonormalize(V)
        if V.shape[1] == 0:
            break
        AV = A @ V
        Q = np.hstack([X, V])
        AQ = np.hstack([AX, AV])
        theta_all, C, _ = _rayleigh_ritz(A, Q, AQ)
        C = C[:, :nb]
        Xn, AXn = Q @ C, AQ @ C
        coef = X.conj().T @ Xn
        P, AP = Xn - X @ coef, AXn - AX @ coef
        X, AX, theta = Xn, AXn, theta_all[:nb]
        if it % 25 == 0:
            # refresh to stop drift of the implicitly updated products
            X = _orthonormalize(X)
            theta, C, AX = _rayleigh_ritz(A, X)
            X, AX = X @ C, AX @ C
            P = AP = None
    R = AX - X * theta[None, :]
    res = np.linalg.norm(R, axis=0)
    return theta, X, res, it, False, history


def smallest_eigs(op, m, tol=1e-8, method="auto", preconditioner="jacobi", seed=DEFAULT_SEED,
                  dense_max=DENSE_MAX, maxiter=1000, block=None, shift=0.1):
    """The ``m`` smallest eigenpairs of an assembled operator, with certified residuals.

    ``tol`` bounds ``|A y - lambda y|`` for unit ``y`` (equivalently the
    ``M^{-1}``-norm residual of ``K x - lambda M x`` for M-normalized ``x``).
    A floor of ``1000 eps |A|`` is applied and recorded.
    """
    n = op.n_dof
    if m < 1 or m > n:
        raise ValueError(f"cannot compute {m} eigenpairs of a {n}-dof problem")
    A = op.scaled()
    norm_a = float(spla.norm(A, 1))
    tol_eff = max(float(tol), 1e3 * np.finfo(float).eps * norm_a)
    if method == "auto":
        method = "dense" if n <= dense_max else "lobpcg"
    start = time.perf_counter()
    if method == "dense":
        lam, Y = _dense(A, m)
        res = _residuals(A, Y, lam)
        its, ok, hist, used_seed = 1, bool(res.max() <= tol_eff), (float(res.max()),), None
    elif method == "lobpcg":
        lam, Y, res, its, ok, hist = lobpcg(A, m, tol_eff, block, preconditioner, shift, seed, maxiter)
        used_seed = seed
        lam, Y, res = lam[:m], Y[:, :m], res[:m]
    else:
        raise ValueError(f"unknown method {method!r}")
    scale = 1.0 / np.sqrt(op.M)
    X = Y * scale[:, None]
    spec = Spectrum(
        np.asarray(lam, dtype=float), X, np.asarray(res), its, ok, method, tol_eff, used_seed,
        tuple(hist), {"n_dof": n, "norm_A": norm_a, "preconditioner": preconditioner if method == "lobpcg" else "none",
                      "seconds": time.perf_counter() - start},
    )
    if not ok:
        raise NoConvergence(its, float(res.max(initial=0.0)), spec)
    return spec


def rayleigh(op, x):
    """``<x, K x> / <x, M x>`` for a dof vector (or a full node vector)."""
    x = np.asarray(x)
    if x.shape[0] == op.n_nodes and op.n_nodes != op.n_dof:
        x = op.from_nodes(x)
    denom = float(np.real(np.vdot(x, op.M * x)))
    if not denom > 0:
        raise ZeroVector("test vector vanishes on the free nodes")
    return float(np.real(np.vdot(x, op.K @ x)) / denom)


def m_inner(op, X):
    """Matrix of M-inner products of the columns of ``X``."""
    return X.conj().T @ (op.M[:, None] * X)
