"""Explicit eigenvalue bounds and their certification against computed spectra."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import MissingLambda11, NotClosed, NotSimplyConnected
from .forms import FluxVector, LinkField, dist_flux_to_lattice, dist_form_to_lattice

TWO_PI = 2.0 * np.pi
REPORT_NAMES = (
    "UpperClosed",
    "UpperGeneral",
    "LowerCylinder",
    "LowerConvexAnnulus",
    "SubdomainUpper",
    "Shikegawa",
    "TorusSharpness",
    "CylinderEquality",
)
CSV_COLUMNS = ("name", "bound", "measured", "margin", "verdict")


@dataclass(frozen=True)
class BoundReport:
    """One certified inequality; ``margin > 0`` means the inequality holds with room."""

    name: str
    bound: float
    measured: float
    margin: float
    verdict: str
    tolerance: float
    kind: str = "lower"
    inputs: dict = field(default_factory=dict)
    note: str = ""

    def __post_init__(self):
        if self.name not in REPORT_NAMES:
            raise ValueError(f"unknown report name {self.name!r}")

    @property
    def passed(self):
        return self.verdict == "pass"

    def to_dict(self):
        out = asdict(self)
        out["inputs"] = {k: _jsonable(v) for k, v in self.inputs.items()}
        return out

    def csv_row(self):
        return (self.name, f"{self.bound:.12g}", f"{self.measured:.12g}", f"{self.margin:.6e}", self.verdict)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


def certify(name, bound, measured, kind, tolerance, inputs=None, note=""):
    """Build a report. ``kind`` is ``lower``/``upper`` or ``equality-lower``/``equality-upper``."""
    bound, measured = float(bound), float(measured)
    if kind.endswith("lower"):
        margin = measured - bound
    elif kind.endswith("upper"):
        margin = bound - measured
    else:
        raise ValueError(f"unknown bound kind {kind!r}")
    if kind.startswith("equality"):
        ok = abs(margin) <= tolerance
    else:
        ok = margin >= -tolerance
    return BoundReport(name, bound, measured, margin, "pass" if ok else "fail", float(tolerance), kind,
                       dict(inputs or {}), note)


# ---------------------------------------------------------------------------
# Bound formulas
# ---------------------------------------------------------------------------


def upper_bound_closed(area, h, basis, tol=1e-9):
    """``d(h, L_Z)^2 / |Omega|`` for a closed potential ``h``."""
    if isinstance(h, LinkField):
        scale = max(1.0, float(np.abs(h.theta).max(initial=0.0)))
        if h.max_curl() > tol * scale:
            raise NotClosed("upper_bound_closed needs a closed potential")
    return dist_form_to_lattice(h, basis) ** 2 / float(area)


def upper_bound_general(area, h_dist2, normB2, lam11=None):
    """``d^2/|Omega| + |B|^2 / (lambda_{1,1} |Omega|)`` with a user-supplied ``lambda_{1,1}``."""
    if normB2 > 0 and (lam11 is None or lam11 <= 0):
        raise MissingLambda11("a positive lambda_{1,1} is required when the field is nonzero")
    extra = normB2 / (lam11 * area) if normB2 > 0 else 0.0
    return float(h_dist2 / area + extra)


def lower_bound_cylinder(K, L_max, flux):
    """``4 pi^2 d(flux, Z)^2 / (K L^2)``."""
    if K < 1 - 1e-12 or L_max <= 0:
        raise ValueError("need K >= 1 and L > 0")
    return float(TWO_PI ** 2 * dist_flux_to_lattice(flux) ** 2 / (K * L_max ** 2))


def lower_bound_convex_annulus(beta, B_dist, L_outer, flux):
    """``4 pi^2 beta^2 d(flux, Z)^2 / (B^2 L^2)``."""
    if not 0 < beta <= B_dist or L_outer <= 0:
        raise ValueError("need 0 < beta <= B and L > 0")
    return float(TWO_PI ** 2 * beta ** 2 * dist_flux_to_lattice(flux) ** 2 / (B_dist ** 2 * L_outer ** 2))


def require_simply_connected(grid, dirichlet_nodes):
    b1, b0 = grid.betti1(dirichlet_nodes)
    if b1 != 0:
        raise NotSimplyConnected(f"subdomain has first Betti number {b1}")
    return b0


def subdomain_upper(grid, links, dirichlet_nodes, k, solve):
    """Mixed eigenvalues ``nu_1..nu_k`` of the subdomain left after removing ``dirichlet_nodes``.

    ``solve(op, m)`` returns a Spectrum. The potential is irrelevant on a
    simply connected subdomain (it is gauged away) so the plain Laplacian is used.
    """
    from .discretize import assemble_mixed

    require_simply_connected(grid, dirichlet_nodes)
    op = assemble_mixed(grid, LinkField.zero(grid), dirichlet_nodes)
    return solve(op, k).eigenvalues[:k]


def tol_zero(solver_tol):
    return max(10.0 * float(solver_tol), 1e-8)


def shikegawa_check(lambda1, flux, curl, solver_tol=1e-10, curl_tol=1e-9, flux_tol=1e-9, positive_floor=None):
    """Check ``lambda_1 = 0  <=>  (B = 0 and every flux is an integer)``.

    ``positive_floor`` optionally demands ``lambda_1 >= floor`` in the nonzero case.
    """
    tz = tol_zero(solver_tol)
    flux_arr = flux.array if isinstance(flux, FluxVector) else np.atleast_1d(flux)
    trivial = float(curl) < curl_tol and bool(np.all(np.abs(flux_arr - np.round(flux_arr)) < flux_tol))
    vanishes = float(lambda1) < tz
    ok = vanishes == trivial
    floor = tz
    if not trivial and positive_floor is not None:
        ok = ok and lambda1 >= positive_floor
        floor = positive_floor
    margin = (tz - lambda1) if trivial else (lambda1 - floor)
    return BoundReport(
        "Shikegawa", tz if trivial else floor, float(lambda1), float(margin), "pass" if ok else "fail", tz,
        "dichotomy", {"flux": flux_arr.tolist(), "curl": float(curl), "tol_zero": tz, "trivial_class": trivial},
    )


# ---------------------------------------------------------------------------
# Extrapolation and sweeps
# ---------------------------------------------------------------------------


def richardson(coarse, fine, order=2, ratio=2):
    """Extrapolated value and error estimate from two resolutions."""
    c = ratio ** order
    extrap = (c * fine - coarse) / (c - 1)
    return float(extrap), float(abs(fine - coarse) / (c - 1))


def observed_orders(h, errors):
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])


def sweep_flux(solve_lambda1, fluxes, jobs=1):
    """Table ``(flux, lambda_1)``; points are evaluated in parallel and merged in input order."""
    fluxes = [float(f) for f in fluxes]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(solve_lambda1, fluxes))
    else:
        values = [solve_lambda1(f) for f in fluxes]
    return np.column_stack([fluxes, values])


def sweep_shape(table, tol=1e-6):
    """Periodicity, symmetry about one half and location of the maximum of a flux sweep."""
    phi, lam = table[:, 0], table[:, 1]
    scale = max(1.0, float(np.abs(lam).max()))
    lookup = {round(p, 9): v for p, v in zip(phi, lam)}
    sym = [abs(v - lookup[round(1 - p, 9)]) for p, v in zip(phi, lam) if round(1 - p, 9) in lookup]
    per = [abs(v - lookup[round(p + 1, 9)]) for p, v in zip(phi, lam) if round(p + 1, 9) in lookup]
    imax = int(np.argmax(lam))
    return {
        "symmetry_defect": float(max(sym, default=0.0)),
        "periodicity_defect": float(max(per, default=0.0)),
        "argmax": float(phi[imax]),
        "symmetric": max(sym, default=0.0) <= tol * scale,
        "periodic": max(per, default=0.0) <= tol * scale,
        "max_at_half": abs(phi[imax] - round(phi[imax] - 0.5) - 0.5) < 1e-9,
    }
