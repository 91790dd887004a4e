"""Experiment pipelines shared by the command line front end and the test-suite.

A config names a domain, a potential, solver settings and a task. Each task
returns a :class:`Result` holding spectra, bound reports, tables and checks.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sl

from . import closed_form, geometry
from .bounds import (
    certify,
    lower_bound_convex_annulus,
    lower_bound_cylinder,
    observed_orders,
    richardson,
    shikegawa_check,
    subdomain_upper,
    sweep_flux,
    sweep_shape,
    upper_bound_closed,
)
from .discretize import assemble_circle, assemble_magnetic, assemble_mixed
from .eigensolve import DEFAULT_SEED, rayleigh, smallest_eigs
from .errors import ConfigError, OracleUnavailable
from .expr import Expression
from .forms import HarmonicBasis, LinkField, OneForm, trivialize_gauge

TWO_PI = 2.0 * np.pi
SCHEMA_VERSION = 1
TASKS = ("spectrum", "bounds", "sweep", "degenerate", "convergence")
DOMAIN_KINDS = ("circle", "torus", "cylinder", "annulus", "example1", "rectangle")
SOLVER_DEFAULTS = {
    "grid": [64],
    "eigs": 4,
    "tol": 1e-9,
    "method": "auto",
    "preconditioner": "factorized",
    "dense_max": 3000,
}


@dataclass
class Result:
    spectra: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def add_table(self, name, columns, rows):
        self.tables[name] = {"columns": list(columns), "rows": [list(r) for r in rows]}

    def add_spectrum(self, label, grid, spec):
        diag = {k: v for k, v in spec.diagnostics().items() if k != "seconds"}
        self.spectra.append({
            "label": label,
            "grid": grid,
            "eigenvalues": [float(x) for x in spec.eigenvalues],
            "residuals": [float(x) for x in spec.residuals],
            "diagnostics": diag,
        })
        self.timings[f"solve:{label}:{grid}"] = float(spec.meta.get("seconds", 0.0))

    @property
    def ok(self):
        return all(r.passed for r in self.reports) and all(bool(v) for v in self.checks.values())


# ---------------------------------------------------------------------------
# Solver plumbing
# ---------------------------------------------------------------------------


def solver_options(config):
    opts = dict(SOLVER_DEFAULTS)
    opts.update(config.get("solver", {}))
    opts["seed"] = int(config.get("seed", DEFAULT_SEED))
    return opts


def solve(op, m, opts):
    return smallest_eigs(
        op, min(m, op.n_dof), tol=opts["tol"], method=opts["method"], preconditioner=opts["preconditioner"],
        seed=opts["seed"], dense_max=opts["dense_max"],
    )


def _map(fn, items, jobs):
    items = list(items)
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# ---------------------------------------------------------------------------
# Domains and potentials
# ---------------------------------------------------------------------------


def _expr(source, what):
    try:
        return Expression(source)
    except ConfigError as exc:
        raise ConfigError(f"{what}: {exc}") from None


@dataclass
class Realizer:
    """Turns a domain config into grids (cached per resolution)."""

    spec: dict
    _cache: dict = field(default_factory=dict)
    _annulus: object = None

    @property
    def kind(self):
        return self.spec["kind"]

    def annulus(self):
        if self._annulus is None:
            n = int(self.spec.get("curve_nodes", 1024))
            inner = geometry.curve_from_spec(self.spec["inner"], n)
            outer = geometry.curve_from_spec(self.spec["outer"], n)
            self._annulus = geometry.AnnulusDomain.build(inner, outer)
        return self._annulus

    def cylinder(self):
        warp = _expr(self.spec.get("warp", "1"), "warp")
        return geometry.WarpedCylinder(
            float(self.spec.get("height", 1.0)), float(self.spec.get("length", TWO_PI)),
            lambda r, t: warp(r=r, t=t, x=r, y=t), label="cylinder",
        )

    def grid(self, N):
        if N in self._cache:
            return self._cache[N]
        kind = self.kind
        if kind == "torus":
            p = [float(x) for x in self.spec["periods"]]
            if len(p) != 2:
                raise ConfigError("numerical tori must be two-dimensional")
            grid = geometry.RectTorus(tuple(p)).grid(N, max(4, int(round(N * p[1] / p[0]))))
        elif kind == "cylinder":
            cyl = self.cylinder()
            across = max(4, int(round(N * cyl.height / cyl.base_length * float(self.spec.get("aspect", 1.0)))))
            grid = cyl.grid(across + 1, N)
        elif kind == "annulus":
            an = self.annulus()
            across = max(8, int(round(N * float(np.mean(an.rho)) / an.inner.length * float(self.spec.get("aspect", 1.0)))))
            grid = geometry.normal_coordinates(an, across + 1, N)
        elif kind == "rectangle":
            w, h = float(self.spec["width"]), float(self.spec["height"])
            grid = geometry.build_rectangle(w, h, max(w, h) / N).grid()
        elif kind == "example1":
            raise ConfigError("example1 grids are built per eps")
        else:
            raise ConfigError(f"domain kind {kind!r} has no 2-D grid")
        self._cache[N] = grid
        return grid

    def area(self, grid=None):
        kind = self.kind
        if kind == "torus":
            return float(np.prod([float(x) for x in self.spec["periods"]]))
        if kind == "annulus":
            return float(self.annulus().area)
        return float(grid.area())


def potential_from_config(spec):
    try:
        form = OneForm.from_config(spec)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad potential: {exc}") from None
    return form


def links_for(grid, pot_spec, basis=None):
    form = potential_from_config(pot_spec)
    if form.kind == "harmonic-flux" and len(form.flux) != len(grid.generators):
        raise ConfigError(
            f"potential gives {len(form.flux)} fluxes but the domain has {len(grid.generators)} homology generators"
        )
    return form.links(grid, basis)


def circle_operator(dom, pot, n):
    L = float(dom.get("length", TWO_PI))
    t = L * np.arange(n) / n
    theta = _expr(dom.get("theta", "1"), "theta")(t=t, r=0 * t, x=t, y=0 * t) * np.ones(n)
    kind = pot.get("kind")
    if kind == "harmonic-flux":
        flux = np.atleast_1d(pot["flux"])
        if flux.size != 1:
            raise ConfigError("a circle has exactly one homology generator")
        H = TWO_PI * float(flux[0]) / L * np.ones(n)
    elif kind in ("closed-form", "general"):
        H = _expr(pot.get("Ht", "0"), "Ht")(t=t, r=0 * t, x=t, y=0 * t) * np.ones(n)
    else:
        raise ConfigError(f"potential kind {kind!r} is not supported on circles")
    return assemble_circle(theta, H, L)


def circle_flux(dom, pot):
    L = float(dom.get("length", TWO_PI))
    if pot.get("kind") == "harmonic-flux":
        return float(np.atleast_1d(pot["flux"])[0])
    H = _expr(pot.get("Ht", "0"), "Ht")
    spec = closed_form.circle_spectrum(L, 1.0, lambda t: H(t=t, r=0 * t, x=t, y=0 * t), (0, 0))
    return spec.flux


# ---------------------------------------------------------------------------
# Radial oracle for concentric annuli
# ---------------------------------------------------------------------------


def radial_annulus_eigs(r1, r2, nu, n=2000, count=1):
    """Lowest eigenvalues of ``-(r f')' + nu^2 f / r = lambda r f`` on ``[r1, r2]``, Neumann ends.

    Second-order finite volumes with lumped mass; ``nu = k - flux`` is the
    angular frequency of the separated mode.
    """
    r = np.linspace(r1, r2, n + 1)
    h = (r2 - r1) / n
    rm = 0.5 * (r[:-1] + r[1:])
    w = np.full(n + 1, h)
    w[0] = w[-1] = h / 2
    mass = r * w
    diag = np.zeros(n + 1)
    diag[:-1] += rm / h
    diag[1:] += rm / h
    diag += nu ** 2 * w / r
    off = -rm / h
    s = 1.0 / np.sqrt(mass)
    return sl.eigh_tridiagonal(diag * s * s, off * s[:-1] * s[1:], select="i", select_range=(0, count - 1))[0]


def radial_annulus_lambda1(r1, r2, flux, n=2000, kmax=3):
    """First eigenvalue of the concentric annulus by minimizing over angular modes."""
    ks = np.arange(int(np.floor(flux)) - kmax, int(np.ceil(flux)) + kmax + 1)
    return float(min(radial_annulus_eigs(r1, r2, k - flux, n)[0] for k in ks))


def radial_annulus_lambda1_extrapolated(r1, r2, flux, n=2000):
    coarse = radial_annulus_lambda1(r1, r2, flux, n)
    fine = radial_annulus_lambda1(r1, r2, flux, 2 * n)
    return richardson(coarse, fine)


# ---------------------------------------------------------------------------
# Example 1 helpers
# ---------------------------------------------------------------------------


def example1_cut_nodes(grid, eps, tol=1e-9):
    """Nodes of the rectangle ``[-1, 1] x [0, eps]`` (Dirichlet set of the subdomain)."""
    x, y = (c.ravel() for c in grid.node_coords())
    sel = (np.abs(x) <= 1 + tol) & (y <= eps + tol) & grid.active_nodes()
    return np.nonzero(sel)[0]


def example1_test_function(grid, eps, tol=1e-9):
    """Three-piece plateau function: 1 away from the channel, ``|x| - 1`` ramps, 0 on the cut."""
    x, y = (c.ravel() for c in grid.node_coords())
    f = np.ones(grid.n_nodes)
    strip = (np.abs(x) <= 2 + tol) & (y <= eps + tol)
    f[strip] = np.clip(np.abs(x[strip]) - 1.0, 0.0, 1.0)
    f[~grid.active_nodes()] = 0.0
    return f


def example1_rayleigh(op, links, eps):
    """Rayleigh quotient of the gauge-dressed test function ``f exp(i chi)`` on the full domain."""
    grid = links.grid
    f = example1_test_function(grid, eps)
    cut = np.zeros(grid.n_nodes, bool)
    cut[example1_cut_nodes(grid, eps)] = True
    keep = np.nonzero(grid.active_nodes() & ~cut)[0]
    chi = trivialize_gauge(links, keep)
    u = f * np.exp(1j * chi)
    return rayleigh(op, op.from_nodes(u)), f


# ---------------------------------------------------------------------------
# Tasks
# ---------------------------------------------------------------------------


def _ladder(opts):
    grid = opts["grid"]
    return [int(g) for g in (grid if isinstance(grid, (list, tuple)) else [grid])]


def _problem(realizer, pot, N):
    grid = realizer.grid(N)
    basis = HarmonicBasis.build(grid) if grid.generators else None
    links = links_for(grid, pot, basis)
    return grid, links, basis, assemble_magnetic(grid, links)


def run_spectrum(config, jobs=1):
    res = Result()
    dom, pot, opts = config["domain"], config["potential"], solver_options(config)
    m = int(opts["eigs"])
    if dom["kind"] == "circle":
        specs = _map(lambda n: solve(circle_operator(dom, pot, n), m, opts), _ladder(opts), jobs)
    elif dom["kind"] == "example1":
        return run_degenerate(config, jobs)
    else:
        real = Realizer(dom)
        specs = _map(lambda n: solve(_problem(real, pot, n)[3], m, opts), _ladder(opts), jobs)
    rows = []
    for n, spec in zip(_ladder(opts), specs):
        res.add_spectrum(dom["kind"], n, spec)
        rows += [[n, k + 1, float(l), float(r)] for k, (l, r) in enumerate(zip(spec.eigenvalues, spec.residuals))]
    res.add_table("spectra", ("grid", "k", "eigenvalue", "residual"), rows)
    return res


def _oracle(dom, pot, m):
    kind = dom["kind"]
    if kind == "circle":
        L = float(dom.get("length", TWO_PI))
        flux = circle_flux(dom, pot)
        return closed_form.circle_spectrum(L, 1.0, TWO_PI * flux / L, (-m - 2, m + 2)).eigenvalues[:m]
    if kind == "torus":
        if pot.get("kind") != "harmonic-flux":
            raise OracleUnavailable("torus oracle needs a harmonic-flux potential")
        return closed_form.torus_spectrum(dom["periods"], pot["flux"], m).eigenvalues
    raise OracleUnavailable(f"no closed-form spectrum for domain kind {kind!r}")


def run_convergence(config, jobs=1):
    res = Result()
    dom, pot, opts = config["domain"], config["potential"], solver_options(config)
    m = int(opts["eigs"])
    exact = _oracle(dom, pot, m)
    ladder = _ladder(opts)
    if dom["kind"] == "circle":
        specs = _map(lambda n: solve(circle_operator(dom, pot, n), m, opts), ladder, jobs)
        L = float(dom.get("length", TWO_PI))
        hs = [L / n for n in ladder]
    else:
        real = Realizer(dom)
        specs = _map(lambda n: solve(_problem(real, pot, n)[3], m, opts), ladder, jobs)
        hs = [real.grid(n).h_u for n in ladder]
    for n, spec in zip(ladder, specs):
        res.add_spectrum(dom["kind"], n, spec)
    err = np.array([[abs(s.eigenvalues[k] - exact[k]) for k in range(m)] for s in specs])
    rows, orders_all = [], []
    scale = max(1.0, float(np.max(np.abs(exact))))
    for k in range(m):
        fit = exact[k] > 1e-12 * scale
        orders = observed_orders(hs, err[:, k]) if fit and len(ladder) > 1 else [np.nan] * (len(ladder) - 1)
        if fit:
            orders_all.extend(orders)
        for i, n in enumerate(ladder):
            order = float(orders[i - 1]) if i > 0 and fit else None
            rows.append([n, hs[i], k + 1, float(specs[i].eigenvalues[k]), float(exact[k]), float(err[i, k]), order])
    res.add_table("convergence", ("grid", "h", "k", "numeric", "exact", "error", "order"), rows)
    if orders_all:
        lo, hi = config.get("order_window", [1.7, 2.3])
        res.checks["order_window"] = bool(np.all((np.array(orders_all) >= lo) & (np.array(orders_all) <= hi)))
    return res


def _measured(values):
    """Richardson value and error estimate from the two finest resolutions (or the single value)."""
    if len(values) >= 2:
        return richardson(values[-2], values[-1])
    return float(values[-1]), 0.0


def run_bounds(config, jobs=1):
    res = Result()
    dom, pot, opts = config["domain"], config["potential"], solver_options(config)
    kind = dom["kind"]
    if kind == "example1":
        return run_degenerate(config, jobs)
    m = max(int(opts["eigs"]), 3)
    requested = set(config.get("bounds", []))
    bound_tol = float(config.get("bound_tol", 1e-6))
    ladder = _ladder(opts)

    if kind == "circle":
        ops = [circle_operator(dom, pot, n) for n in ladder]
        specs = _map(lambda op: solve(op, m, opts), ops, jobs)
        for n, s in zip(ladder, specs):
            res.add_spectrum(kind, n, s)
        lam, err = _measured([s.lambda1 for s in specs])
        flux = circle_flux(dom, pot)
        res.reports.append(shikegawa_check(specs[-1].lambda1, [flux], 0.0, opts["tol"]))
        return res

    real = Realizer(dom)
    problems = [_problem(real, pot, n) for n in ladder]
    specs = _map(lambda p: solve(p[3], m, opts), problems, jobs)
    for n, s in zip(ladder, specs):
        res.add_spectrum(kind, n, s)
    grid, links, basis, op = problems[-1]
    lam, err = _measured([s.lambda1 for s in specs])
    flux = links.flux()
    eq_tol = max(5.0 * err, 10.0 * opts["tol"])
    inputs = {"flux": list(flux.values), "richardson_error": err, "lambda1_finest": specs[-1].lambda1}

    if basis is not None and (not requested or "UpperClosed" in requested or "TorusSharpness" in requested):
        area = real.area(grid)
        ub = upper_bound_closed(area, links, basis)
        inp = {**inputs, "area": area, "gram_diag": np.diag(basis.gram).tolist()}
        if kind == "torus" and (not requested or "TorusSharpness" in requested):
            res.reports.append(certify("TorusSharpness", ub, lam, "equality-upper", eq_tol, inp,
                                       "flat rectangular torus: equality expected"))
        if not requested or "UpperClosed" in requested:
            res.reports.append(certify("UpperClosed", ub, lam, "upper", bound_tol, inp))

    if kind in ("cylinder", "annulus") and (not requested or requested & {"LowerCylinder", "CylinderEquality"}):
        u, _ = grid.node_coords()
        K, L_max = geometry.foliation_constant(grid, u.ravel())
        lb = lower_bound_cylinder(K, L_max, flux)
        inp = {**inputs, "K": K, "L_max": L_max}
        if not requested or "LowerCylinder" in requested:
            res.reports.append(certify("LowerCylinder", lb, lam, "lower", bound_tol, inp))
        product = kind == "cylinder" and not Expression(dom.get("warp", "1")).variables
        if product and (not requested or "CylinderEquality" in requested):
            res.reports.append(certify("CylinderEquality", lb, lam, "equality-lower", eq_tol, inp,
                                       "product cylinder: equality expected"))

    if kind == "annulus":
        an = real.annulus()
        if not requested or "LowerConvexAnnulus" in requested:
            lb = lower_bound_convex_annulus(an.beta, an.B_dist, an.L_outer, flux)
            inp = {**inputs, "beta": an.beta, "B_dist": an.B_dist, "L_outer": an.L_outer}
            res.reports.append(certify("LowerConvexAnnulus", lb, lam, "lower", bound_tol, inp))
        if not requested or "SubdomainUpper" in requested:
            slit = np.array(grid.node(np.arange(grid.n_u), 0))
            k = min(3, m)
            nu = subdomain_upper(grid, links, slit, k, lambda o, kk: solve(o, kk, opts))
            for j in range(k):
                res.reports.append(certify(
                    "SubdomainUpper", nu[j], specs[-1].eigenvalues[j], "upper", bound_tol,
                    {**inputs, "k": j + 1}, "radial slit subdomain, same grid",
                ))

    if not requested or "Shikegawa" in requested:
        res.reports.append(shikegawa_check(specs[-1].lambda1, flux, links.max_curl(), opts["tol"]))
    return res


def run_sweep(config, jobs=1):
    res = Result()
    dom, pot, opts = config["domain"], config["potential"], solver_options(config)
    fluxes = config.get("fluxes") or list(np.round(np.arange(0, 1.0001, 0.05), 10))
    N = _ladder(opts)[-1]
    if dom["kind"] == "circle":
        def lam1(f):
            return solve(circle_operator(dom, {"kind": "harmonic-flux", "flux": [f]}, N), 1, opts).lambda1
    elif dom["kind"] in ("cylinder", "annulus", "torus"):
        real = Realizer(dom)
        grid = real.grid(N)
        basis = HarmonicBasis.build(grid)
        direction = np.asarray(pot.get("flux", [1.0] * basis.m), dtype=float) if pot.get("kind") == "harmonic-flux" else None
        if direction is None or not np.any(direction):
            direction = np.ones(basis.m)
        direction = direction / np.abs(direction).max()

        def lam1(f):
            links = basis.combination(f * direction)
            return solve(assemble_magnetic(grid, links), 1, opts).lambda1
    else:
        raise ConfigError(f"sweeps are not available on {dom['kind']!r}")
    table = sweep_flux(lam1, fluxes, jobs)
    res.add_table("sweep", ("flux", "lambda1"), table.tolist())
    shape = sweep_shape(table, float(config.get("sweep_tol", 1e-6)))
    res.checks.update({"periodic": shape["periodic"], "symmetric": shape["symmetric"], "max_at_half": shape["max_at_half"]})
    res.add_table("sweep_shape", ("symmetry_defect", "periodicity_defect", "argmax"),
                  [[shape["symmetry_defect"], shape["periodicity_defect"], shape["argmax"]]])
    return res


def example1_point(eps, cells_per_unit, flux, opts):
    """Solve one rung of the Example-1 ladder; returns a dict of observables."""
    mask = geometry.build_example1(eps, 1.0 / cells_per_unit)
    grid = mask.grid()
    links = OneForm("harmonic-flux", flux=(flux,)).links(grid)
    op = assemble_magnetic(grid, links)
    spec = solve(op, 1, opts)
    rq, f = example1_rayleigh(op, links, eps)
    cut = example1_cut_nodes(grid, eps)
    nu = subdomain_upper(grid, links, cut, 1, lambda o, k: solve(o, k, opts))
    return {
        "eps": eps,
        "lambda1": spec.lambda1,
        "nu1": float(nu[0]),
        "rayleigh": rq,
        "channel_rows": geometry.example1_channel_rows(mask),
        "n_dof": op.n_dof,
        "spectrum": spec,
        "flux": links.flux(),
        "curl": links.max_curl(),
    }


def run_degenerate(config, jobs=1):
    res = Result()
    dom, pot, opts = config["domain"], config["potential"], solver_options(config)
    eps_list = [float(e) for e in dom.get("eps", [0.4, 0.2, 0.1, 0.05])]
    cpu = int(dom.get("cells_per_unit", 60))
    flux = float(np.atleast_1d(pot.get("flux", [0.5]))[0])
    bound_tol = float(config.get("bound_tol", 1e-6))
    points = _map(lambda e: example1_point(e, cpu, flux, opts), eps_list, jobs)
    rows = []
    for p in points:
        res.add_spectrum(f"example1(eps={p['eps']})", cpu, p["spectrum"])
        rows.append([p["eps"], p["lambda1"], p["nu1"], p["rayleigh"], p["channel_rows"], p["n_dof"]])
        res.reports.append(certify("SubdomainUpper", p["nu1"], p["lambda1"], "upper", bound_tol,
                                   {"eps": p["eps"], "flux": flux}, "D_eps: complement of the cut rectangle"))
        res.reports.append(shikegawa_check(p["lambda1"], p["flux"], p["curl"], opts["tol"]))
    res.add_table("degeneration", ("eps", "lambda1", "nu1", "rayleigh_test_function", "channel_rows", "n_dof"), rows)
    lam = np.array([p["lambda1"] for p in points])
    order = np.argsort([-p["eps"] for p in points])
    lam_sorted = lam[order]
    res.checks["strictly_decreasing"] = bool(np.all(np.diff(lam_sorted) < 0))
    res.checks["halved"] = bool(lam_sorted[-1] <= 0.5 * lam_sorted[0])
    res.checks["below_test_function"] = bool(all(p["lambda1"] <= p["rayleigh"] for p in points))
    return res


RUNNERS = {
    "spectrum": run_spectrum,
    "bounds": run_bounds,
    "sweep": run_sweep,
    "degenerate": run_degenerate,
    "convergence": run_convergence,
}


def run_config(config, jobs=1):
    start = time.perf_counter()
    task = config["task"]
    if task not in RUNNERS:
        raise ConfigError(f"unknown task {task!r}")
    if task == "convergence" and config["domain"]["kind"] not in ("circle", "torus"):
        raise OracleUnavailable(f"no closed-form spectrum for domain kind {config['domain']['kind']!r}")
    res = RUNNERS[task](config, jobs)
    res.timings["total"] = time.perf_counter() - start
    return res
