"""Manufactured solutions, error indicators and convergence rates.

Indicators (all by quadrature of degree >= 2k + 4):

==============  =====================================================
``E_u``         ``||u - u_h||``
``E_sigma_div`` ``||div sigma - div sigma_h||``
``E_sigma_pi``  ``||sigma - Pi sigma_h||``
``E_sigma_bnd`` ``sqrt(sum_f h_f int_f kappa |(sigma - sigma_h) n|^2)``
``E_Pu``        ``||P^k u - u_h||``
``E_ustar``     ``||u - Pi_nabla u*||`` (hybrid path with post-processing)
==============  =====================================================
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import _case_b
from .exceptions import ConfigError
from .material import MaterialLaw, symmetrize
from .mesh import generate, mesh_size
from .polyspace import l2_project_cell
from .postprocess import postprocess
from .quadrature import cell_rule, face_rule
from .system import BoundaryConditions, build_elements, solve

log = logging.getLogger(__name__)

INDICATORS = ("E_u", "E_sigma_div", "E_sigma_pi", "E_sigma_bnd", "E_Pu", "E_ustar")
PRIMARY_INDICATORS = INDICATORS[:4]


# ----------------------------------------------------------------------
# manufactured cases


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact fields of a manufactured elasticity problem on the unit cube.

    Callables map (n, 3) points to (n, 3) vectors or (n, 3, 3) tensors;
    ``gradient[:, i, j] = d u_i / d x_j``.  ``dirichlet`` is the boundary
    datum, None meaning ``g = 0``.
    """

    name: str
    law: MaterialLaw
    displacement: Callable
    gradient: Callable
    load: Callable
    dirichlet: Callable | None = None

    def stress(self, points):
        return self.law.apply_C(symmetrize(self.gradient(points)))

    def div_stress(self, points):
        return -self.load(points)

    @property
    def boundary_conditions(self) -> BoundaryConditions:
        return BoundaryConditions(dirichlet=self.dirichlet)


def _xyz(points):
    p = np.asarray(points, dtype=float)
    return p[:, 0], p[:, 1], p[:, 2]


def case_a(lam=1.0, mu=1.0) -> ManufacturedCase:
    """Compressible case: ``u = 10 (S, S, S)``, ``S = sin(pi x) sin(pi y) sin(pi z)``.

    The load is ``-div(C eps(u))``; see :func:`printed_load_a` for the
    historical formula, which omits the ``30 pi^2 mu S`` Laplacian term.
    """
    law = MaterialLaw(lam, mu)
    pi = np.pi

    def displacement(points):
        x, y, z = _xyz(points)
        s = 10 * np.sin(pi * x) * np.sin(pi * y) * np.sin(pi * z)
        return np.stack([s, s, s], axis=1)

    def gradient(points):
        x, y, z = _xyz(points)
        sx, sy, sz = np.sin(pi * x), np.sin(pi * y), np.sin(pi * z)
        cx, cy, cz = np.cos(pi * x), np.cos(pi * y), np.cos(pi * z)
        g = 10 * pi * np.stack([cx * sy * sz, sx * cy * sz, sx * sy * cz], axis=1)
        return np.repeat(g[:, None, :], 3, axis=1)

    def load(points):
        x, y, z = _xyz(points)
        s = np.sin(pi * x) * np.sin(pi * y) * np.sin(pi * z)
        return printed_load_a(points, lam, mu) + (30 * pi**2 * mu * s)[:, None]

    return ManufacturedCase("a", law, displacement, gradient, load)


def printed_load_a(points, lam=1.0, mu=1.0):
    """Load of the compressible case exactly as it is usually quoted."""
    x, y, z = _xyz(points)
    pi = np.pi
    s = np.sin(pi * x) * np.sin(pi * y) * np.sin(pi * z)
    c = lam + mu
    return -10 * pi**2 * np.stack(
        [
            c * np.cos(pi * x) * np.sin(pi * y + pi * z) - c * s,
            c * np.cos(pi * y) * np.sin(pi * x + pi * z) - c * s,
            c * np.cos(pi * z) * np.sin(pi * x + pi * y) - c * s,
        ],
        axis=1,
    )


def case_b(lam=1.0e5, mu=0.5) -> ManufacturedCase:
    """Nearly incompressible case with a divergence-free displacement."""
    law = MaterialLaw(lam, mu)

    def columns(fn, points, *args):
        x, y, z = _xyz(points)
        return np.stack([np.broadcast_to(v, x.shape) for v in fn(x, y, z, *args)], axis=1)

    return ManufacturedCase(
        "b",
        law,
        lambda p: columns(_case_b.displacement, p),
        lambda p: columns(_case_b.displacement_gradient, p).reshape(-1, 3, 3),
        lambda p: columns(_case_b.load, p, lam, mu),
    )


def from_expressions(name, displacement, lam=1.0, mu=1.0, dirichlet="exact") -> ManufacturedCase:
    """Build a case from three sympy-parsable strings in ``x, y, z``.

    ``dirichlet="exact"`` imposes ``g = u`` on the boundary, ``"zero"`` imposes
    ``g = 0`` (the user is then responsible for ``u`` vanishing there).
    """
    import sympy as sp

    if len(displacement) != 3:
        raise ConfigError("a displacement needs three components")
    if dirichlet not in ("exact", "zero"):
        raise ConfigError("dirichlet must be 'exact' or 'zero'")
    X = sp.symbols("x y z")
    try:
        u = [sp.sympify(e, locals=dict(zip("xyz", X))) for e in displacement]
    except (sp.SympifyError, TypeError) as exc:
        raise ConfigError(f"cannot parse displacement: {exc}") from None
    extra = set().union(*(e.free_symbols for e in u)) - set(X)
    if extra:
        raise ConfigError(f"unknown symbols in displacement: {sorted(map(str, extra))}")
    grad = [[sp.diff(u[i], X[j]) for j in range(3)] for i in range(3)]
    eps = [[(grad[i][j] + grad[j][i]) / 2 for j in range(3)] for i in range(3)]
    tr = eps[0][0] + eps[1][1] + eps[2][2]
    sig = [[2 * mu * eps[i][j] + (lam * tr if i == j else 0) for j in range(3)] for i in range(3)]
    f = [sp.simplify(-sum(sp.diff(sig[i][j], X[j]) for j in range(3))) for i in range(3)]

    def vectorize(exprs):
        fns = [sp.lambdify(X, e, "numpy") for e in exprs]

        def call(points):
            x, y, z = _xyz(points)
            return np.stack([np.broadcast_to(np.asarray(fn(x, y, z), float), x.shape) for fn in fns], 1)

        return call

    disp = vectorize(u)
    gflat = vectorize([g for row in grad for g in row])
    return ManufacturedCase(
        name,
        MaterialLaw(lam, mu),
        disp,
        lambda p: gflat(p).reshape(-1, 3, 3),
        vectorize(f),
        disp if dirichlet == "exact" else None,
    )


def patch_displacement(k):
    """A fixed displacement of full degree ``k + 1`` in every component."""
    d = k + 1
    return (
        f"x**{d} + 2*y*z**{d - 1} - x*y + 1",
        f"y**{d} - x**{d - 1}*z + 3*z - 0.5",
        f"z**{d} + x*y**{d - 1} - y*z + 2*x",
    )


def patch_case(k, lam=1.0, mu=1.0) -> ManufacturedCase:
    return from_expressions(f"patch{k}", patch_displacement(k), lam, mu, "exact")


def load_case_file(path, lam=None, mu=None) -> ManufacturedCase:
    """Read a JSON case ``{"name", "displacement": [3 strings], "lam", "mu", "dirichlet"}``."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read case file {path}: {exc}") from None
    if "displacement" not in data:
        raise ConfigError(f"{path}: missing 'displacement'")
    return from_expressions(
        data.get("name", Path(path).stem),
        data["displacement"],
        lam if lam is not None else data.get("lam", 1.0),
        mu if mu is not None else data.get("mu", 1.0),
        data.get("dirichlet", "exact"),
    )


def get_case(name, lam=None, mu=None) -> ManufacturedCase:
    kw = {k: v for k, v in (("lam", lam), ("mu", mu)) if v is not None}
    if name == "a":
        return case_a(**kw)
    if name == "b":
        return case_b(**kw)
    return load_case_file(name, lam, mu)


# ----------------------------------------------------------------------
# error indicators


def _face_owner(mesh):
    """(cell, local face index) of the lower-index cell of every face."""
    owner = {}
    for c, faces in enumerate(mesh.cells):
        for j, f in enumerate(faces):
            owner.setdefault(int(f), (c, j))
    return owner


def compute_errors(solution, case: ManufacturedCase, post=None, quad_degree=None) -> dict:
    """Error indicators of a solution; ``post`` is the output of :func:`postprocess`.

    ``E_ustar`` is NaN when no post-processed field is given.
    """
    mesh, k = solution.mesh, solution.k
    qd = quad_degree if quad_degree is not None else 2 * k + 4
    sq = dict.fromkeys(INDICATORS, 0.0)
    for c, el in enumerate(solution.elements):
        rule = cell_rule(mesh, c, qd)
        pts, w = rule.points, rule.weights
        dofs = solution.cell_stress[c]
        u = case.displacement(pts)
        phi = el.monomials(pts)
        uh = phi @ solution.cell_disp[c].reshape(3, -1).T
        pu = phi @ l2_project_cell(mesh, c, k, case.displacement, qd).reshape(3, -1).T
        sq["E_u"] += w @ ((u - uh) ** 2).sum(1)
        sq["E_Pu"] += w @ ((pu - uh) ** 2).sum(1)
        sq["E_sigma_div"] += w @ ((case.div_stress(pts) - el.divergence(dofs, pts)) ** 2).sum(1)
        d = case.stress(pts) - el.projected_stress(dofs, pts)
        sq["E_sigma_pi"] += w @ (d**2).sum((1, 2))
        if post is not None:
            projectors, coeffs = post
            sq["E_ustar"] += w @ ((u - projectors[c].evaluate(coeffs[c], pts)) ** 2).sum(1)
    fg = mesh.face_geometry
    for f, (c, j) in sorted(_face_owner(mesh).items()):
        el = solution.elements[c]
        rule = face_rule(mesh, f, qd)
        t = case.stress(rule.points) @ fg.normal[f]
        th = el.traction(solution.cell_stress[c], j, rule.points)
        sq["E_sigma_bnd"] += fg.diameter[f] * el.law.kappa * (rule.weights @ ((t - th) ** 2).sum(1))
    out = {key: math.sqrt(max(v, 0.0)) for key, v in sq.items()}
    if post is None:
        out["E_ustar"] = math.nan
    return out


def convergence_rates(h, errors):
    """Observed rates ``log(e_i / e_{i+1}) / log(h_i / h_{i+1})``; NaN where undefined."""
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    if len(h) != len(e):
        raise ValueError("h and errors must have the same length")
    rates = np.full(max(len(h) - 1, 0), np.nan)
    for i in range(len(rates)):
        ok = e[i] > 0 and e[i + 1] > 0 and np.isfinite(e[i]) and np.isfinite(e[i + 1])
        if ok and h[i] != h[i + 1]:
            rates[i] = math.log(e[i] / e[i + 1]) / math.log(h[i] / h[i + 1])
    return rates


# ----------------------------------------------------------------------
# studies


@dataclass
class ErrorReport:
    mesh_family: str
    n: int
    h: float
    k: int
    errors: dict
    rates: dict = field(default_factory=dict)  # rate from the previous mesh
    info: dict = field(default_factory=dict)


@dataclass
class StudyConfig:
    family: str = "cube"
    ns: tuple = (2, 4, 8)
    k: int = 1
    case: str = "a"
    lam: float | None = None
    mu: float | None = None
    method: str = "hybrid"
    postprocess: bool = True
    stabilization: str = "boundary"

    def validate(self):
        if self.k not in (1, 2):
            raise ConfigError("k must be 1 or 2")
        if self.postprocess and self.method != "hybrid":
            raise ConfigError("post-processing requires the hybrid solver")
        if len(self.ns) < 1:
            raise ConfigError("at least one mesh is required")


def run_single(mesh, k, case: ManufacturedCase, method="hybrid", do_postprocess=True,
               stabilization="boundary"):
    """Solve one manufactured problem and return ``(solution, errors)``."""
    els = build_elements(mesh, k, case.law, stabilization)
    sol = solve(mesh, k, case.law, case.load, case.boundary_conditions, method, stabilization, els)
    post = postprocess(sol) if do_postprocess and method == "hybrid" else None
    return sol, compute_errors(sol, case, post)


def attach_rates(reports):
    hs = [r.h for r in reports]
    for key in INDICATORS:
        rates = convergence_rates(hs, [r.errors[key] for r in reports])
        for r, rate in zip(reports[1:], rates):
            r.rates[key] = float(rate)
    return reports


def run_study(cfg: StudyConfig, case: ManufacturedCase | None = None):
    cfg.validate()
    case = case or get_case(cfg.case, cfg.lam, cfg.mu)
    reports = []
    for n in cfg.ns:
        mesh = generate(cfg.family, n)
        sol, errs = run_single(mesh, cfg.k, case, cfg.method, cfg.postprocess, cfg.stabilization)
        rep = ErrorReport(cfg.family, n, mesh_size(mesh), cfg.k, errs,
                          info={"residual": sol.info.get("residual", math.nan)})
        log.info("%s n=%d k=%d h=%.4f %s", cfg.family, n, cfg.k, rep.h,
                 " ".join(f"{key}={v:.3e}" for key, v in errs.items()))
        reports.append(rep)
    return attach_rates(reports)


def csv_columns():
    return ["mesh_family", "n", "h", "k", *INDICATORS, *(f"rate_{i}" for i in INDICATORS)]


def write_csv(reports, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_columns())
        for r in reports:
            w.writerow(
                [r.mesh_family, r.n, repr(r.h), r.k]
                + [repr(float(r.errors[i])) for i in INDICATORS]
                + [repr(float(r.rates.get(i, math.nan))) for i in INDICATORS]
            )
    return path


def plot_svg(reports, path, title=None):
    """Log-log plot of every finite indicator against h."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    hs = np.array([r.h for r in reports])
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    for key in INDICATORS:
        e = np.array([r.errors[key] for r in reports])
        if np.all(np.isfinite(e)) and np.all(e > 0):
            ax.loglog(hs, e, "o-", label=key)
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)
