"""Command-line driver.

    python -m hrvem solve --family cube --n 4 --k 1 --test a --hybrid --postprocess
    python -m hrvem convergence --family cube --n 2,4,8 --k 1 --test a --hybrid --postprocess --csv out.csv
    python -m hrvem patch-test --k 2 --family cube --n 2
    python -m hrvem mesh-info --mesh mesh.poly

Exit codes: 0 ok, 2 configuration error, 3 mesh error, 4 solver error,
5 acceptance check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import dataclass

from .exceptions import ConfigError, HRVemError, MeshError, SolverError
from .mesh import GENERATORS, generate, import_mesh, mesh_size, quality_report
from .polyspace import cell_monomials, l2_project_cell
from .postprocess import postprocess
from .quadrature import cell_rule
from .system import build_elements, solution_distance, solve
from .verify import (
    INDICATORS,
    ErrorReport,
    StudyConfig,
    attach_rates,
    compute_errors,
    get_case,
    patch_case,
    plot_svg,
    run_single,
    write_csv,
)

log = logging.getLogger("hrvem")

EXIT_OK, EXIT_CONFIG, EXIT_MESH, EXIT_SOLVER, EXIT_ACCEPT = 0, 2, 3, 4, 5

DEFAULT_PATCH_TOL = 1e-8
DEFAULT_EQUIV_TOL = 1e-8


@dataclass
class RunConfig:
    command: str
    family: str = "cube"
    ns: tuple = (2,)
    mesh: str | None = None
    k: int = 1
    test: str = "a"
    lam: float | None = None
    mu: float | None = None
    methods: tuple = ("hybrid",)
    postprocess: bool = False
    stabilization: str = "boundary"
    csv: str | None = None
    plot: str | None = None
    patch_tol: float = DEFAULT_PATCH_TOL
    equiv_tol: float = DEFAULT_EQUIV_TOL
    strict: bool = False

    def validate(self):
        if self.k not in (1, 2):
            raise ConfigError(f"k must be 1 or 2, got {self.k}")
        if self.postprocess and "hybrid" not in self.methods:
            raise ConfigError("--postprocess requires --hybrid (u* is built from the multipliers)")
        if self.mesh is None and self.family not in GENERATORS:
            raise ConfigError(f"unknown mesh family {self.family!r}")
        if self.mesh is None and any(n < 1 for n in self.ns):
            raise ConfigError("mesh resolutions must be positive")
        if self.command == "convergence" and self.mesh is not None:
            raise ConfigError("convergence studies need a generated family (--family/--n)")
        if self.command == "convergence" and len(self.methods) != 1:
            raise ConfigError("choose one solver path for a convergence study")


def _meshes(cfg: RunConfig):
    if cfg.mesh is not None:
        m = import_mesh(cfg.mesh)
        m.validate_geometry()
        yield cfg.mesh, 0, m
    else:
        for n in cfg.ns:
            yield cfg.family, n, generate(cfg.family, n)


def _fmt(errors):
    return " ".join(f"{k}={v:.3e}" for k, v in errors.items())


# ----------------------------------------------------------------------
# commands


def cmd_mesh_info(cfg: RunConfig):
    for name, n, m in _meshes(cfg):
        m.validate_geometry()
        rep = quality_report(m)
        rep["total_volume"] = float(sum(g.volume for g in m.cell_geometry))
        print(json.dumps({"mesh": name, "n": n, **rep}, indent=2))
    return EXIT_OK


def cmd_solve(cfg: RunConfig):
    case = get_case(cfg.test, cfg.lam, cfg.mu)
    status = EXIT_OK
    reports = []
    for name, n, mesh in _meshes(cfg):
        els = build_elements(mesh, cfg.k, case.law, cfg.stabilization)
        sols = {}
        for method in cfg.methods:
            t0 = time.perf_counter()
            sol = solve(mesh, cfg.k, case.law, case.load, case.boundary_conditions,
                        method, cfg.stabilization, els)
            post = postprocess(sol) if cfg.postprocess and method == "hybrid" else None
            errs = compute_errors(sol, case, post)
            sols[method] = sol
            print(f"[{method}] {name} n={n} k={cfg.k} h={mesh_size(mesh):.4f} "
                  f"time={time.perf_counter() - t0:.2f}s residual={sol.info.get('residual', 0):.2e}")
            print(f"[{method}] {_fmt(errs)}")
            reports.append(ErrorReport(name, n, mesh_size(mesh), cfg.k, errs))
        if len(sols) == 2:
            dist = solution_distance(sols["monolithic"], sols["hybrid"])
            ok = max(dist.values()) < cfg.equiv_tol
            print(f"solution distance: stress={dist['stress']:.3e} "
                  f"displacement={dist['displacement']:.3e} tol={cfg.equiv_tol:.0e} "
                  f"{'PASS' if ok else 'FAIL'}")
            if not ok:
                status = EXIT_ACCEPT
    if cfg.csv:
        write_csv(reports, cfg.csv)
    return status


def cmd_convergence(cfg: RunConfig):
    case = get_case(cfg.test, cfg.lam, cfg.mu)
    study = StudyConfig(cfg.family, tuple(cfg.ns), cfg.k, cfg.test, cfg.lam, cfg.mu,
                        cfg.methods[0], cfg.postprocess, cfg.stabilization)
    study.validate()
    reports = []
    for name, n, mesh in _meshes(cfg):
        _, errs = run_single(mesh, cfg.k, case, study.method, study.postprocess, cfg.stabilization)
        reports.append(ErrorReport(name, n, mesh_size(mesh), cfg.k, errs))
    attach_rates(reports)
    header = f"{'n':>4} {'h':>8} " + " ".join(f"{i:>12}" for i in INDICATORS)
    print(header)
    for r in reports:
        print(f"{r.n:>4} {r.h:8.4f} " + " ".join(f"{r.errors[i]:12.4e}" for i in INDICATORS))
        if r.rates:
            print(f"{'':>4} {'rate':>8} " + " ".join(f"{r.rates[i]:12.2f}" for i in INDICATORS))
    if cfg.csv:
        write_csv(reports, cfg.csv)
        print(f"wrote {cfg.csv}")
    if cfg.plot:
        plot_svg(reports, cfg.plot, f"case {case.name}, {cfg.family}, k={cfg.k}")
        print(f"wrote {cfg.plot}")
    return EXIT_OK


def best_approximation_error(mesh, k, case):
    """``||u - P^k u||`` by quadrature of degree 2k + 4."""
    total = 0.0
    for c in range(mesh.n_cells):
        rule = cell_rule(mesh, c, 2 * k + 4)
        coeffs = l2_project_cell(mesh, c, k, case.displacement).reshape(3, -1)
        pu = cell_monomials(mesh, c, k)(rule.points) @ coeffs.T
        total += rule.weights @ ((case.displacement(rule.points) - pu) ** 2).sum(1)
    return math.sqrt(total)


def cmd_patch_test(cfg: RunConfig):
    """Polynomial patch test with ``u`` of full degree ``k + 1``.

    ``u_h`` reproduces ``P^k u`` (not ``u``), so by default ``E_u`` is
    compared with ``||u - P^k u||`` and the five other indicators with zero;
    ``--strict`` requires all six indicators below the tolerance.
    """
    status = EXIT_OK
    for name, n, mesh in _meshes(cfg):
        case = patch_case(cfg.k, 1.0 if cfg.lam is None else cfg.lam, 1.0 if cfg.mu is None else cfg.mu)
        t0 = time.perf_counter()
        _, errs = run_single(mesh, cfg.k, case, "hybrid", True, cfg.stabilization)
        best = best_approximation_error(mesh, cfg.k, case)
        checks = {key: v for key, v in errs.items() if key != "E_u"}
        checks["E_u - |u - P^k u|"] = abs(errs["E_u"] - best)
        if cfg.strict:
            checks["E_u"] = errs["E_u"]
        worst = max(checks, key=checks.get)
        ok = checks[worst] < cfg.patch_tol
        print(f"{name} n={n} k={cfg.k} time={time.perf_counter() - t0:.2f}s")
        print(f"  {_fmt(errs)}")
        print(f"  |u - P^k u| = {best:.3e}")
        print(f"  max check {worst} = {checks[worst]:.3e} tol={cfg.patch_tol:.0e} "
              f"{'PASS' if ok else 'FAIL'}")
        if not ok:
            status = EXIT_ACCEPT
    return status


COMMANDS = {
    "solve": cmd_solve,
    "convergence": cmd_convergence,
    "patch-test": cmd_patch_test,
    "mesh-info": cmd_mesh_info,
}


# ----------------------------------------------------------------------
# argument parsing


def _int_list(text):
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="hrvem", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        src = s.add_mutually_exclusive_group()
        src.add_argument("--mesh", help="mesh file in the text polyhedral format")
        src.add_argument("--family", choices=sorted(GENERATORS), default=None)
        s.add_argument("--n", type=_int_list, default=None, help="resolution(s), e.g. 2,4,8")
        if name == "mesh-info":
            continue
        s.add_argument("--k", type=int, default=1)
        s.add_argument("--lam", type=float, default=None)
        s.add_argument("--mu", type=float, default=None)
        s.add_argument("--stabilization", choices=("boundary", "shape"), default="boundary")
        if name == "patch-test":
            s.add_argument("--tol", type=float, default=DEFAULT_PATCH_TOL)
            s.add_argument("--strict", action="store_true",
                           help="require E_u itself below the tolerance")
            continue
        s.add_argument("--test", default="a", help="a, b, or a JSON case file")
        s.add_argument("--monolithic", action="store_true")
        s.add_argument("--hybrid", action="store_true")
        s.add_argument("--postprocess", action="store_true")
        s.add_argument("--csv")
        if name == "convergence":
            s.add_argument("--plot", help="write a log-log SVG plot")
        else:
            s.add_argument("--equiv-tol", type=float, default=DEFAULT_EQUIV_TOL)
    return p


def config_from_args(args) -> RunConfig:
    methods = tuple(m for m in ("monolithic", "hybrid") if getattr(args, m, False)) or ("hybrid",)
    default_ns = (2, 4, 8) if args.command == "convergence" else (2,)
    return RunConfig(
        command=args.command,
        family=args.family or "cube",
        ns=args.n or default_ns,
        mesh=args.mesh,
        k=getattr(args, "k", 1),
        test=getattr(args, "test", "a"),
        lam=getattr(args, "lam", None),
        mu=getattr(args, "mu", None),
        methods=methods,
        postprocess=getattr(args, "postprocess", False),
        stabilization=getattr(args, "stabilization", "boundary"),
        csv=getattr(args, "csv", None),
        plot=getattr(args, "plot", None),
        patch_tol=getattr(args, "tol", DEFAULT_PATCH_TOL),
        equiv_tol=getattr(args, "equiv_tol", DEFAULT_EQUIV_TOL),
        strict=getattr(args, "strict", False),
    )


def run(cfg: RunConfig) -> int:
    try:
        cfg.validate()
        return COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MeshError as exc:
        print(f"mesh error: {exc}", file=sys.stderr)
        return EXIT_MESH
    except (SolverError, HRVemError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return run(config_from_args(args))


if __name__ == "__main__":
    sys.exit(main())
