"""Global assembly and solution: monolithic saddle point and hybridized paths.

Monolithic problem::

    [ A  B^T ] [sigma]   [ G ]
    [ B   0  ] [  u  ] = [-F ]

with ``G`` the Dirichlet contribution ``<tau n, g>`` (zero for g = 0).
The hybrid path duplicates face DOFs per cell, adds multipliers on interior
faces through ``c_h(tau, nu) = -sum_E int nu . tau n_out`` and statically
condenses every cell, leaving an SPD system in the multipliers only.
"""

from __future__ import annotations

import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .element import LocalElement
from .exceptions import ConfigError, HRVemError, SolverError
from .material import MaterialLaw
from .polyspace import dim_cell, dim_face, dim_rm_perp

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
REFINEMENT_STEPS = 2  # iterative refinement of the indefinite LU solve
THREADS_ENV = "HRVEM_THREADS"


def _n_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


# ----------------------------------------------------------------------
# boundary conditions


@dataclass(frozen=True)
class BoundaryConditions:
    """Boundary faces are Dirichlet (displacement) unless listed as Neumann.

    ``dirichlet`` is the datum g (callable (n, 3) -> (n, 3)) or None for
    g = 0.  Only homogeneous tractions are supported on Neumann faces.
    """

    neumann_faces: frozenset = frozenset()
    dirichlet: object = None

    def validate(self, mesh):
        bnd = set(mesh.boundary_faces.tolist())
        extra = set(self.neumann_faces) - bnd
        if extra:
            raise ConfigError(f"Neumann faces {sorted(extra)[:5]} are not boundary faces")
        if bnd and set(self.neumann_faces) >= bnd:
            raise ConfigError("the Dirichlet part of the boundary must not be empty")

    def is_dirichlet(self, mesh, face):
        return bool(mesh.is_boundary_face[face]) and face not in self.neumann_faces


ALL_DIRICHLET = BoundaryConditions()


@dataclass(frozen=True)
class GlobalDofMap:
    k: int
    n_face_dofs: int  # per face
    n_div_dofs: int  # per cell
    n_disp_dofs: int  # per cell
    n_faces: int
    n_cells: int
    cell_stress: tuple  # global stress index of every local stress DOF
    cell_disp: tuple
    multiplier_offset: np.ndarray  # per face: block start or -1
    eliminated: np.ndarray  # bool mask over global stress DOFs

    @property
    def n_stress(self):
        return self.n_faces * self.n_face_dofs + self.n_cells * self.n_div_dofs

    @property
    def n_disp(self):
        return self.n_cells * self.n_disp_dofs

    @property
    def n_multipliers(self):
        return int((self.multiplier_offset >= 0).sum()) * self.n_face_dofs

    def face_block(self, face):
        return np.arange(face * self.n_face_dofs, (face + 1) * self.n_face_dofs)


def build_dof_map(mesh, k, bc: BoundaryConditions = ALL_DIRICHLET) -> GlobalDofMap:
    nfd, ndiv, nu = 3 * dim_face(k), dim_rm_perp(k), 3 * dim_cell(k)
    base_div = mesh.n_faces * nfd
    cell_stress, cell_disp = [], []
    for c, faces in enumerate(mesh.cells):
        idx = [np.arange(f * nfd, (f + 1) * nfd) for f in faces]
        idx.append(base_div + c * ndiv + np.arange(ndiv))
        cell_stress.append(np.concatenate(idx))
        cell_disp.append(c * nu + np.arange(nu))
    mult = -np.ones(mesh.n_faces, dtype=np.int64)
    interior = mesh.interior_faces
    mult[interior] = np.arange(len(interior)) * nfd
    eliminated = np.zeros(mesh.n_faces * nfd + mesh.n_cells * ndiv, dtype=bool)
    for f in bc.neumann_faces:
        eliminated[f * nfd : (f + 1) * nfd] = True
    return GlobalDofMap(
        k, nfd, ndiv, nu, mesh.n_faces, mesh.n_cells,
        tuple(cell_stress), tuple(cell_disp), mult, eliminated,
    )


def apply_boundary_conditions(mesh, bc: BoundaryConditions, k):
    """Validate ``bc`` and return the DOF map with Neumann DOFs eliminated."""
    bc.validate(mesh)
    return build_dof_map(mesh, k, bc)


# ----------------------------------------------------------------------
# elements


def _laws(mesh, law):
    if isinstance(law, MaterialLaw):
        return [law] * mesh.n_cells
    laws = list(law)
    if len(laws) != mesh.n_cells:
        raise ConfigError("one material law per cell is required")
    return laws


def build_elements(mesh, k, law, stabilization="boundary"):
    """Local elements with A and B precomputed, in cell order."""
    laws = _laws(mesh, law)

    def make(c):
        el = LocalElement(mesh, c, k, laws[c], stabilization)
        el.a_matrix, el.b_matrix  # noqa: B018 - warm the caches
        return el

    n = _n_threads()
    if n > 1:
        with ThreadPoolExecutor(n) as pool:
            return list(pool.map(make, range(mesh.n_cells)))
    return [make(c) for c in range(mesh.n_cells)]


def _cell_rhs(mesh, el, f, bc):
    F = el.load(f) if f is not None else np.zeros(el.n_disp)
    G = np.zeros(el.n_dofs)
    if bc.dirichlet is not None:
        for j, face in enumerate(mesh.cells[el.cell]):
            if bc.is_dirichlet(mesh, face):
                G[el.face_slice(j)] = el.dirichlet_rhs(j, bc.dirichlet)
    return F, G


# ----------------------------------------------------------------------
# solutions


@dataclass
class Solution:
    """Discrete stress/displacement, stored per cell in local layouts."""

    mesh: object
    k: int
    elements: list
    cell_stress: list
    cell_disp: list
    multipliers: np.ndarray | None = None
    dofmap: GlobalDofMap | None = None
    bc: BoundaryConditions = ALL_DIRICHLET
    method: str = "monolithic"
    info: dict = field(default_factory=dict)

    def stress_vector(self):
        """Global stress DOF vector (face DOFs taken from the lowest cell)."""
        dm = self.dofmap
        out = np.zeros(dm.n_stress)
        for c in reversed(range(len(self.cell_stress))):
            out[dm.cell_stress[c]] = self.cell_stress[c]
        return out

    def displacement_vector(self):
        return np.concatenate(self.cell_disp)

    def multiplier_coefficients(self, face):
        off = self.dofmap.multiplier_offset[face]
        if self.multipliers is None or off < 0:
            return None
        return self.multipliers[off : off + self.dofmap.n_face_dofs]


@dataclass
class SaddleSystem:
    A: sp.csr_matrix
    B: sp.csr_matrix
    F: np.ndarray
    G: np.ndarray
    dofmap: GlobalDofMap
    elements: list
    bc: BoundaryConditions

    def matrix(self):
        free = ~self.dofmap.eliminated
        A = self.A[free][:, free]
        B = self.B[:, free]
        return sp.bmat([[A, B.T], [B, None]], format="csc")

    def rhs(self):
        free = ~self.dofmap.eliminated
        return np.concatenate([self.G[free], -self.F])


def assemble_monolithic(
    mesh, k, law, f, bc: BoundaryConditions = ALL_DIRICHLET, stabilization="boundary", elements=None
) -> SaddleSystem:
    dm = apply_boundary_conditions(mesh, bc, k)
    els = elements if elements is not None else build_elements(mesh, k, law, stabilization)
    rows_a, cols_a, vals_a = [], [], []
    rows_b, cols_b, vals_b = [], [], []
    F = np.zeros(dm.n_disp)
    G = np.zeros(dm.n_stress)
    for c, el in enumerate(els):
        gs, gu = dm.cell_stress[c], dm.cell_disp[c]
        if len(gs) != el.n_dofs or len(gu) != el.n_disp:
            raise HRVemError(f"cell {c}: DOF map does not match element layout")
        rows_a.append(np.repeat(gs, len(gs)))
        cols_a.append(np.tile(gs, len(gs)))
        vals_a.append(el.a_matrix.ravel())
        rows_b.append(np.repeat(gu, len(gs)))
        cols_b.append(np.tile(gs, len(gu)))
        vals_b.append(el.b_matrix.ravel())
        Fc, Gc = _cell_rhs(mesh, el, f, bc)
        F[gu] += Fc
        np.add.at(G, gs, Gc)
    A = sp.coo_matrix(
        (np.concatenate(vals_a), (np.concatenate(rows_a), np.concatenate(cols_a))),
        shape=(dm.n_stress, dm.n_stress),
    ).tocsr()
    B = sp.coo_matrix(
        (np.concatenate(vals_b), (np.concatenate(rows_b), np.concatenate(cols_b))),
        shape=(dm.n_disp, dm.n_stress),
    ).tocsr()
    return SaddleSystem(A, B, F, G, dm, els, bc)


def solve_monolithic(system: SaddleSystem) -> Solution:
    K = system.matrix()
    rhs = system.rhs()
    try:
        lu = spla.splu(K)
    except RuntimeError as exc:
        raise SolverError(f"monolithic factorization failed: {exc}") from None
    x = lu.solve(rhs)
    scale = np.linalg.norm(rhs)
    for _ in range(REFINEMENT_STEPS):
        if not np.all(np.isfinite(x)):
            break
        x += lu.solve(rhs - K @ x)
    if not np.all(np.isfinite(x)):
        raise SolverError("monolithic solve produced non-finite values (singular system?)")
    res = np.linalg.norm(K @ x - rhs)
    rel = res / scale if scale > 0 else res
    dm = system.dofmap
    free = ~dm.eliminated
    nfree = int(free.sum())
    sigma = np.zeros(dm.n_stress)
    sigma[free] = x[:nfree]
    u = x[nfree:]
    log.info("monolithic solve: %d unknowns, relative residual %.2e", len(x), rel)
    if rel > RESIDUAL_TOL:
        log.warning("monolithic residual %.2e above %.0e", rel, RESIDUAL_TOL)
    mesh = system.elements[0].mesh
    return Solution(
        mesh, system.elements[0].k, system.elements,
        [sigma[g] for g in dm.cell_stress],
        [u[g] for g in dm.cell_disp],
        None, dm, system.bc, "monolithic",
        {"residual": rel, "n_unknowns": len(x)},
    )


# ----------------------------------------------------------------------
# hybridization


@dataclass
class HybridCell:
    free: np.ndarray  # local stress DOFs kept (non-Neumann)
    C: np.ndarray  # (n_mult_local, n_free)
    mult: np.ndarray  # global multiplier indices of the rows of C
    F: np.ndarray
    G: np.ndarray


@dataclass
class HybridSystem:
    cells: list
    elements: list
    dofmap: GlobalDofMap
    bc: BoundaryConditions

    @property
    def n_multipliers(self):
        return self.dofmap.n_multipliers


def assemble_hybrid(
    mesh, k, law, f, bc: BoundaryConditions = ALL_DIRICHLET, stabilization="boundary", elements=None
) -> HybridSystem:
    dm = apply_boundary_conditions(mesh, bc, k)
    els = elements if elements is not None else build_elements(mesh, k, law, stabilization)
    nfd = dm.n_face_dofs
    cells = []
    for c, el in enumerate(els):
        keep = np.ones(el.n_dofs, dtype=bool)
        rows, mult_idx = [], []
        for j, face in enumerate(mesh.cells[c]):
            if face in bc.neumann_faces:
                keep[el.face_slice(j)] = False
        free = np.flatnonzero(keep)
        pos = -np.ones(el.n_dofs, dtype=np.int64)
        pos[free] = np.arange(len(free))
        for j, face in enumerate(mesh.cells[c]):
            off = dm.multiplier_offset[face]
            if off < 0:
                continue
            block = np.zeros((nfd, len(free)))
            block[np.arange(nfd), pos[el.face_slice(j)]] = -el.geom.signs[j]
            rows.append(block)
            mult_idx.append(off + np.arange(nfd))
        C = np.vstack(rows) if rows else np.zeros((0, len(free)))
        mult = np.concatenate(mult_idx) if mult_idx else np.zeros(0, dtype=np.int64)
        F, G = _cell_rhs(mesh, el, f, bc)
        cells.append(HybridCell(free, C, mult, F, G[free]))
    return HybridSystem(cells, els, dm, bc)


def _local_blocks(hc, el):
    A = el.a_matrix[np.ix_(hc.free, hc.free)]
    B = el.b_matrix[:, hc.free]
    nu = B.shape[0]
    K = np.block([[A, B.T], [B, np.zeros((nu, nu))]])
    Chat = np.hstack([hc.C, np.zeros((hc.C.shape[0], nu))])
    return K, Chat, np.concatenate([hc.G, -hc.F])


def condense_and_solve(hybrid: HybridSystem) -> Solution:
    """Static condensation onto the multipliers, SPD solve, local recovery.

    The condensed solve is followed by ``REFINEMENT_STEPS`` rounds of
    iterative refinement on the full hybrid system, reusing the local and
    Schur factorizations.
    """
    dm = hybrid.dofmap
    nl = dm.n_multipliers
    local = []
    rows, cols, vals = [], [], []
    for c, (hc, el) in enumerate(zip(hybrid.cells, hybrid.elements)):
        K, Chat, r = _local_blocks(hc, el)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", sla.LinAlgWarning)
                lu = sla.lu_factor(K, check_finite=False)
                XC = sla.lu_solve(lu, Chat.T, check_finite=False)
        except (np.linalg.LinAlgError, sla.LinAlgWarning, ValueError) as exc:
            raise SolverError(f"cell {c}: local saddle-point block is singular ({exc})") from None
        if not np.all(np.isfinite(lu[0])) or np.abs(np.diag(lu[0])).min() == 0:
            raise SolverError(f"cell {c}: local saddle-point block is singular")
        local.append((K, Chat, r, lu, XC))
        if len(hc.mult):
            S_E = Chat @ XC
            rows.append(np.repeat(hc.mult, len(hc.mult)))
            cols.append(np.tile(hc.mult, len(hc.mult)))
            vals.append(S_E.ravel())

    info = {"schur_size": nl}
    schur_solve = None
    if nl:
        S = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nl, nl)
        ).tocsc()
        asym = abs(S - S.T).max()
        info["schur_asymmetry"] = asym / abs(S).max()
        S = 0.5 * (S + S.T)
        lu_s = spla.splu(
            S.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
        piv = lu_s.U.diagonal()
        info["min_pivot"] = float(piv.min())
        info["schur_spd"] = bool(np.all(piv > 0))
        if not info["schur_spd"]:
            log.warning("Schur complement not positive definite: smallest pivot %.3e", piv.min())
        info["schur_matrix"] = S
        schur_solve = lu_s.solve

    def correction(res_cells, res_mult):
        """Solve the hybrid system for right-hand sides (per-cell, constraint)."""
        y = [sla.lu_solve(lu, rc, check_finite=False) for (_, _, _, lu, _), rc in zip(local, res_cells)]
        dlam = np.zeros(nl)
        if nl:
            g = -res_mult
            for hc, (_, Chat, _, _, _), yc in zip(hybrid.cells, local, y):
                if len(hc.mult):
                    g[hc.mult] += Chat @ yc
            dlam = schur_solve(g)
            info.setdefault("schur_rhs", g)
        dx = [yc - XC @ dlam[hc.mult] if len(hc.mult) else yc
              for hc, (_, _, _, _, XC), yc in zip(hybrid.cells, local, y)]
        return dx, dlam

    def residual(x, lam):
        rc = [r - K @ xc - (Chat.T @ lam[hc.mult] if len(hc.mult) else 0.0)
              for hc, (K, Chat, r, _, _), xc in zip(hybrid.cells, local, x)]
        rm = np.zeros(nl)
        for hc, (_, Chat, _, _, _), xc in zip(hybrid.cells, local, x):
            if len(hc.mult):
                rm[hc.mult] -= Chat @ xc
        return rc, rm

    rhs_cells = [r for (_, _, r, _, _) in local]
    x, lam = correction(rhs_cells, np.zeros(nl))
    scale = np.sqrt(sum(float(r @ r) for r in rhs_cells))
    for _ in range(REFINEMENT_STEPS):
        rc, rm = residual(x, lam)
        dx, dlam = correction(rc, rm)
        x = [a + b for a, b in zip(x, dx)]
        lam = lam + dlam
    if nl:
        g0 = info.pop("schur_rhs")
        norm = np.linalg.norm(g0)
        info["schur_residual"] = np.linalg.norm(info["schur_matrix"] @ lam - g0) / (norm if norm > 0 else 1.0)
    rc, rm = residual(x, lam)
    res = np.sqrt(sum(float(r @ r) for r in rc) + float(rm @ rm))
    info["residual"] = res / scale if scale > 0 else res
    if info["residual"] > RESIDUAL_TOL:
        log.warning("hybrid residual %.2e above %.0e", info["residual"], RESIDUAL_TOL)

    cell_stress, cell_disp = [], []
    for hc, el, xc in zip(hybrid.cells, hybrid.elements, x):
        ns = len(hc.free)
        sigma = np.zeros(el.n_dofs)
        sigma[hc.free] = xc[:ns]
        cell_stress.append(sigma)
        cell_disp.append(xc[ns:])
    mesh = hybrid.elements[0].mesh
    return Solution(
        mesh, hybrid.elements[0].k, hybrid.elements, cell_stress, cell_disp,
        lam, dm, hybrid.bc, "hybrid", info,
    )


def solve(mesh, k, law, f, bc=ALL_DIRICHLET, method="monolithic", stabilization="boundary", elements=None):
    """Assemble and solve with either path; returns a :class:`Solution`."""
    if method == "monolithic":
        return solve_monolithic(assemble_monolithic(mesh, k, law, f, bc, stabilization, elements))
    if method == "hybrid":
        return condense_and_solve(assemble_hybrid(mesh, k, law, f, bc, stabilization, elements))
    raise ConfigError(f"unknown solver path {method!r}")


def solution_distance(first: Solution, second: Solution) -> dict:
    """Relative distances between two solutions on the same mesh.

    Stresses are compared in the discrete norm ``sum_E tau^T A_E tau``
    (equivalent to the compliance-weighted L2 norm), displacements in L2.
    """
    ds = ns = du = nu = 0.0
    for el, s1, s2, u1, u2 in zip(
        first.elements, first.cell_stress, second.cell_stress, first.cell_disp, second.cell_disp
    ):
        d = s1 - s2
        ds += d @ el.a_matrix @ d
        ns += s1 @ el.a_matrix @ s1
        d = u1 - u2
        du += d @ el.displacement_mass @ d
        nu += u1 @ el.displacement_mass @ u1

    def rel(a, b):
        return float(np.sqrt(max(a, 0.0) / b)) if b > 0 else float(np.sqrt(max(a, 0.0)))

    return {"stress": rel(ds, ns), "displacement": rel(du, nu)}
