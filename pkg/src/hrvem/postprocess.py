"""Enhanced displacement from the hybridized solution.

For every cell the non-conforming virtual field ``u*`` (degree ``l = k + 1``)
is fixed by its face moments of order <= k (taken from the multipliers on
interior faces and from the Dirichlet datum on boundary faces) and its
interior moments of order <= k - 1 (taken from ``u_h``).  ``u*`` is never
evaluated; only its projection ``Pi_nabla u*`` onto ``[P_{k+1}(E)]^3`` is.

Moments are stored unscaled (``int_f u* . q`` rather than ``|f|^-1 int_f``).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .exceptions import ConfigError, DegenerateCellError
from .polyspace import CellMonomials, dim_cell, dim_face, face_mass, face_monomials
from .quadrature import cell_rule, face_rule


@dataclass(frozen=True)
class NcDisplacementDofs:
    cell: int
    k: int
    face_moments: tuple  # per local face: (3, dim_face(k))
    interior_moments: np.ndarray  # (3, dim_cell(k - 1))

    @property
    def n_dofs(self):
        return sum(m.size for m in self.face_moments) + self.interior_moments.size


def build_ustar_dofs(solution, cell) -> NcDisplacementDofs:
    """Moments of ``u*`` on ``cell`` from a hybridized solution."""
    if solution.multipliers is None:
        raise ConfigError("post-processing needs the multipliers of the hybrid solver")
    mesh, k = solution.mesh, solution.k
    el = solution.elements[cell]
    bc = solution.bc
    nkf = dim_face(k)
    faces = []
    for j, face in enumerate(mesh.cells[cell]):
        if face in bc.neumann_faces:
            raise ConfigError(
                f"face {face}: post-processing is only defined on Dirichlet boundaries"
            )
        lam = solution.multiplier_coefficients(face)
        if lam is not None:
            faces.append(lam.reshape(3, nkf) @ el.faces[j].mass)
        elif bc.dirichlet is None:
            faces.append(np.zeros((3, nkf)))
        else:
            rule = face_rule(mesh, face, 2 * k + 4)
            phi = el.faces[j].monomials(rule.points)
            g = np.asarray(bc.dirichlet(rule.points), dtype=float)
            faces.append(((phi * rule.weights[:, None]).T @ g).T)
    nlow = dim_cell(k - 1)
    u = solution.cell_disp[cell].reshape(3, -1)
    interior = (u @ el.rm_perp.mass)[:, :nlow]
    return NcDisplacementDofs(cell, k, tuple(faces), interior)


class NablaProjector:
    """Matrices of ``Pi_nabla`` on one cell for ``l = k + 1``.

    The vector problem decouples by component into scalar problems on the
    non-constant scaled monomials of degree ``k + 1``.
    """

    def __init__(self, mesh, cell, k):
        self.mesh, self.cell, self.k = mesh, cell, k
        g = mesh.cell_geometry[cell]
        self.geom = g
        self.monomials = CellMonomials(k + 1, g.centroid, g.diameter)
        self.low = CellMonomials(k - 1, g.centroid, g.diameter)

    @cached_property
    def _rule(self):
        return cell_rule(self.mesh, self.cell, 2 * self.k + 2)

    @cached_property
    def stiffness(self):
        r = self._rule
        grad = self.monomials.gradient(r.points)[:, 1:, :]
        return np.einsum("q,qai,qbi->ab", r.weights, grad, grad)

    @cached_property
    def _factor(self):
        try:
            return sla.cho_factor(self.stiffness)
        except np.linalg.LinAlgError:
            raise DegenerateCellError("singular gradient Gram matrix", self.cell) from None

    @cached_property
    def interior_operator(self):
        """L[a, b]: coefficients of Laplacian(m_a) on the degree k-1 monomials."""
        r = self._rule
        lap = self.monomials.laplacian(r.points)[:, 1:]
        low = self.low(r.points)
        mass = (low * r.weights[:, None]).T @ low
        proj = (low * r.weights[:, None]).T @ lap
        return np.linalg.solve(mass, proj).T

    @cached_property
    def face_operators(self):
        """Per face: coefficients of ``grad m_a . n_out`` in the face monomials."""
        out = []
        for fid, n in zip(self.geom.faces, self.geom.outward_normals):
            rule = face_rule(self.mesh, fid, 2 * self.k + 2)
            mono = face_monomials(self.mesh, fid, self.k)
            phi = mono(rule.points)
            dn = self.monomials.gradient(rule.points)[:, 1:, :] @ n
            proj = (phi * rule.weights[:, None]).T @ dn
            out.append(np.linalg.solve(face_mass(self.mesh, fid, self.k, mono), proj).T)
        return out

    @cached_property
    def monomial_integrals(self):
        r = self._rule
        return r.weights @ self.monomials(r.points)

    def rhs(self, dofs: NcDisplacementDofs):
        """(3, n_nonconst): ``-int u* . Lap q + int_dE u* . grad q n`` per component."""
        rhs = -dofs.interior_moments @ self.interior_operator.T
        for op, mom in zip(self.face_operators, dofs.face_moments):
            rhs = rhs + mom @ op.T
        return rhs

    def project(self, dofs: NcDisplacementDofs):
        """Coefficients (3 * dim_cell(k+1),) of ``Pi_nabla u*``, grouped by component."""
        x = sla.cho_solve(self._factor, self.rhs(dofs).T).T  # (3, n-1)
        ints = self.monomial_integrals
        const = (dofs.interior_moments[:, 0] - x @ ints[1:]) / ints[0]
        return np.hstack([const[:, None], x]).ravel()

    def evaluate(self, coeffs, points):
        return self.monomials(points) @ np.asarray(coeffs).reshape(3, -1).T


def pi_nabla(mesh, cell, dofs: NcDisplacementDofs):
    return NablaProjector(mesh, cell, dofs.k).project(dofs)


def postprocess(solution):
    """Return ``(projectors, coefficients)`` of ``Pi_nabla u*`` for every cell."""
    projectors, coeffs = [], []
    for c in range(solution.mesh.n_cells):
        pr = NablaProjector(solution.mesh, c, solution.k)
        projectors.append(pr)
        coeffs.append(pr.project(build_ustar_dofs(solution, c)))
    return projectors, coeffs
