"""Per-cell computations of the mixed virtual element.

Local stress DOF layout (cell face order, then interior)::

    [face 0: 3*dim_face(k) traction moments] ... [face m-1: ...]
    [dim_rm_perp(k) divergence moments]

Traction moments are taken against ``e_c * phi_beta`` (face scaled
monomials, Cartesian component ``c`` outer, monomial inner) with the face's
*stored* normal, so a shared face sees the same numbers from both cells.
Displacements are coefficient vectors in the cell's vector scaled monomials;
the moment DOFs of a displacement are ``mass @ coefficients``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .exceptions import DegenerateCellError, HRVemError
from .material import MaterialLaw, kappa, symmetrize, trace
from .polyspace import (
    OrthoComplementBasis,
    build_rm_perp,
    dim_cell,
    dim_face,
    dim_rm_perp,
    face_monomials,
    rigid_motion_coefficients,
    vector_gradients,
    vector_mass,
    vector_values,
    weighted_inner,
)
from .quadrature import cell_rule, face_rule

STABILIZATIONS = ("boundary", "shape")
GRAM_COND_WARN = 1e12


def n_stress_dofs(n_faces, k):
    return 3 * n_faces * dim_face(k) + dim_rm_perp(k)


def n_displacement_dofs(k):
    return 3 * dim_cell(k)


@dataclass(frozen=True)
class FaceData:
    face: int
    sign: int  # +1 when the stored normal is outward
    normal: np.ndarray  # stored normal
    diameter: float
    rule: object
    monomials: object
    mass: np.ndarray
    traction_basis: np.ndarray  # (nq, 3 nkf, 3): traction of each face DOF


@dataclass(frozen=True)
class TractionSpace:
    """``C eps([P_{k+1}]^3)`` parametrised by the RM-complement of ``[P_{k+1}]^3``."""

    basis: OrthoComplementBasis
    gram: np.ndarray  # int C eps(psi_i) : eps(psi_j)

    @property
    def dim(self):
        return self.gram.shape[0]

    @cached_property
    def condition_number(self):
        return float(np.linalg.cond(self.gram))


class LocalElement:
    """Local spaces, operators and matrices of one polyhedral cell."""

    def __init__(self, mesh, cell, k, law: MaterialLaw, stabilization="boundary", quad_degree=None):
        if k < 1:
            raise ValueError("k must be >= 1")
        if stabilization not in STABILIZATIONS:
            raise ValueError(f"stabilization must be one of {STABILIZATIONS}")
        self.mesh = mesh
        self.cell = cell
        self.k = k
        self.law = law
        self.stabilization = stabilization
        self.quad_degree = quad_degree if quad_degree is not None else 2 * k + 2
        self.geom = mesh.cell_geometry[cell]
        self.n_faces = self.geom.n_faces
        self.n_face_dofs = 3 * dim_face(k)
        self.n_div_dofs = dim_rm_perp(k)
        self.n_dofs = n_stress_dofs(self.n_faces, k)
        self.n_disp = n_displacement_dofs(k)

    # ------------------------------------------------------------------
    # layout
    def face_slice(self, local_face):
        n = self.n_face_dofs
        return slice(local_face * n, (local_face + 1) * n)

    @property
    def div_slice(self):
        return slice(self.n_faces * self.n_face_dofs, self.n_dofs)

    # ------------------------------------------------------------------
    # bases and rules
    @cached_property
    def rm_perp(self) -> OrthoComplementBasis:
        return build_rm_perp(self.mesh, self.cell, self.k)

    @property
    def monomials(self):
        return self.rm_perp.monomials

    @cached_property
    def rule(self):
        return cell_rule(self.mesh, self.cell, self.quad_degree)

    @cached_property
    def faces(self):
        fg = self.mesh.face_geometry
        out = []
        for fid, s in zip(self.geom.faces, self.geom.signs):
            rule = face_rule(self.mesh, fid, self.quad_degree)
            mono = face_monomials(self.mesh, fid, self.k)
            phi = mono(rule.points)
            mass = (phi * rule.weights[:, None]).T @ phi
            dual = phi @ np.linalg.inv(mass)
            out.append(
                FaceData(
                    int(fid), int(s), fg.normal[fid], float(fg.diameter[fid]),
                    rule, mono, mass, vector_values(dual),
                )
            )
        return tuple(out)

    @cached_property
    def displacement_mass(self):
        return vector_mass(self.rm_perp.mass)

    # ------------------------------------------------------------------
    # divergence reconstruction
    @cached_property
    def omega_matrix(self):
        """M[a, b] = int (x - x_E) x (e_b x (x - x_E)) . e_a."""
        y = self.rule.points - self.geom.centroid
        w = self.rule.weights
        r2 = np.einsum("qi,qi->q", y, y)
        return np.einsum("q,ab->ab", w * r2, np.eye(3)) - np.einsum("q,qa,qb->ab", w, y, y)

    @cached_property
    def divergence_matrix(self):
        """(3 nk, n_dofs): DOFs -> coefficients of div(tau) in [P_k(E)]^3."""
        g = self.geom
        nd = self.n_dofs
        alpha = np.zeros((3, nd))
        rhs = np.zeros((3, nd))
        for j, fd in enumerate(self.faces):
            sl = self.face_slice(j)
            w = fd.rule.weights
            tb = fd.sign * fd.traction_basis  # outward traction
            alpha[:, sl] = np.einsum("q,qdc->cd", w, tb) / g.volume
            y = fd.rule.points - g.centroid
            rhs[:, sl] = np.einsum("q,qdc->cd", w, np.cross(y[:, None, :], tb))
        try:
            omega = sla.cho_solve(sla.cho_factor(self.omega_matrix), rhs)
        except np.linalg.LinAlgError:
            raise DegenerateCellError("singular rotation system (flat cell)", self.cell) from None
        div = rigid_motion_coefficients(alpha, omega, g.diameter, self.k)
        div[:, self.div_slice] = self.rm_perp.perp
        return div

    def reconstruct_divergence(self, dofs):
        return self.divergence_matrix @ np.asarray(dofs, dtype=float)

    def divergence(self, dofs, points):
        coeffs = self.reconstruct_divergence(dofs).reshape(3, -1)
        return self.monomials(points) @ coeffs.T

    def traction(self, dofs, local_face, points=None):
        """Traction (stored normal) of a DOF vector on a local face, (nq, 3)."""
        fd = self.faces[local_face]
        d = np.asarray(dofs, dtype=float)[self.face_slice(local_face)]
        if points is None:
            return np.einsum("qdc,d->qc", fd.traction_basis, d)
        phi = fd.monomials(points) @ np.linalg.inv(fd.mass)
        return phi @ d.reshape(3, -1).T

    # ------------------------------------------------------------------
    # projection onto T_k(E)
    @cached_property
    def traction_space(self) -> TractionSpace:
        basis = build_rm_perp(self.mesh, self.cell, self.k + 1)
        eps = self._psi_strain(self.rule.points, basis)
        w = self.rule.weights
        tr = trace(eps)
        K = 2 * self.law.mu * weighted_inner(w, eps, eps) + self.law.lam * weighted_inner(w, tr, tr)
        return TractionSpace(basis, 0.5 * (K + K.T))

    @staticmethod
    def _psi_strain(points, basis):
        grads = vector_gradients(basis.monomials.gradient(points))
        return symmetrize(np.moveaxis(np.tensordot(grads, basis.perp, axes=(1, 0)), -1, 1))

    def _psi_values(self, points):
        return self.traction_space.basis.values(points)

    @cached_property
    def _gram_factor(self):
        ts = self.traction_space
        cond = ts.condition_number
        if cond > GRAM_COND_WARN:
            warnings.warn(f"cell {self.cell}: traction Gram condition number {cond:.2e}")
        try:
            return sla.cho_factor(ts.gram)
        except np.linalg.LinAlgError:
            raise DegenerateCellError("singular traction Gram matrix", self.cell) from None

    @cached_property
    def projection_rhs(self):
        """R[i, :] = int tau : eps(psi_i) via integration by parts."""
        w = self.rule.weights
        psi = self._psi_values(self.rule.points)
        v = vector_values(self.monomials(self.rule.points))
        Q = weighted_inner(w, psi, v)
        R = -Q @ self.divergence_matrix
        for j, fd in enumerate(self.faces):
            psi_f = self._psi_values(fd.rule.points)
            R[:, self.face_slice(j)] += fd.sign * weighted_inner(
                fd.rule.weights, psi_f, fd.traction_basis
            )
        return R

    @cached_property
    def projection_matrix(self):
        """(n_psi, n_dofs): DOFs -> coefficients of p_{k+1} in the psi basis."""
        return sla.cho_solve(self._gram_factor, self.projection_rhs)

    def project_stress(self, dofs):
        return self.projection_matrix @ np.asarray(dofs, dtype=float)

    def projected_stress(self, dofs, points):
        """Values (n, 3, 3) of ``Pi tau = C eps(p_{k+1})`` at ``points``."""
        p = self.project_stress(dofs)
        eps = np.einsum("qiab,i->qab", self._psi_strain(points, self.traction_space.basis), p)
        return self.law.apply_C(eps)

    # ------------------------------------------------------------------
    # local matrices
    @cached_property
    def stabilization_matrix(self):
        g = self.geom
        kap = kappa(self.law)
        P = self.projection_matrix
        S = np.zeros((self.n_dofs, self.n_dofs))
        for j, fd in enumerate(self.faces):
            eps = self._psi_strain(fd.rule.points, self.traction_space.basis)
            sig = self.law.apply_C(eps)  # (nq, n_psi, 3, 3)
            proj_tr = np.moveaxis(np.tensordot(sig @ fd.normal, P, axes=(1, 0)), -1, 1)
            diff = -proj_tr
            diff[:, self.face_slice(j), :] += fd.traction_basis
            if self.stabilization == "boundary":
                scale = kap * g.diameter
            else:
                scale = kap * g.volume / fd.diameter
            S += scale * weighted_inner(fd.rule.weights, diff, diff)
        return 0.5 * (S + S.T)

    @cached_property
    def consistency_matrix(self):
        P = self.projection_matrix
        return P.T @ self.traction_space.gram @ P

    @cached_property
    def a_matrix(self):
        A = self.consistency_matrix + self.stabilization_matrix
        asym = np.abs(A - A.T).max()
        if asym > 1e-10 * max(np.abs(A).max(), 1e-300):
            raise HRVemError(f"cell {self.cell}: local stress matrix not symmetric ({asym:.2e})")
        return 0.5 * (A + A.T)

    @cached_property
    def b_matrix(self):
        """(3 nk, n_dofs): B[i, j] = int div(tau_j) . v_i (v_i vector monomials)."""
        return self.displacement_mass @ self.divergence_matrix

    def load(self, f, quad_degree=None):
        """Moments ``int f . v_i`` against the vector monomials."""
        rule = cell_rule(self.mesh, self.cell, quad_degree or 2 * self.k + 4)
        phi = self.monomials(rule.points)
        vals = np.asarray(f(rule.points), dtype=float).reshape(len(rule), 3)
        return ((phi * rule.weights[:, None]).T @ vals).T.ravel()

    def dirichlet_rhs(self, local_face, g, quad_degree=None):
        """Face block of ``int_f (tau n_out) . g`` for every face DOF of tau."""
        fd = self.faces[local_face]
        rule = face_rule(self.mesh, fd.face, quad_degree or 2 * self.k + 4)
        phi = fd.monomials(rule.points)
        vals = np.asarray(g(rule.points), dtype=float).reshape(len(rule), 3)
        moments = (phi * rule.weights[:, None]).T @ vals  # (nkf, 3)
        coeffs = np.linalg.solve(fd.mass, moments)
        return fd.sign * coeffs.T.ravel()

    # ------------------------------------------------------------------
    # interpolation
    def interpolate_stress(self, stress, div_stress, quad_degree=None):
        """DOFs of the interpolant of an analytic stress field.

        ``stress`` maps (n, 3) points to (n, 3, 3); ``div_stress`` to (n, 3).
        """
        qd = quad_degree or 2 * self.k + 4
        dofs = np.zeros(self.n_dofs)
        for j, fd in enumerate(self.faces):
            rule = face_rule(self.mesh, fd.face, qd)
            t = np.asarray(stress(rule.points)) @ fd.normal
            phi = fd.monomials(rule.points)
            dofs[self.face_slice(j)] = ((phi * rule.weights[:, None]).T @ t).T.ravel()
        rule = cell_rule(self.mesh, self.cell, qd)
        dv = np.asarray(div_stress(rule.points)).reshape(len(rule), 3)
        basis = self.rm_perp.values(rule.points)
        dofs[self.div_slice] = np.einsum("q,qic,qc->i", rule.weights, basis, dv)
        return dofs


def reconstruct_divergence(element: LocalElement, dofs):
    return element.reconstruct_divergence(dofs)


def project_stress(element: LocalElement, dofs):
    return element.project_stress(dofs)


def local_a_matrix(element: LocalElement):
    return element.a_matrix


def local_b_matrix(element: LocalElement):
    return element.b_matrix


def local_load(element: LocalElement, f, quad_degree=None):
    return element.load(f, quad_degree)


def interpolate_stress(element: LocalElement, stress, div_stress, quad_degree=None):
    return element.interpolate_stress(stress, div_stress, quad_degree)
