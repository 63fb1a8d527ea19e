"""Scaled monomial bases, rigid body motions and the RM-orthogonal complement.

Conventions
-----------
Cell monomials are ``((x - x_E) / h_E) ** alpha`` with ``|alpha| <= k``,
graded by degree and lexicographic (descending x, then y) inside a degree.
Face monomials use the face frame ``(t1, t2)`` centred at ``x_f`` and scaled
by ``h_f``.  A vector polynomial in ``[P_k]^3`` is a coefficient vector of
length ``3 * dim`` grouped by component: all x-component coefficients first,
then y, then z.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .exceptions import DegenerateCellError
from .quadrature import cell_rule, face_rule

MGS_PASSES = 2
MGS_RANK_TOL = 1e-13


def dim_cell(k: int) -> int:
    return (k + 1) * (k + 2) * (k + 3) // 6 if k >= 0 else 0


def dim_face(k: int) -> int:
    return (k + 1) * (k + 2) // 2 if k >= 0 else 0


def dim_rm_perp(k: int) -> int:
    return 3 * dim_cell(k) - 6


@lru_cache(maxsize=None)
def exponents(k: int, dim: int = 3) -> np.ndarray:
    out = []
    for d in range(k + 1):
        if dim == 3:
            for a in range(d, -1, -1):
                for b in range(d - a, -1, -1):
                    out.append((a, b, d - a - b))
        else:
            for a in range(d, -1, -1):
                out.append((a, d - a))
    arr = np.array(out, dtype=np.int64).reshape(-1, dim)
    arr.flags.writeable = False
    return arr


def monomial_index(alpha) -> int:
    """Position of a 3D exponent in the graded ordering."""
    alpha = tuple(int(a) for a in alpha)
    k = sum(alpha)
    for i, e in enumerate(exponents(k)):
        if tuple(e) == alpha:
            return i
    raise KeyError(alpha)


class _Monomials:
    dim = 3

    def __init__(self, degree, center, h):
        self.degree = int(degree)
        self.center = np.asarray(center, dtype=float)
        self.h = float(h)
        self.exponents = exponents(self.degree, self.dim)

    def __len__(self):
        return len(self.exponents)

    def local(self, points):
        raise NotImplementedError

    def derivative(self, points, order):
        """Values of the ``order`` (multi-index) derivative of every monomial.

        Derivatives are taken in the scaled local coordinates and converted to
        physical ones by the chain rule; only valid where the local map is an
        isometry up to ``1/h`` (always true here).
        """
        xi = self.local(points)
        k = self.degree
        powers = np.ones((self.dim, len(xi), k + 1))
        for d in range(self.dim):
            for p in range(1, k + 1):
                powers[d, :, p] = powers[d, :, p - 1] * xi[:, d]
        order = np.asarray(order, dtype=np.int64)
        vals = np.ones((len(xi), len(self.exponents)))
        for d in range(self.dim):
            e = self.exponents[:, d] - order[d]
            coef = np.ones(len(self.exponents))
            for j in range(order[d]):
                coef *= self.exponents[:, d] - j
            ok = e >= 0
            vals[:, ok] *= coef[ok] * powers[d][:, e[ok]]
            vals[:, ~ok] = 0.0
        return vals / self.h ** order.sum()

    def __call__(self, points):
        return self.derivative(points, (0,) * self.dim)


class CellMonomials(_Monomials):
    def local(self, points):
        return (np.atleast_2d(points) - self.center) / self.h

    def gradient(self, points):
        """(n, nb, 3) physical gradients."""
        return np.stack(
            [self.derivative(points, o) for o in np.eye(3, dtype=np.int64)], axis=-1
        )

    def laplacian(self, points):
        return sum(self.derivative(points, 2 * o) for o in np.eye(3, dtype=np.int64))


class FaceMonomials(_Monomials):
    dim = 2

    def __init__(self, degree, center, h, t1, t2):
        super().__init__(degree, center, h)
        self.frame = np.vstack([t1, t2])

    def local(self, points):
        return (np.atleast_2d(points) - self.center) @ self.frame.T / self.h


def face_monomials(mesh, face, k) -> FaceMonomials:
    fg = mesh.face_geometry
    return FaceMonomials(k, fg.centroid[face], fg.diameter[face], fg.t1[face], fg.t2[face])


def cell_monomials(mesh, cell, k) -> CellMonomials:
    g = mesh.cell_geometry[cell]
    return CellMonomials(k, g.centroid, g.diameter)


# ----------------------------------------------------------------------
# vector-valued helpers


def vector_values(scalar):
    """(n, nb) scalar basis values -> (n, 3 nb, 3) vector basis values."""
    n, nb = scalar.shape
    out = np.zeros((n, 3, nb, 3))
    for c in range(3):
        out[:, c, :, c] = scalar
    return out.reshape(n, 3 * nb, 3)


def vector_gradients(scalar_grad):
    """(n, nb, 3) scalar gradients -> (n, 3 nb, 3, 3) with G[..., c, j] = d_j v_c."""
    n, nb, _ = scalar_grad.shape
    out = np.zeros((n, 3, nb, 3, 3))
    for c in range(3):
        out[:, c, :, c, :] = scalar_grad
    return out.reshape(n, 3 * nb, 3, 3)


def weighted_inner(w, X, Y):
    """``sum_q w_q X[q, i, ...] . Y[q, j, ...]`` as an (i, j) matrix."""
    nq = len(w)
    Xw = (X * w.reshape((nq,) + (1,) * (X.ndim - 1))).reshape(nq, X.shape[1], -1)
    Yf = Y.reshape(nq, Y.shape[1], -1)
    return np.swapaxes(Xw, 0, 1).reshape(X.shape[1], -1) @ np.swapaxes(Yf, 0, 1).reshape(
        Y.shape[1], -1
    ).T


def vector_mass(scalar_mass):
    return np.kron(np.eye(3), scalar_mass)


def rigid_motion_coefficients(alpha, omega, h, k):
    """Coefficients of ``alpha + omega x (x - x_E)`` in ``[P_k]^3`` (k >= 1).

    ``alpha`` and ``omega`` may be (3,) or (3, m); the result is (3 nk,) or
    (3 nk, m).
    """
    alpha = np.asarray(alpha, dtype=float)
    omega = np.asarray(omega, dtype=float)
    nk = dim_cell(k)
    out = np.zeros((3, nk) + alpha.shape[1:])
    ix, iy, iz = 1, 2, 3  # positions of xi_x, xi_y, xi_z
    out[:, 0] = alpha
    # omega x xi = (w1 z - w2 y, w2 x - w0 z, w0 y - w1 x)
    out[0, iz] += h * omega[1]
    out[0, iy] -= h * omega[2]
    out[1, ix] += h * omega[2]
    out[1, iz] -= h * omega[0]
    out[2, iy] += h * omega[0]
    out[2, ix] -= h * omega[1]
    return out.reshape((3 * nk,) + alpha.shape[1:])


def raw_rigid_motions(k):
    """(3 nk, 6): translations e_c, then rotations e_a x xi (unit scale)."""
    eye = np.eye(3)
    trans = rigid_motion_coefficients(eye, np.zeros((3, 3)), 1.0, k)
    rot = rigid_motion_coefficients(np.zeros((3, 3)), eye, 1.0, k)
    return np.hstack([trans, rot])


def initial_basis(k):
    """Independent basis of ``[P_k]^3`` whose first six members are rigid motions.

    Six vector monomials are dropped so that the rest complements RM:
    the three constants and (z-comp, y), (x-comp, z), (y-comp, x).
    """
    nk = dim_cell(k)
    drop = {0, nk + 0, 2 * nk + 0, 2 * nk + 2, 0 * nk + 3, 1 * nk + 1}
    keep = [j for j in range(3 * nk) if j not in drop]
    return np.hstack([raw_rigid_motions(k), np.eye(3 * nk)[:, keep]])


def modified_gram_schmidt(vectors, gram, passes=MGS_PASSES, rank_tol=MGS_RANK_TOL, cell=None):
    """Orthonormalise columns of ``vectors`` in the inner product ``gram``.

    Each vector is swept ``passes`` times against the previously accepted
    ones (re-orthogonalisation) and then normalised.
    """
    n = vectors.shape[1]
    Q = np.zeros_like(vectors, dtype=float)
    for i in range(n):
        v = vectors[:, i].astype(float).copy()
        norm0 = np.sqrt(v @ gram @ v)
        for _ in range(passes):
            for j in range(i):
                v -= (Q[:, j] @ gram @ v) * Q[:, j]
        norm = np.sqrt(max(v @ gram @ v, 0.0))
        if not norm > rank_tol * norm0:
            raise DegenerateCellError(
                f"MGS breakdown at vector {i} (relative norm {norm / norm0:.2e})", cell
            )
        Q[:, i] = v / norm
    return Q


@dataclass(frozen=True)
class OrthoComplementBasis:
    """Orthonormal bases of RM(E) and of its L2 complement in ``[P_k(E)]^3``."""

    k: int
    monomials: CellMonomials
    mass: np.ndarray  # scalar mass matrix of the monomials
    rm: np.ndarray  # (3 nk, 6)
    perp: np.ndarray  # (3 nk, 3 nk - 6)

    @property
    def dim(self):
        return self.perp.shape[1]

    def values(self, points):
        """(n, n_perp, 3) values of the complement basis."""
        vals = vector_values(self.monomials(points))
        return np.moveaxis(np.tensordot(vals, self.perp, axes=(1, 0)), -1, 1)


def cell_mass(mesh, cell, k, monomials=None):
    mono = monomials or cell_monomials(mesh, cell, k)
    rule = cell_rule(mesh, cell, 2 * k)
    phi = mono(rule.points)
    return (phi * rule.weights[:, None]).T @ phi


def build_rm_perp(mesh, cell, k) -> OrthoComplementBasis:
    """Orthonormal basis of RM_k^perp(E) via two-pass MGS on ``[P_k]^3``."""
    mono = cell_monomials(mesh, cell, k)
    mass = cell_mass(mesh, cell, k, mono)
    Q = modified_gram_schmidt(initial_basis(k), vector_mass(mass), cell=cell)
    return OrthoComplementBasis(k, mono, mass, Q[:, :6], Q[:, 6:])


def _solve_spd(M, rhs, cell=None):
    try:
        return sla.cho_solve(sla.cho_factor(M), rhs)
    except np.linalg.LinAlgError:
        raise DegenerateCellError("singular mass matrix", cell) from None


def l2_project_cell(mesh, cell, k, f, quad_degree=None):
    """Coefficients (3 nk,) of the L2 projection of a vector field onto [P_k(E)]^3.

    ``f`` maps (n, 3) points to (n, 3) values.
    """
    mono = cell_monomials(mesh, cell, k)
    rule = cell_rule(mesh, cell, quad_degree if quad_degree is not None else 2 * k + 4)
    phi = mono(rule.points)
    M = (phi * rule.weights[:, None]).T @ phi
    vals = np.asarray(f(rule.points), dtype=float).reshape(len(rule), 3)
    rhs = (phi * rule.weights[:, None]).T @ vals  # (nk, 3)
    return _solve_spd(M, rhs, cell).T.ravel()


def face_mass(mesh, face, k, monomials=None):
    mono = monomials or face_monomials(mesh, face, k)
    rule = face_rule(mesh, face, 2 * k)
    phi = mono(rule.points)
    return (phi * rule.weights[:, None]).T @ phi


def l2_project_face(mesh, face, k, g, quad_degree=None):
    """Coefficients (3 nkf,) of the L2 projection of ``g`` onto [P_k(f)]^3."""
    mono = face_monomials(mesh, face, k)
    rule = face_rule(mesh, face, quad_degree if quad_degree is not None else 2 * k + 4)
    phi = mono(rule.points)
    M = (phi * rule.weights[:, None]).T @ phi
    vals = np.asarray(g(rule.points), dtype=float).reshape(len(rule), 3)
    rhs = (phi * rule.weights[:, None]).T @ vals
    return _solve_spd(M, rhs).T.ravel()


def l2_project_boundary(mesh, cell, k, g, quad_degree=None):
    """Per-face projections of ``g`` on the faces of ``cell`` (cell face order)."""
    return [l2_project_face(mesh, f, k, g, quad_degree) for f in mesh.cells[cell]]


def evaluate_vector(monomials, coeffs, points):
    """Evaluate a ``[P_k]^3`` coefficient vector (grouped by component)."""
    phi = monomials(points)
    return phi @ np.asarray(coeffs).reshape(3, -1).T
