"""Quadrature on polygonal faces and polyhedral cells.

Faces are fan-triangulated from their centroid, cells are coned from their
centroid over those fans; each simplex carries a collapsed Gauss-Jacobi
(Stroud conical product) rule, so every rule has positive weights and is
exact up to the requested degree.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .exceptions import MeshGeometryError


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray  # (n, 3)
    weights: np.ndarray  # (n,)
    exactness_degree: int

    def integrate(self, values):
        """Integrate samples taken at ``points`` (first axis)."""
        return np.tensordot(self.weights, values, axes=(0, 0))

    def __len__(self):
        return len(self.weights)


def _gauss_jacobi01(n, alpha):
    """n-point rule on [0, 1] for the weight (1 - x)**alpha."""
    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def reference_triangle(degree):
    """Rule on the triangle (0,0), (1,0), (0,1); barycentric-free 2D points."""
    n = max(1, (degree + 2) // 2)
    a, wa = _gauss_jacobi01(n, 1.0)
    b, wb = _gauss_jacobi01(n, 0.0)
    A, B = np.meshgrid(a, b, indexing="ij")
    W = np.outer(wa, wb)
    pts = np.column_stack([A.ravel(), (B * (1.0 - A)).ravel()])
    return pts, W.ravel()


@lru_cache(maxsize=None)
def reference_tetrahedron(degree):
    """Rule on the unit simplex (0,0,0), e1, e2, e3."""
    n = max(1, (degree + 2) // 2)
    a, wa = _gauss_jacobi01(n, 2.0)
    b, wb = _gauss_jacobi01(n, 1.0)
    c, wc = _gauss_jacobi01(n, 0.0)
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    W = wa[:, None, None] * wb[None, :, None] * wc[None, None, :]
    x = A
    y = B * (1.0 - A)
    z = C * (1.0 - A) * (1.0 - B)
    return np.column_stack([x.ravel(), y.ravel(), z.ravel()]), W.ravel()


def triangle_rule(a, b, c, degree):
    ref, w = reference_triangle(degree)
    e1, e2 = b - a, c - a
    area = 0.5 * np.linalg.norm(np.cross(e1, e2))
    pts = a + ref[:, :1] * e1 + ref[:, 1:] * e2
    return pts, w * 2.0 * area


def face_rule(mesh, face, degree) -> QuadRule:
    """Rule on polygonal face ``face`` of ``mesh``, exact to ``degree``."""
    fg = mesh.face_geometry
    pts = mesh.vertices[mesh.faces[face]]
    center = fg.centroid[face]
    nxt = np.roll(pts, -1, axis=0)
    ref, w = reference_triangle(degree)
    areas = 0.5 * (np.cross(pts - center, nxt - center) @ fg.normal[face])
    if np.any(areas <= 1e-14 * fg.diameter[face] ** 2):
        raise MeshGeometryError(f"face {face}: degenerate triangle in centroid fan")
    e1 = pts - center
    e2 = nxt - center
    P = center + ref[None, :, :1] * e1[:, None, :] + ref[None, :, 1:] * e2[:, None, :]
    W = (2.0 * areas)[:, None] * w[None, :]
    return QuadRule(P.reshape(-1, 3), W.ravel(), degree)


def cell_rule(mesh, cell, degree) -> QuadRule:
    """Rule on polyhedral cell ``cell``: centroid cone over face fans."""
    g = mesh.cell_geometry[cell]
    fg = mesh.face_geometry
    ref, w = reference_tetrahedron(degree)
    apex = g.centroid
    all_p, all_w = [], []
    for fid, s in zip(g.faces, g.signs):
        pts = mesh.vertices[mesh.faces[fid]]
        nxt = np.roll(pts, -1, axis=0)
        base = fg.centroid[fid]
        e1 = np.broadcast_to(base - apex, pts.shape)
        e2 = pts - apex
        e3 = nxt - apex
        vol6 = s * np.einsum("ij,ij->i", e1, np.cross(e2, e3))
        if np.any(vol6 <= 1e-14 * g.diameter**3):
            raise MeshGeometryError(
                f"cell {cell}: degenerate or inverted sub-tetrahedron on face {fid} "
                "(cell not star-shaped with respect to its centroid?)"
            )
        P = (
            apex
            + ref[None, :, :1] * e1[:, None, :]
            + ref[None, :, 1:2] * e2[:, None, :]
            + ref[None, :, 2:] * e3[:, None, :]
        )
        all_p.append(P.reshape(-1, 3))
        all_w.append((vol6[:, None] * w[None, :]).ravel())
    return QuadRule(np.concatenate(all_p), np.concatenate(all_w), degree)
