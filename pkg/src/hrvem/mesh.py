"""Polyhedral meshes: storage, validation, geometry, generators and text I/O.

A mesh is a list of vertices, a list of planar polygonal faces (vertex loops)
and a list of cells, each cell being a list of face indices with an
orientation sign.  After construction every face carries a *stored normal*:
the right-hand normal of its vertex loop.  Loops are re-oriented so that the
stored normal points from the lower-indexed incident cell to the higher one,
and outward on the boundary.  A sign of ``+1`` in ``cell_signs`` therefore
means "the stored normal is outward for this cell".
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .exceptions import (
    DegenerateCellError,
    MeshGeometryError,
    MeshParseError,
    MeshTopologyError,
)

TOL_PLANAR = 1e-9
TOL_GEOM = 1e-10


@dataclass(frozen=True)
class FaceGeometry:
    """Geometric data of all faces, indexed by global face id."""

    centroid: np.ndarray  # (nf, 3)
    area: np.ndarray  # (nf,)
    diameter: np.ndarray  # (nf,)
    normal: np.ndarray  # (nf, 3) stored normal
    t1: np.ndarray  # (nf, 3)
    t2: np.ndarray  # (nf, 3)
    min_edge: np.ndarray  # (nf,)


@dataclass(frozen=True)
class CellGeometry:
    index: int
    centroid: np.ndarray
    volume: float
    diameter: float
    faces: np.ndarray
    signs: np.ndarray
    outward_normals: np.ndarray  # (n_faces_of_cell, 3)

    @property
    def n_faces(self) -> int:
        return len(self.faces)


def face_frame(normal):
    """In-plane orthonormal frame (t1, t2) of a face with unit ``normal``.

    ``t1`` is the projection of the coordinate axis least aligned with the
    normal; ``t2 = n x t1``.
    """
    normal = np.asarray(normal, dtype=float)
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(normal)))] = 1.0
    t1 = axis - normal * (axis @ normal)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(normal, t1)
    return t1, t2


def _polygon_area_vector(pts):
    center = pts.mean(axis=0)
    nxt = np.roll(pts, -1, axis=0)
    tri = 0.5 * np.cross(pts - center, nxt - center)
    return tri, center, nxt


def _max_pairwise_distance(pts):
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).max())


@dataclass(frozen=True)
class PolyMesh:
    vertices: np.ndarray
    faces: tuple
    cells: tuple
    cell_signs: tuple
    face_cells: np.ndarray = field(repr=False)  # (nf, 2), -1 if none

    # ------------------------------------------------------------------
    # construction
    @classmethod
    def build(cls, vertices, faces, cells, signs, check=True) -> "PolyMesh":
        """Validate raw connectivity and apply the global normal convention.

        Parameters
        ----------
        vertices : array_like (nv, 3)
        faces : sequence of vertex-index loops
        cells : sequence of face-index sequences
        signs : sequence of +/-1 sequences, aligned with ``cells``; +1 when
            the right-hand normal of the face loop points out of the cell.
        """
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshParseError("vertices must be an (n, 3) array")
        faces = [np.asarray(f, dtype=np.int64) for f in faces]
        cells = [np.asarray(c, dtype=np.int64) for c in cells]
        signs = [np.asarray(s, dtype=np.int64).copy() for s in signs]
        nv, nf = len(vertices), len(faces)
        if not cells:
            raise MeshTopologyError("mesh has no cells")
        if len(cells) != len(signs):
            raise MeshParseError("cells and signs differ in length")
        for fid, loop in enumerate(faces):
            if len(loop) < 3:
                raise MeshTopologyError(f"face {fid} has fewer than 3 vertices")
            if loop.min() < 0 or loop.max() >= nv:
                raise MeshTopologyError(f"face {fid} references a missing vertex")
            if len(set(loop.tolist())) != len(loop):
                raise MeshTopologyError(f"face {fid} repeats a vertex")

        incidence = [[] for _ in range(nf)]
        for cid, (cf, cs) in enumerate(zip(cells, signs)):
            if len(cf) != len(cs):
                raise MeshParseError(f"cell {cid}: faces and signs differ in length")
            if len(cf) < 4:
                raise MeshTopologyError(f"cell {cid} has fewer than 4 faces")
            if cf.min() < 0 or cf.max() >= nf:
                raise MeshTopologyError(f"cell {cid} references a missing face")
            if len(set(cf.tolist())) != len(cf):
                raise MeshTopologyError(f"cell {cid} lists a face twice")
            if not np.all(np.abs(cs) == 1):
                raise MeshParseError(f"cell {cid}: orientation signs must be +/-1")
            for local, fid in enumerate(cf):
                incidence[fid].append((cid, local))

        face_cells = -np.ones((nf, 2), dtype=np.int64)
        for fid, inc in enumerate(incidence):
            if len(inc) == 0:
                raise MeshTopologyError(f"face {fid} belongs to no cell")
            if len(inc) > 2:
                raise MeshTopologyError(
                    f"face {fid} is shared by {len(inc)} cells (non-manifold)"
                )
            inc.sort()
            (c0, l0) = inc[0]
            if signs[c0][l0] < 0:
                faces[fid] = faces[fid][::-1].copy()
                for c, l in inc:
                    signs[c][l] = -signs[c][l]
            face_cells[fid, 0] = c0
            if len(inc) == 2:
                c1, l1 = inc[1]
                if signs[c1][l1] != -1:
                    raise MeshTopologyError(
                        f"face {fid}: cells {c0} and {c1} claim the same orientation"
                    )
                face_cells[fid, 1] = c1

        mesh = cls(
            vertices=vertices,
            faces=tuple(faces),
            cells=tuple(cells),
            cell_signs=tuple(signs),
            face_cells=face_cells,
        )
        if check:
            mesh.validate_geometry()
        return mesh

    @classmethod
    def from_polyhedra(cls, vertices, cell_loops) -> "PolyMesh":
        """Build a mesh from cells given as lists of outward vertex loops.

        Shared faces are detected by their vertex sets.
        """
        vertices = np.asarray(vertices, dtype=float)
        faces, cells, signs = [], [], []
        lookup = {}
        for loops in cell_loops:
            cf, cs = [], []
            for loop in loops:
                key = frozenset(int(v) for v in loop)
                if key in lookup:
                    fid = lookup[key]
                    stored = vertices[faces[fid]]
                    mine = vertices[np.asarray(loop)]
                    same = _polygon_area_vector(stored)[0].sum(0) @ _polygon_area_vector(
                        mine
                    )[0].sum(0)
                    cf.append(fid)
                    cs.append(1 if same > 0 else -1)
                else:
                    fid = len(faces)
                    lookup[key] = fid
                    faces.append(list(loop))
                    cf.append(fid)
                    cs.append(1)
            cells.append(cf)
            signs.append(cs)
        return cls.build(vertices, faces, cells, signs)

    # ------------------------------------------------------------------
    # sizes and topology
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @cached_property
    def is_boundary_face(self) -> np.ndarray:
        return self.face_cells[:, 1] < 0

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.is_boundary_face)

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(~self.is_boundary_face)

    # ------------------------------------------------------------------
    # geometry
    @cached_property
    def face_geometry(self) -> FaceGeometry:
        nf = self.n_faces
        centroid = np.empty((nf, 3))
        area = np.empty(nf)
        diameter = np.empty(nf)
        normal = np.empty((nf, 3))
        t1 = np.empty((nf, 3))
        t2 = np.empty((nf, 3))
        min_edge = np.empty(nf)
        for fid, loop in enumerate(self.faces):
            pts = self.vertices[loop]
            tri, center, nxt = _polygon_area_vector(pts)
            avec = tri.sum(axis=0)
            a = np.linalg.norm(avec)
            hf = _max_pairwise_distance(pts)
            if not a > TOL_GEOM * hf**2:
                raise MeshGeometryError(f"face {fid} has zero area")
            n = avec / a
            tri_area = tri @ n
            tri_centroid = (pts + nxt + center) / 3.0
            c = (tri_area[:, None] * tri_centroid).sum(0) / tri_area.sum()
            centroid[fid], area[fid], diameter[fid], normal[fid] = c, a, hf, n
            t1[fid], t2[fid] = face_frame(n)
            min_edge[fid] = np.linalg.norm(nxt - pts, axis=1).min()
        return FaceGeometry(centroid, area, diameter, normal, t1, t2, min_edge)

    @cached_property
    def cell_geometry(self) -> tuple:
        """Per-cell :class:`CellGeometry` (divergence-theorem volumes)."""
        fg = self.face_geometry
        out = []
        for cid, (cf, cs) in enumerate(zip(self.cells, self.cell_signs)):
            nout = cs[:, None] * fg.normal[cf]
            volume = float(
                np.sum(np.einsum("ij,ij->i", fg.centroid[cf], nout) * fg.area[cf]) / 3.0
            )
            vids = np.unique(np.concatenate([self.faces[f] for f in cf]))
            pts = self.vertices[vids]
            h = _max_pairwise_distance(pts)
            if not volume > TOL_GEOM * h**3:
                raise DegenerateCellError(f"non-positive volume {volume:.3e}", cid)
            centroid = self._tet_centroid(cf, cs, pts.mean(axis=0))
            out.append(CellGeometry(cid, centroid, volume, h, cf, cs, nout))
        return tuple(out)

    def _tet_centroid(self, cf, cs, apex):
        total = 0.0
        moment = np.zeros(3)
        for fid, s in zip(cf, cs):
            pts = self.vertices[self.faces[fid]]
            nxt = np.roll(pts, -1, axis=0)
            base = self.face_geometry.centroid[fid]
            vols = s * np.einsum(
                "ij,ij->i", np.cross(pts - apex, nxt - apex), (base - apex)[None, :]
            ) / 6.0
            cents = (apex + base + pts + nxt) / 4.0
            total += vols.sum()
            moment += (vols[:, None] * cents).sum(0)
        return moment / total

    def signed_tet_volume(self, cell, apex) -> float:
        """Cell volume as a sum of signed tetrahedra coned from ``apex``."""
        total = 0.0
        for fid, s in zip(self.cells[cell], self.cell_signs[cell]):
            pts = self.vertices[self.faces[fid]]
            nxt = np.roll(pts, -1, axis=0)
            base = self.face_geometry.centroid[fid]
            total += s * np.einsum(
                "ij,ij->i", np.cross(pts - apex, nxt - apex), (base - apex)[None, :]
            ).sum() / 6.0
        return float(total)

    def validate_geometry(self):
        fg = self.face_geometry
        for fid, loop in enumerate(self.faces):
            dev = np.abs((self.vertices[loop] - fg.centroid[fid]) @ fg.normal[fid])
            if dev.max() > TOL_PLANAR * fg.diameter[fid]:
                raise MeshGeometryError(
                    f"face {fid} is not planar (deviation {dev.max():.3e})"
                )
        for g in self.cell_geometry:
            closure = (g.outward_normals * fg.area[g.faces][:, None]).sum(0)
            if np.linalg.norm(closure) > TOL_GEOM * g.diameter**2:
                raise MeshGeometryError(
                    f"cell {g.index} is not watertight (|sum a n| = "
                    f"{np.linalg.norm(closure):.3e})"
                )

    def cell_vertices(self, cell) -> np.ndarray:
        vids = np.unique(np.concatenate([self.faces[f] for f in self.cells[cell]]))
        return self.vertices[vids]


def compute_geometry(mesh: PolyMesh):
    return mesh.cell_geometry


def mesh_size(mesh: PolyMesh) -> float:
    """Average cell diameter ``(1/N_E) sum h_E``."""
    if mesh.n_cells == 0:
        raise MeshGeometryError("empty mesh")
    return float(np.mean([g.diameter for g in mesh.cell_geometry]))


def quality_report(mesh: PolyMesh) -> dict:
    """Shape-regularity proxies; no thresholds are applied.

    ``cell_radius_ratio`` is the smallest distance from the centroid to a face
    plane divided by ``h_E`` (an inscribed-ball proxy for convex cells),
    ``face_radius_ratio`` the analogous quantity for faces and
    ``edge_ratio`` the smallest ``h_e / h_E``.
    """
    fg = mesh.face_geometry
    cell_ratio, face_ratio, edge_ratio = [], [], []
    for g in mesh.cell_geometry:
        d = np.abs(np.einsum("ij,ij->i", fg.centroid[g.faces] - g.centroid, fg.normal[g.faces]))
        cell_ratio.append(d.min() / g.diameter)
        edge_ratio.append(fg.min_edge[g.faces].min() / g.diameter)
    for fid, loop in enumerate(mesh.faces):
        pts = mesh.vertices[loop]
        nxt = np.roll(pts, -1, axis=0)
        e = nxt - pts
        rel = fg.centroid[fid] - pts
        dist = np.linalg.norm(np.cross(e, rel), axis=1) / np.linalg.norm(e, axis=1)
        face_ratio.append(dist.min() / fg.diameter[fid])
    hs = np.array([g.diameter for g in mesh.cell_geometry])
    return {
        "n_cells": mesh.n_cells,
        "n_faces": mesh.n_faces,
        "n_boundary_faces": int(mesh.is_boundary_face.sum()),
        "n_vertices": mesh.n_vertices,
        "h": float(hs.mean()),
        "h_max": float(hs.max()),
        "h_min": float(hs.min()),
        "cell_radius_ratio_min": float(min(cell_ratio)),
        "face_radius_ratio_min": float(min(face_ratio)),
        "edge_ratio_min": float(min(edge_ratio)),
    }


# ----------------------------------------------------------------------
# generators on the unit cube


def _grid_vertices(n):
    t = np.linspace(0.0, 1.0, n + 1)
    z, y, x = np.meshgrid(t, t, t, indexing="ij")
    return np.column_stack([x.ravel(), y.ravel(), z.ravel()])


def _vid(n, i, j, l):
    return i + (n + 1) * (j + (n + 1) * l)


def _outward(vertices, loop, center):
    pts = vertices[list(loop)]
    avec = _polygon_area_vector(pts)[0].sum(0)
    return list(loop) if avec @ (pts.mean(0) - center) > 0 else list(loop)[::-1]


def generate_structured_cubes(n: int) -> PolyMesh:
    """``n**3`` axis-aligned cubes partitioning the unit cube."""
    if n < 1:
        raise ValueError("n must be at least 1")
    verts = _grid_vertices(n)
    cells = []
    for l, j, i in itertools.product(range(n), repeat=3):
        v = {
            (a, b, c): _vid(n, i + a, j + b, l + c)
            for a, b, c in itertools.product((0, 1), repeat=3)
        }
        loops = [
            [v[0, 0, 0], v[0, 1, 0], v[0, 1, 1], v[0, 0, 1]],
            [v[1, 0, 0], v[1, 0, 1], v[1, 1, 1], v[1, 1, 0]],
            [v[0, 0, 0], v[0, 0, 1], v[1, 0, 1], v[1, 0, 0]],
            [v[0, 1, 0], v[1, 1, 0], v[1, 1, 1], v[0, 1, 1]],
            [v[0, 0, 0], v[1, 0, 0], v[1, 1, 0], v[0, 1, 0]],
            [v[0, 0, 1], v[0, 1, 1], v[1, 1, 1], v[1, 0, 1]],
        ]
        center = verts[list(v.values())].mean(0)
        cells.append([_outward(verts, loop, center) for loop in loops])
    return PolyMesh.from_polyhedra(verts, cells)


def generate_structured_tetrahedra(n: int) -> PolyMesh:
    """Kuhn subdivision: each of the ``n**3`` cubes split into 6 tetrahedra."""
    if n < 1:
        raise ValueError("n must be at least 1")
    verts = _grid_vertices(n)
    cells = []
    for l, j, i in itertools.product(range(n), repeat=3):
        for perm in itertools.permutations(range(3)):
            idx = np.array([i, j, l])
            tet = [_vid(n, *idx)]
            for axis in perm:
                idx = idx.copy()
                idx[axis] += 1
                tet.append(_vid(n, *idx))
            center = verts[tet].mean(0)
            loops = [
                _outward(verts, [tet[a] for a in face], center)
                for face in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3))
            ]
            cells.append(loops)
    return PolyMesh.from_polyhedra(verts, cells)


def generate_structured_prisms(n: int) -> PolyMesh:
    """Each cube split along an xy-diagonal into two triangular prisms."""
    if n < 1:
        raise ValueError("n must be at least 1")
    verts = _grid_vertices(n)
    cells = []
    for l, j, i in itertools.product(range(n), repeat=3):
        for tri in (((0, 0), (1, 0), (1, 1)), ((0, 0), (1, 1), (0, 1))):
            bot = [_vid(n, i + a, j + b, l) for a, b in tri]
            top = [_vid(n, i + a, j + b, l + 1) for a, b in tri]
            center = verts[bot + top].mean(0)
            loops = [_outward(verts, bot, center), _outward(verts, top, center)]
            for s in range(3):
                quad = [bot[s], bot[(s + 1) % 3], top[(s + 1) % 3], top[s]]
                loops.append(_outward(verts, quad, center))
            cells.append(loops)
    return PolyMesh.from_polyhedra(verts, cells)


GENERATORS = {
    "cube": generate_structured_cubes,
    "tetra": generate_structured_tetrahedra,
    "prism": generate_structured_prisms,
}


def generate(family: str, n: int) -> PolyMesh:
    try:
        return GENERATORS[family](n)
    except KeyError:
        raise ValueError(
            f"unknown mesh family {family!r}; choose from {sorted(GENERATORS)}"
        ) from None


# ----------------------------------------------------------------------
# text format
#
#   vertices / <count> / x y z ...
#   faces    / <count> / m v1 .. vm ...
#   cells    / <count> / m +-f1 .. +-fm ...
#
# Indices are 0-based; a leading '-' on a face index (including "-0") flips
# the orientation.  '#' starts a comment.


def _tokens(text):
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0]
        for tok in line.split():
            yield lineno, tok


def read_mesh(path) -> PolyMesh:
    text = Path(path).read_text()
    toks = _tokens(text)

    def nxt(what):
        try:
            return next(toks)
        except StopIteration:
            raise MeshParseError(f"unexpected end of file while reading {what}") from None

    def integer(what):
        lineno, tok = nxt(what)
        try:
            return int(tok)
        except ValueError:
            raise MeshParseError(f"line {lineno}: expected integer for {what}, got {tok!r}") from None

    def section(name):
        lineno, tok = nxt(f"section {name!r}")
        if tok.lower() != name:
            raise MeshParseError(f"line {lineno}: expected section {name!r}, got {tok!r}")
        count = integer(f"{name} count")
        if count < 0:
            raise MeshParseError(f"negative {name} count")
        return count

    nv = section("vertices")
    verts = np.empty((nv, 3))
    for i in range(nv):
        for d in range(3):
            lineno, tok = nxt("vertex coordinate")
            try:
                verts[i, d] = float(tok)
            except ValueError:
                raise MeshParseError(f"line {lineno}: bad coordinate {tok!r}") from None
    nf = section("faces")
    faces = []
    for _ in range(nf):
        m = integer("face size")
        faces.append([integer("face vertex") for _ in range(m)])
    nc = section("cells")
    cells, signs = [], []
    for _ in range(nc):
        m = integer("cell size")
        cf, cs = [], []
        for _ in range(m):
            lineno, tok = nxt("cell face")
            try:
                idx = int(tok.lstrip("+-"))
            except ValueError:
                raise MeshParseError(f"line {lineno}: bad face reference {tok!r}") from None
            cf.append(idx)
            cs.append(-1 if tok.startswith("-") else 1)
        cells.append(cf)
        signs.append(cs)
    extra = next(toks, None)
    if extra is not None:
        raise MeshParseError(f"line {extra[0]}: trailing content {extra[1]!r}")
    return PolyMesh.build(verts, faces, cells, signs)


def import_mesh(path, format: str = "poly") -> PolyMesh:
    if format != "poly":
        raise MeshParseError(f"unsupported mesh format {format!r}")
    return read_mesh(path)


def write_mesh(mesh: PolyMesh, path):
    lines = ["# polyhedral mesh", "vertices", str(mesh.n_vertices)]
    lines += [" ".join(repr(float(c)) for c in v) for v in mesh.vertices]
    lines += ["faces", str(mesh.n_faces)]
    lines += [" ".join(str(x) for x in [len(f), *f.tolist()]) for f in mesh.faces]
    lines += ["cells", str(mesh.n_cells)]
    for cf, cs in zip(mesh.cells, mesh.cell_signs):
        refs = [("-" if s < 0 else "") + str(f) for f, s in zip(cf.tolist(), cs.tolist())]
        lines.append(" ".join([str(len(cf)), *refs]))
    Path(path).write_text("\n".join(lines) + "\n")
