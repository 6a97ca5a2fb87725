"""Polygonal meshes of planar domains.

A mesh is built from a vertex array and a list of counter-clockwise vertex
loops. Faces (edges) are numbered lexicographically by their sorted vertex
pair and carry one global orientation: the direction in which the owner with
the lowest cell id traverses them. The stored normal is outward for that
owner; the other owner sees the opposite sign.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import GeometryError, MeshParseError, TopologyError

__all__ = [
    "Mesh",
    "Patch",
    "generate_cartesian",
    "generate_triangular",
    "read_mesh",
    "write_mesh",
    "neighborhood",
]


def _polygon_geometry(xy):
    """Signed area and centroid of a polygon by the shoelace formula."""
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if area == 0.0:
        return 0.0, xy.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return area, np.array([cx, cy])


def _segments_cross(p1, p2, q1, q2):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def _is_simple(xy):
    m = len(xy)
    if m <= 3:
        return True
    for i in range(m):
        for j in range(i + 1, m):
            if j == i + 1 or (i == 0 and j == m - 1):
                continue
            if _segments_cross(xy[i], xy[(i + 1) % m], xy[j], xy[(j + 1) % m]):
                return False
    return True


class Mesh:
    """Immutable polygonal mesh.

    Parameters
    ----------
    vertices : (NV, 2) array
    cells : sequence of integer sequences
        Vertex loops, counter-clockwise, at least three vertices each.
    check_simple : bool
        Reject self-intersecting cells (quadratic in the loop length).
    """

    def __init__(self, vertices, cells, check_simple=False):
        vertices = np.ascontiguousarray(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise GeometryError("vertices must be an (NV, 2) array")
        loops = []
        for c, loop in enumerate(cells):
            loop = np.asarray(loop, dtype=np.int64)
            if loop.size < 3:
                raise GeometryError(f"cell {c} has fewer than 3 vertices")
            if loop.min() < 0 or loop.max() >= len(vertices):
                raise TopologyError(f"cell {c} references a missing vertex")
            if len(np.unique(loop)) != loop.size:
                raise GeometryError(f"cell {c} repeats a vertex")
            loops.append(loop)
        if not loops:
            raise GeometryError("mesh has no cells")
        self.vertices = vertices
        self.cells = loops
        self.vertices.setflags(write=False)

        nc = len(loops)
        self.cell_measures = np.empty(nc)
        self.cell_centroids = np.empty((nc, 2))
        self.cell_diameters = np.empty(nc)
        for c, loop in enumerate(loops):
            xy = vertices[loop]
            area, cen = _polygon_geometry(xy)
            if not area > 0.0:
                raise GeometryError(f"cell {c} has non-positive measure {area:g}")
            if check_simple and not _is_simple(xy):
                raise GeometryError(f"cell {c} is not a simple polygon")
            self.cell_measures[c] = area
            self.cell_centroids[c] = cen
            d = xy[:, None, :] - xy[None, :, :]
            self.cell_diameters[c] = np.sqrt((d**2).sum(-1).max())
        self._build_faces()

    def _build_faces(self):
        edges = {}
        for c, loop in enumerate(self.cells):
            m = loop.size
            for i in range(m):
                a, b = int(loop[i]), int(loop[(i + 1) % m])
                edges.setdefault((min(a, b), max(a, b)), []).append((c, a, b))
        keys = sorted(edges)
        nf = len(keys)
        index = {key: f for f, key in enumerate(keys)}
        self.faces = np.empty((nf, 2), dtype=np.int64)
        self.face_owners = np.full((nf, 2), -1, dtype=np.int64)
        for f, key in enumerate(keys):
            owners = edges[key]
            if len(owners) > 2:
                raise TopologyError(f"face {key} is shared by {len(owners)} cells")
            owners.sort()
            if len(owners) == 2:
                (c0, a0, _), (c1, a1, _) = owners
                if c0 == c1:
                    raise TopologyError(f"cell {c0} traverses face {key} twice")
                if a0 == a1:
                    raise TopologyError(f"cells {c0} and {c1} have inconsistent orientation")
                self.face_owners[f] = (c0, c1)
            else:
                self.face_owners[f, 0] = owners[0][0]
            self.faces[f] = owners[0][1:]

        self.cell_faces = []
        self.cell_face_signs = []
        for c, loop in enumerate(self.cells):
            m = loop.size
            fs = np.empty(m, dtype=np.int64)
            sg = np.empty(m)
            for i in range(m):
                a, b = int(loop[i]), int(loop[(i + 1) % m])
                f = index[(min(a, b), max(a, b))]
                fs[i] = f
                sg[i] = 1.0 if self.faces[f, 0] == a else -1.0
            self.cell_faces.append(fs)
            self.cell_face_signs.append(sg)

        p0 = self.vertices[self.faces[:, 0]]
        p1 = self.vertices[self.faces[:, 1]]
        d = p1 - p0
        self.face_measures = np.sqrt((d**2).sum(axis=1))
        if np.any(self.face_measures == 0.0):
            raise GeometryError("zero-length face")
        self.face_midpoints = 0.5 * (p0 + p1)
        self.face_tangents = d / self.face_measures[:, None]
        self.face_normals = np.column_stack([self.face_tangents[:, 1], -self.face_tangents[:, 0]])
        self.boundary_face_mask = self.face_owners[:, 1] < 0
        self.boundary_faces = np.flatnonzero(self.boundary_face_mask)
        self.interior_faces = np.flatnonzero(~self.boundary_face_mask)
        self.boundary_cell_mask = np.zeros(self.n_cells, dtype=bool)
        self.boundary_cell_mask[self.face_owners[self.boundary_faces, 0]] = True
        for arr in (self.faces, self.face_owners, self.cell_measures, self.cell_centroids,
                    self.cell_diameters, self.face_measures, self.face_midpoints,
                    self.face_tangents, self.face_normals):
            arr.setflags(write=False)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def h(self):
        return float(self.cell_diameters.max())

    @property
    def face_diameters(self):
        return self.face_measures

    def outward_normal(self, cell, local_face):
        """Unit normal of a cell face pointing out of the cell."""
        f = self.cell_faces[cell][local_face]
        return self.cell_face_signs[cell][local_face] * self.face_normals[f]

    @cached_property
    def groups(self):
        """Cells grouped by vertex count: ``{m: cell index array}``."""
        sizes = np.array([loop.size for loop in self.cells])
        return {int(m): np.flatnonzero(sizes == m) for m in np.unique(sizes)}

    @cached_property
    def cell_vertex_incidence(self):
        rows = np.concatenate([np.full(loop.size, c) for c, loop in enumerate(self.cells)])
        cols = np.concatenate(self.cells)
        data = np.ones(rows.size, dtype=np.int32)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n_cells, self.n_vertices))

    @cached_property
    def cell_adjacency(self):
        """Cells sharing at least one vertex (diagonal included)."""
        inc = self.cell_vertex_incidence
        adj = (inc @ inc.T).tocsr()
        adj.data[:] = 1
        return adj

    def domain_measure(self):
        return float(self.cell_measures.sum())

    def __repr__(self):
        return (f"Mesh(cells={self.n_cells}, faces={self.n_faces}, "
                f"boundary_faces={len(self.boundary_faces)}, h={self.h:.6e})")


def generate_cartesian(n):
    """Uniform ``n x n`` square mesh of the unit square, row-major cells."""
    if n < 1:
        raise ValueError("n must be positive")
    t = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def v(i, j):
        return j * (n + 1) + i

    cells = [[v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)]
             for j in range(n) for i in range(n)]
    return Mesh(vertices, cells)


def generate_triangular(n):
    """Cartesian mesh with every square split along its SW-NE diagonal."""
    if n < 1:
        raise ValueError("n must be positive")
    t = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def v(i, j):
        return j * (n + 1) + i

    cells = []
    for j in range(n):
        for i in range(n):
            cells.append([v(i, j), v(i + 1, j), v(i + 1, j + 1)])
            cells.append([v(i, j), v(i + 1, j + 1), v(i, j + 1)])
    return Mesh(vertices, cells)


def read_mesh(path):
    """Read the plain-text polygon format (``NV NC`` / vertices / loops)."""
    lines = Path(path).read_text().splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines):
            pos += 1
            text = lines[pos - 1].split("#", 1)[0].strip()
            if text:
                return pos, text.split()
        raise MeshParseError("unexpected end of file", line=pos + 1)

    lineno, tok = next_line()
    if len(tok) != 2:
        raise MeshParseError("header must be 'NV NC'", line=lineno)
    try:
        nv, nc = int(tok[0]), int(tok[1])
    except ValueError:
        raise MeshParseError("header must hold two integers", line=lineno) from None
    if nv < 3 or nc < 1:
        raise MeshParseError("need at least 3 vertices and 1 cell", line=lineno)
    vertices = np.empty((nv, 2))
    for i in range(nv):
        lineno, tok = next_line()
        if len(tok) != 2:
            raise MeshParseError("vertex line must be 'x y'", line=lineno)
        try:
            vertices[i] = float(tok[0]), float(tok[1])
        except ValueError:
            raise MeshParseError("bad vertex coordinate", line=lineno) from None
    cells = []
    for _ in range(nc):
        lineno, tok = next_line()
        try:
            ids = [int(t) for t in tok]
        except ValueError:
            raise MeshParseError("bad cell line", line=lineno) from None
        m = ids[0]
        if m != len(ids) - 1:
            raise MeshParseError(f"cell declares {m} vertices, lists {len(ids) - 1}", line=lineno)
        if m < 3:
            raise GeometryError(f"cell on line {lineno} has fewer than 3 vertices")
        if min(ids[1:]) < 0 or max(ids[1:]) >= nv:
            raise MeshParseError("vertex id out of range", line=lineno)
        cells.append(ids[1:])
    while pos < len(lines):
        pos += 1
        if lines[pos - 1].split("#", 1)[0].strip():
            raise MeshParseError("trailing content", line=pos)
    return Mesh(vertices, cells, check_simple=True)


def write_mesh(mesh, path):
    out = [f"{mesh.n_vertices} {mesh.n_cells}"]
    out += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    out += [" ".join(str(v) for v in [loop.size, *loop.tolist()]) for loop in mesh.cells]
    Path(path).write_text("\n".join(out) + "\n")


@dataclass(frozen=True)
class Patch:
    """Restricted neighbourhood of one boundary face.

    ``interior_faces`` have both owners inside the patch; ``boundary_faces``
    have exactly one; ``domain_faces`` is the subset of the latter lying on
    the domain boundary. Global-to-local maps hold -1 outside the patch.
    """

    face: int
    cell: int
    alpha: int
    cells: np.ndarray
    interior_faces: np.ndarray
    boundary_faces: np.ndarray
    domain_faces: np.ndarray
    cell_g2l: np.ndarray
    face_g2l: np.ndarray

    @property
    def faces(self):
        return np.concatenate([self.interior_faces, self.boundary_faces])


def patch_cells(mesh, seed, alpha):
    """Cells within ``alpha`` vertex-sharing layers of ``seed``."""
    adj = mesh.cell_adjacency
    mark = np.zeros(mesh.n_cells, dtype=bool)
    mark[seed] = True
    for _ in range(alpha):
        grown = (adj @ mark.astype(np.int32)) > 0
        if np.array_equal(grown, mark):
            break
        mark = grown
    return np.flatnonzero(mark)


def neighborhood(mesh, j, alpha, dofs_per_face=1):
    """Patch around the boundary face carrying boundary DoF ``j``.

    Boundary DoFs are numbered face by face over ``mesh.boundary_faces`` with
    ``dofs_per_face`` unknowns each.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    nb = len(mesh.boundary_faces) * dofs_per_face
    if not 0 <= j < nb:
        raise IndexError(f"boundary DoF {j} out of range [0, {nb})")
    face = int(mesh.boundary_faces[j // dofs_per_face])
    seed = int(mesh.face_owners[face, 0])
    cells = patch_cells(mesh, seed, alpha)
    inside = np.zeros(mesh.n_cells, dtype=bool)
    inside[cells] = True
    faces = np.unique(np.concatenate([mesh.cell_faces[c] for c in cells]))
    own = mesh.face_owners[faces]
    count = inside[own[:, 0]].astype(int) + ((own[:, 1] >= 0) & inside[np.maximum(own[:, 1], 0)])
    interior = faces[count == 2]
    boundary = faces[count == 1]
    domain = boundary[mesh.boundary_face_mask[boundary]]
    cell_g2l = np.full(mesh.n_cells, -1, dtype=np.int64)
    cell_g2l[cells] = np.arange(cells.size)
    face_g2l = np.full(mesh.n_faces, -1, dtype=np.int64)
    local_faces = np.concatenate([interior, boundary])
    face_g2l[local_faces] = np.arange(local_faces.size)
    return Patch(face, seed, alpha, cells, interior, boundary, domain, cell_g2l, face_g2l)
