"""Halfedge triangle mesh with per-facet reference frames.

The mesh is immutable once built.  Halfedges of facet ``f`` get the ids
``3*f``, ``3*f + 1`` and ``3*f + 2``; halfedge ``3*f + k`` runs from facet
vertex ``k`` to facet vertex ``(k + 1) % 3``.  Boundary halfedges (no facet)
are appended after the interior ones so that every undirected edge has
exactly two directed halfedges.

Each facet carries a reference direction ``r`` lying in its plane.  By
default ``r`` is the normalized direction of edge 0, so the angle from ``r``
to edge 0 is exactly zero.  All per-facet angular data (border direction
angles, corner angles) is precomputed at build time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MeshError

# a facet is degenerate when its area is below this fraction of the
# squared bounding box diagonal
_DEGENERATE_AREA_FRACTION = 1e-14


@dataclass(frozen=True)
class TracePoint:
    """A point on a mesh edge addressed by halfedge and parameter.

    ``c`` in [0, 1] is the linear parameter from the halfedge origin to its
    destination.  ``c`` in (1, 2] is a terminal encoding: the point sits on
    the destination vertex and the fractional part records where on the
    absorbing corner the streamline ended.
    """

    halfedge: int
    c: float


@dataclass(frozen=True)
class FacetFrame:
    """Planar geometry of one facet, expressed against its reference r.

    ``u`` and ``v`` span the facet plane (``u`` is the reference direction
    r), ``edge_angles[k]`` is the unwrapped angle from r to edge k
    (``edge_angles[0] == 0`` when r is not rotated), ``betas[k]`` is the
    interior corner angle between edge k and edge k+1, in (0, pi).
    """

    u: np.ndarray
    v: np.ndarray
    edge_vecs: np.ndarray
    edge_lens: np.ndarray
    edge_angles: np.ndarray
    betas: np.ndarray


class SurfaceMesh:
    """Manifold, consistently oriented triangle mesh."""

    def __init__(self, vertices, faces):
        vertices = np.asarray(vertices, dtype=np.float64)
        faces = np.asarray(faces, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError("vertices must be an (n, 3) array")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise MeshError("faces must be an (m, 3) array")
        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise MeshError("face references a vertex that does not exist")
        self.vertices = vertices
        self.faces = faces
        self._build_connectivity()
        self._check_degenerate()
        self._build_frames()
        self.vertices.setflags(write=False)
        self.faces.setflags(write=False)

    # -- construction ---------------------------------------------------

    def _build_connectivity(self):
        nf = len(self.faces)
        n_interior = 3 * nf
        directed = {}
        for f, (a, b, c) in enumerate(self.faces):
            for k, (u, v) in enumerate(((a, b), (b, c), (c, a))):
                if u == v:
                    raise MeshError(f"facet {f} repeats vertex {u}")
                if (u, v) in directed:
                    raise MeshError(
                        f"non-manifold or inconsistently oriented edge "
                        f"({u}, {v}) at facet {f}"
                    )
                directed[(u, v)] = 3 * f + k

        origin = np.empty(n_interior, dtype=np.int64)
        dest = np.empty(n_interior, dtype=np.int64)
        for (u, v), h in directed.items():
            origin[h] = u
            dest[h] = v

        opposite = np.full(n_interior, -1, dtype=np.int64)
        boundary_pairs = []  # (origin, dest) of boundary halfedges to create
        for (u, v), h in directed.items():
            twin = directed.get((v, u))
            if twin is not None:
                opposite[h] = twin
            else:
                boundary_pairs.append((v, u))

        nb = len(boundary_pairs)
        n = n_interior + nb
        self._origin = np.empty(n, dtype=np.int64)
        self._dest = np.empty(n, dtype=np.int64)
        self._opposite = np.empty(n, dtype=np.int64)
        self._next = np.empty(n, dtype=np.int64)
        self._prev = np.empty(n, dtype=np.int64)
        self._facet = np.empty(n, dtype=np.int64)

        self._origin[:n_interior] = origin
        self._dest[:n_interior] = dest
        self._opposite[:n_interior] = opposite
        for f in range(nf):
            for k in range(3):
                h = 3 * f + k
                self._next[h] = 3 * f + (k + 1) % 3
                self._prev[h] = 3 * f + (k + 2) % 3
                self._facet[h] = f

        boundary_by_origin = {}
        for i, (u, v) in enumerate(boundary_pairs):
            b = n_interior + i
            if u in boundary_by_origin:
                raise MeshError(f"non-manifold boundary at vertex {u}")
            boundary_by_origin[u] = b
            self._origin[b] = u
            self._dest[b] = v
            self._facet[b] = -1
            h = directed[(v, u)]
            self._opposite[b] = h
            self._opposite[h] = b
        for i, (u, v) in enumerate(boundary_pairs):
            b = n_interior + i
            nxt = boundary_by_origin.get(v)
            if nxt is None:
                raise MeshError(f"open boundary fan at vertex {v}")
            self._next[b] = nxt
            self._prev[nxt] = b

        # outgoing halfedges per vertex; remember which vertices touch the
        # boundary (those get a boundary halfedge as well)
        self._vertex_out = [[] for _ in range(len(self.vertices))]
        for h in range(n):
            self._vertex_out[self._origin[h]].append(h)
        self._vertex_on_boundary = np.zeros(len(self.vertices), dtype=bool)
        for b in range(n_interior, n):
            self._vertex_on_boundary[self._origin[b]] = True
            self._vertex_on_boundary[self._dest[b]] = True
        self.n_interior_halfedges = n_interior

    def _check_degenerate(self):
        if not len(self.faces):
            return
        p = self.vertices
        lo, hi = p.min(axis=0), p.max(axis=0)
        bbox_sq = float(np.dot(hi - lo, hi - lo))
        tri = p[self.faces]
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        areas = 0.5 * np.linalg.norm(cross, axis=1)
        bad = np.nonzero(areas < _DEGENERATE_AREA_FRACTION * bbox_sq)[0]
        if len(bad):
            raise MeshError(f"degenerate facet {bad[0]}")

    def _build_frames(self, reference_offsets=None):
        """Precompute per-facet frames.

        ``reference_offsets`` rotates each facet's reference direction r by
        the given angle (radians, counterclockwise in the facet plane).  The
        default of zero pins r to edge 0.  Rotated references exist so tests
        can check that traced points do not depend on the choice of r.
        """
        nf = len(self.faces)
        self._frame_u = np.empty((nf, 3))
        self._frame_v = np.empty((nf, 3))
        self._edge_vecs = np.empty((nf, 3, 3))
        self._edge_lens = np.empty((nf, 3))
        self._betas = np.empty((nf, 3))
        self._edge_angles = np.empty((nf, 3))
        if reference_offsets is None:
            reference_offsets = np.zeros(nf)
        self._reference_offsets = np.asarray(reference_offsets, dtype=float)

        p = self.vertices
        for f, (a, b, c) in enumerate(self.faces):
            pts = (p[a], p[b], p[c])
            for k in range(3):
                e = pts[(k + 1) % 3] - pts[k]
                self._edge_vecs[f, k] = e
                self._edge_lens[f, k] = np.linalg.norm(e)
            normal = np.cross(self._edge_vecs[f, 0], -self._edge_vecs[f, 2])
            normal /= np.linalg.norm(normal)
            u0 = self._edge_vecs[f, 0] / self._edge_lens[f, 0]
            v0 = np.cross(normal, u0)
            off = self._reference_offsets[f]
            if off:
                u = math.cos(off) * u0 + math.sin(off) * v0
                v = math.cos(off) * v0 - math.sin(off) * u0
            else:
                u, v = u0, v0
            self._frame_u[f] = u
            self._frame_v[f] = v
            for k in range(3):
                d1 = -self._edge_vecs[f, k]
                d2 = self._edge_vecs[f, (k + 1) % 3]
                cosb = np.dot(d1, d2) / (np.linalg.norm(d1) * np.linalg.norm(d2))
                self._betas[f, k] = math.acos(min(1.0, max(-1.0, cosb)))
            # unwrapped angles from r to the edge directions: the turn at
            # each corner is pi - beta in (0, pi), accumulated, never reduced
            base = -off  # angle from r to edge 0
            self._edge_angles[f, 0] = base
            self._edge_angles[f, 1] = base + (math.pi - self._betas[f, 0])
            self._edge_angles[f, 2] = (
                base
                + (math.pi - self._betas[f, 0])
                + (math.pi - self._betas[f, 1])
            )

    # -- basic queries ----------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_facets(self):
        return len(self.faces)

    @property
    def n_halfedges(self):
        return len(self._origin)

    @property
    def n_edges(self):
        return self.n_halfedges // 2

    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_facets

    def origin(self, h):
        return int(self._origin[h])

    def dest(self, h):
        return int(self._dest[h])

    def next(self, h):
        return int(self._next[h])

    def prev(self, h):
        return int(self._prev[h])

    def opposite(self, h):
        return int(self._opposite[h])

    def facet(self, h):
        """Facet id of a halfedge, or None for boundary halfedges."""
        f = int(self._facet[h])
        return None if f < 0 else f

    def has_facet(self, h):
        return self._facet[h] >= 0

    def facet_halfedges(self, f):
        return (3 * f, 3 * f + 1, 3 * f + 2)

    def halfedge_index_in_facet(self, h):
        """Edge ordinal k of an interior halfedge within its facet."""
        if not self.has_facet(h):
            raise MeshError(f"halfedge {h} has no facet")
        return h % 3

    def halfedge_between(self, u, v):
        for h in self._vertex_out[u]:
            if self._dest[h] == v:
                return h
        return None

    def is_boundary_vertex(self, v):
        return bool(self._vertex_on_boundary[v])

    def vertex_valence(self, v):
        return len(self._vertex_out[v])

    def outgoing_halfedges(self, v):
        return list(self._vertex_out[v])

    def edge_length(self, h):
        if self.has_facet(h):
            return float(self._edge_lens[h // 3, h % 3])
        o = self.opposite(h)
        return float(self._edge_lens[o // 3, o % 3])

    def average_edge_length(self):
        total = 0.0
        count = 0
        for h in range(self.n_halfedges):
            if self.has_facet(h) and (
                self.opposite(h) > h or not self.has_facet(self.opposite(h))
            ):
                total += self.edge_length(h)
                count += 1
        return total / count if count else 0.0

    def bbox_diagonal(self):
        lo, hi = self.vertices.min(axis=0), self.vertices.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    def frame(self, f) -> FacetFrame:
        return FacetFrame(
            u=self._frame_u[f],
            v=self._frame_v[f],
            edge_vecs=self._edge_vecs[f],
            edge_lens=self._edge_lens[f],
            edge_angles=self._edge_angles[f],
            betas=self._betas[f],
        )

    def set_reference_offsets(self, offsets):
        """Rebuild frames with rotated per-facet reference directions.

        Testing hook: all traced positions must be invariant under this.
        """
        self._build_frames(reference_offsets=offsets)

    # -- angular queries --------------------------------------------------

    def corner_angle(self, h):
        """Interior angle, in (0, pi), at the corner halfedge ``h`` points to.

        Raises MeshError for boundary halfedges.
        """
        if not self.has_facet(h):
            raise MeshError(f"corner angle undefined on boundary halfedge {h}")
        return float(self._betas[h // 3, h % 3])

    def corner_angle_sum(self, v):
        total = 0.0
        for h in self._vertex_out[v]:
            if self.has_facet(h):
                # corner sitting at origin(h) inside facet(h)
                total += self._betas[h // 3, (h % 3 + 2) % 3]
        return total

    def angle_defect(self, v):
        """2*pi minus the sum of incident corner angles, interior vertices only."""
        if self._vertex_on_boundary[v]:
            raise MeshError(f"angle defect undefined for boundary vertex {v}")
        return 2.0 * math.pi - self.corner_angle_sum(v)

    # -- positions ----------------------------------------------------------

    def position(self, tp: TracePoint) -> np.ndarray:
        """World position of a trace point.

        For c in [0, 1] the point is interpolated along the halfedge; for
        c in (1, 2] it is the destination vertex (terminal sink encoding).
        """
        c = tp.c
        if c < 0.0 or c > 2.0:
            raise MeshError(f"trace point parameter {c} outside [0, 2]")
        p0 = self.vertices[self._origin[tp.halfedge]]
        p1 = self.vertices[self._dest[tp.halfedge]]
        if c <= 1.0:
            return (1.0 - c) * p0 + c * p1
        return p1.copy()


def load_obj(path) -> SurfaceMesh:
    """Load a triangle mesh from a Wavefront OBJ file.

    Supports ``v x y z`` and ``f i j k`` statements (1-based indices;
    ``i/j/k`` attribute suffixes are tolerated and ignored).  Everything
    else is skipped.  Faces must be triangles.
    """
    vertices = []
    faces = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "v":
                if len(parts) < 4:
                    raise MeshError(f"line {lineno}: vertex needs 3 coordinates")
                try:
                    vertices.append([float(x) for x in parts[1:4]])
                except ValueError as exc:
                    raise MeshError(f"line {lineno}: bad vertex: {exc}") from None
            elif parts[0] == "f":
                idx = []
                for tok in parts[1:]:
                    head = tok.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise MeshError(
                            f"line {lineno}: bad face index {head!r}"
                        ) from None
                    if i <= 0:
                        raise MeshError(f"line {lineno}: face indices are 1-based")
                    idx.append(i - 1)
                if len(idx) != 3:
                    raise MeshError(f"non-triangle face at index {len(faces)}")
                faces.append(idx)
    return SurfaceMesh(np.array(vertices, dtype=float).reshape(-1, 3), faces)


def save_obj(path, mesh_or_vertices, faces=None, polylines=None):
    """Write vertices/faces (and optional ``l`` polylines) to an OBJ file."""
    if mesh_or_vertices is None:
        vertices, faces = [], []
    elif faces is None:
        vertices = mesh_or_vertices.vertices
        faces = mesh_or_vertices.faces
    else:
        vertices = mesh_or_vertices
    with open(path, "w") as fh:
        for p in vertices:
            fh.write(f"v {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
        for tri in faces:
            fh.write(f"f {int(tri[0]) + 1} {int(tri[1]) + 1} {int(tri[2]) + 1}\n")
        if polylines:
            base = len(vertices) + 1
            for pts in polylines:
                ids = []
                for p in pts:
                    fh.write(f"v {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
                    ids.append(base)
                    base += 1
                if len(ids) >= 2:
                    fh.write("l " + " ".join(str(i) for i in ids) + "\n")
