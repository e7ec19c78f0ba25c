"""Per-facet direction field samples and their file format.

A field assigns six angles to every facet: two per border edge, one at each
edge endpoint.  Sample ``2k`` sits at the origin of edge ``k``, sample
``2k + 1`` at its destination.  Angles are stored in degrees, measured from
the edge's own direction, reduced to [0, 360) with an integer winding count
alongside; the real (unreduced) angle of sample ``i`` is
``angles[i] + 360 * windings[i]``.  Storing edge-relative degrees keeps
tangency exactly representable: a sample is tangent to its edge iff the
stored angle is exactly 0.0 or 180.0.

Along the border of a facet the field angle interpolates linearly in the
real angles, edge by edge and corner by corner.  Corner ``k`` connects
sample ``2k + 1`` to sample ``2(k + 1) % 6``; the connecting segment at the
last corner ends at sample 0 minus a full turn, which encodes that the
field never winds around the interior of a facet (singularities live on
vertices only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FieldError, MeshError
from .mesh import SurfaceMesh

_HEADER = "streamfield 1"

# endpoint / rotation agreement across an interior edge, in degrees
CONTINUITY_TOL_DEG = 1e-6
# corner distribution agreement around an interior vertex, deg per rad
EVENNESS_TOL = 1e-6


class FieldSamples:
    """Six direction samples per facet (degrees in [0, 360) plus windings)."""

    def __init__(self, angles, windings):
        angles = np.asarray(angles, dtype=np.float64)
        windings = np.asarray(windings, dtype=np.int64)
        if angles.shape != windings.shape or angles.ndim != 2 or angles.shape[1] != 6:
            raise FieldError("field samples must be two (n_facets, 6) arrays")
        if np.any(angles < 0.0) or np.any(angles >= 360.0):
            raise FieldError("sample angles must lie in [0, 360)")
        self.angles = angles
        self.windings = windings
        self.angles.setflags(write=False)
        self.windings.setflags(write=False)

    @property
    def n_facets(self):
        return len(self.angles)

    def nodes(self, f):
        """Real border angles of facet f as a 7-array.

        Entries 0..5 are the six samples un-reduced; entry 6 repeats sample 0
        minus 360, closing the border loop.  Edge k interpolates nodes[2k] ->
        nodes[2k+1]; corner k interpolates nodes[2k+1] -> nodes[2k+2].
        """
        th = self.angles[f] + 360.0 * self.windings[f]
        return np.append(th, th[0] - 360.0)

    def flipped(self):
        """The reverse field: every sample rotated by 180 degrees."""
        a = self.angles + 180.0
        wrap = a >= 360.0
        a = np.where(wrap, a - 360.0, a)
        w = self.windings + wrap.astype(np.int64)
        return FieldSamples(a, w)


@dataclass
class Violation:
    """One field consistency defect found by validate()."""

    kind: str
    where: str
    discrepancy: float
    edge: tuple | None = None
    vertex: int | None = None

    def __str__(self):
        return f"{self.kind} at {self.where}: off by {self.discrepancy:.6g}"


def normalize_sample(value_deg):
    """Reduce a real angle in degrees to ([0, 360), winding)."""
    w = math.floor(value_deg / 360.0)
    a = value_deg - 360.0 * w
    if a >= 360.0:  # floating point guard when value is a hair below 0
        a -= 360.0
        w += 1
    return a, int(w)


def load_field(path, mesh: SurfaceMesh) -> FieldSamples:
    """Read a field file and bind it to ``mesh``.

    Format: a ``streamfield 1`` header line, then one line per facet with
    13 numbers: the facet id followed by six (angle, winding) pairs.  ``#``
    starts a comment.  Angles outside [0, 360) are normalized on load with
    the winding adjusted to keep the real angle unchanged (370 becomes 10
    with winding + 1).
    """
    angles = np.full((mesh.n_facets, 6), np.nan)
    windings = np.zeros((mesh.n_facets, 6), dtype=np.int64)
    seen = np.zeros(mesh.n_facets, dtype=bool)
    with open(path) as fh:
        header = None
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if header is None:
                if line != _HEADER:
                    raise FieldError(
                        f"line {lineno}: expected header {_HEADER!r}, got {line!r}"
                    )
                header = line
                continue
            parts = line.split()
            if len(parts) != 13:
                raise FieldError(
                    f"line {lineno}: expected facet id and 6 angle/winding pairs"
                )
            try:
                fid = int(parts[0])
                vals = [float(x) for x in parts[1::2]]
                winds = [int(x) for x in parts[2::2]]
            except ValueError as exc:
                raise FieldError(f"line {lineno}: {exc}") from None
            if fid < 0 or fid >= mesh.n_facets:
                raise FieldError(f"line {lineno}: facet id {fid} out of range")
            if seen[fid]:
                raise FieldError(f"line {lineno}: duplicate facet id {fid}")
            seen[fid] = True
            for i in range(6):
                a, w = normalize_sample(vals[i])
                angles[fid, i] = a
                windings[fid, i] = winds[i] + w
    if header is None:
        raise FieldError("empty field file")
    if not seen.all():
        missing = np.nonzero(~seen)[0]
        head = ", ".join(str(i) for i in missing[:8])
        raise FieldError(f"missing samples for {len(missing)} facet(s): {head}")
    return FieldSamples(angles, windings)


def save_field(path, fieldsamples: FieldSamples):
    """Write a field file that round-trips bit-exactly through load_field."""
    with open(path, "w") as fh:
        fh.write(_HEADER + "\n")
        for f in range(fieldsamples.n_facets):
            row = [str(f)]
            for i in range(6):
                row.append(repr(float(fieldsamples.angles[f, i])))
                row.append(str(int(fieldsamples.windings[f, i])))
            fh.write(" ".join(row) + "\n")


# -- consistency -------------------------------------------------------------


def corner_jump_deg(mesh, fieldsamples, f, k):
    """Field discontinuity (degrees) across corner k of facet f.

    The border-interpolated angle rotates by nodes[2k+2] - nodes[2k+1]
    across the corner while the border direction itself turns by
    -(180 - beta); whatever rotation remains beyond that turn is the field's
    own jump.  Signs are fixed so that a flat sink (field pointing at the
    vertex on every incident edge) jumps by +beta at each of its corners.
    """
    nodes = fieldsamples.nodes(f)
    corner_rot = nodes[2 * k + 2] - nodes[2 * k + 1]
    beta_deg = math.degrees(mesh.corner_angle(3 * f + k))
    return -corner_rot - (180.0 - beta_deg)


def _vertex_corners(mesh, v):
    """(facet, corner ordinal) pairs of the corners sitting on vertex v."""
    out = []
    for h in mesh.outgoing_halfedges(v):
        f = mesh.facet(h)
        if f is not None:
            out.append((f, (h % 3 + 2) % 3))
    return out


def vertex_index(mesh, fieldsamples, v):
    """Topological index of the field at an interior vertex.

    Sum of the per-corner jumps plus the angle defect, in turns.  Raises
    MeshError for boundary vertices (their index is not defined).
    """
    if mesh.is_boundary_vertex(v):
        raise MeshError(f"vertex index undefined for boundary vertex {v}")
    total_jump = 0.0
    for f, k in _vertex_corners(mesh, v):
        total_jump += corner_jump_deg(mesh, fieldsamples, f, k)
    return math.radians(total_jump) / (2.0 * math.pi) + mesh.angle_defect(v) / (
        2.0 * math.pi
    )


def validate(mesh: SurfaceMesh, fieldsamples: FieldSamples) -> list[Violation]:
    """Check cross-facet consistency; returns violations instead of raising.

    Two families of checks:

    * edge continuity: along every interior edge the two facets must sample
      the same directions: endpoint angles congruent after the half-turn flip
      onto the reversed edge, and equal-opposite real rotation along the edge;
    * corner distribution: around every interior vertex the per-corner jump
      divided by the corner angle must agree across corners, which makes the
      jump a single vertex property spread evenly by angle.
    """
    if fieldsamples.n_facets != mesh.n_facets:
        raise FieldError("field facet count does not match mesh")
    violations = []

    for h in range(mesh.n_interior_halfedges):
        o = mesh.opposite(h)
        if o < h or not mesh.has_facet(o):
            continue
        f, k = h // 3, h % 3
        g, k2 = o // 3, o % 3
        na, nb = fieldsamples.nodes(f), fieldsamples.nodes(g)
        d1 = _circular_gap(nb[2 * k2 + 1] - na[2 * k] - 180.0)
        d2 = _circular_gap(nb[2 * k2] - na[2 * k + 1] - 180.0)
        rot_a = na[2 * k + 1] - na[2 * k]
        rot_b = nb[2 * k2 + 1] - nb[2 * k2]
        d3 = abs(rot_a + rot_b)
        worst = max(d1, d2, d3)
        if worst > CONTINUITY_TOL_DEG:
            u, v = mesh.origin(h), mesh.dest(h)
            violations.append(
                Violation(
                    kind="edge-continuity",
                    where=f"edge ({u}, {v})",
                    discrepancy=worst,
                    edge=(u, v),
                )
            )

    for v in range(mesh.n_vertices):
        if mesh.is_boundary_vertex(v):
            continue
        ratios = []
        for f, k in _vertex_corners(mesh, v):
            beta = mesh.corner_angle(3 * f + k)
            ratios.append(corner_jump_deg(mesh, fieldsamples, f, k) / beta)
        if ratios and max(ratios) - min(ratios) > EVENNESS_TOL:
            violations.append(
                Violation(
                    kind="uneven-corner-distribution",
                    where=f"vertex {v}",
                    discrepancy=max(ratios) - min(ratios),
                    vertex=v,
                )
            )
    return violations


def _circular_gap(delta_deg):
    """Distance from a degree value to the nearest multiple of 360."""
    return abs(delta_deg - 360.0 * round(delta_deg / 360.0))


# -- border interpolation -----------------------------------------------------


def interpolated_angle(mesh, fieldsamples, f, element, t):
    """Field angle at a border point, in radians relative to the facet's r.

    ``element`` is ``("edge", k)`` or ``("corner", k)``; ``t`` in [0, 1]
    parameterizes the element.  The angle is the linear interpolation of the
    real sample angles plus the unwrapped angle from r to the local border
    direction (for corners the border direction itself turns by pi - beta
    across the element).
    """
    if not 0.0 <= t <= 1.0:
        raise FieldError(f"interpolation parameter {t} outside [0, 1]")
    kind, k = element
    nodes = fieldsamples.nodes(f)
    frame = mesh.frame(f)
    if kind == "edge":
        b = nodes[2 * k] + t * (nodes[2 * k + 1] - nodes[2 * k])
        return math.radians(b) + frame.edge_angles[k]
    if kind == "corner":
        b = nodes[2 * k + 1] + t * (nodes[2 * k + 2] - nodes[2 * k + 1])
        psi = math.pi - frame.betas[k]
        return math.radians(b) + frame.edge_angles[k] + t * psi
    raise FieldError(f"unknown border element {kind!r}")


# -- synthesis ----------------------------------------------------------------


def synth_field(mesh, kind, **params) -> FieldSamples:
    """Generate a consistent field on ``mesh``.

    Kinds:

    * ``constant`` -- uniform planar direction; ``angle_deg`` (default 0).
    * ``circular`` -- counterclockwise circulation around ``center``.
    * ``source`` / ``sink`` -- radial flow away from / into ``center``.
    * ``saddle`` -- index -1 saddle at ``center``; ``phase_deg`` rotates
      its separatrices.
    * ``smoothed-random`` -- smooth random field on a closed mesh, with the
      topologically required singularities placed on random vertices;
      ``seed`` (default 0).

    The planar kinds require all facets to lie in the z = 0 plane with
    counterclockwise orientation.  Every generated field passes validate().
    """
    if kind == "constant":
        return _synth_planar(mesh, "constant", **params)
    if kind in ("circular", "source", "sink", "saddle"):
        return _synth_planar(mesh, kind, **params)
    if kind in ("smoothed-random", "smoothed_random"):
        return _synth_smoothed_random(mesh, **params)
    raise FieldError(f"unknown field kind {kind!r}")


def _synth_planar(mesh, kind, angle_deg=0.0, center=(0.0, 0.0), phase_deg=0.0):
    p = mesh.vertices
    if np.any(np.abs(p[:, 2]) > 1e-12):
        raise FieldError("planar field kinds require a z = 0 mesh")
    cx, cy = float(center[0]), float(center[1])
    scale = max(mesh.bbox_diagonal(), 1.0)

    if kind == "constant":
        center_index = 0

        def absolute_angle(q):
            return angle_deg

    else:
        spin = -1.0 if kind == "saddle" else 1.0
        offset = {"circular": 90.0, "source": 0.0, "sink": 180.0, "saddle": 0.0}[
            kind
        ] + phase_deg
        center_index = -1 if kind == "saddle" else 1

        def absolute_angle(q):
            return spin * math.degrees(math.atan2(q[1] - cy, q[0] - cx)) + offset

    def eval_point(at, toward):
        # radial kinds are constant along rays from the center, so a sample
        # sitting exactly on the center is evaluated slightly along its edge
        if abs(at[0] - cx) + abs(at[1] - cy) < 1e-12 * scale:
            return (
                at[0] + 0.01 * (toward[0] - at[0]),
                at[1] + 0.01 * (toward[1] - at[1]),
            )
        return at

    def is_center_vertex(q):
        return abs(q[0] - cx) + abs(q[1] - cy) < 1e-12 * scale

    angles = np.empty((mesh.n_facets, 6))
    windings = np.empty((mesh.n_facets, 6), dtype=np.int64)
    for f in range(mesh.n_facets):
        verts = [p[v] for v in mesh.faces[f]]
        frame = mesh.frame(f)
        if np.cross(frame.u, frame.v)[2] < 0:
            raise FieldError(f"facet {f} is not counterclockwise in the plane")
        raw = np.empty(6)
        rots = np.empty(3)
        for k in range(3):
            po, pd = verts[k], verts[(k + 1) % 3]
            e_ang = math.degrees(math.atan2(pd[1] - po[1], pd[0] - po[0]))
            ao = absolute_angle(eval_point(po, pd))
            ad = absolute_angle(eval_point(pd, po))
            raw[2 * k] = ao - e_ang
            raw[2 * k + 1] = ad - e_ang
            # an edge that avoids the center subtends less than a half turn
            d = ad - ao
            rots[k] = d - 360.0 * round(d / 360.0)
        theta = np.empty(6)
        theta[0] = raw[0] % 360.0
        for k in range(3):
            if k:
                beta_deg = math.degrees(mesh.corner_angle(3 * f + k - 1))
                jump = beta_deg * center_index if is_center_vertex(verts[k]) else 0.0
                theta[2 * k] = theta[2 * k - 1] - jump - (180.0 - beta_deg)
            theta[2 * k + 1] = theta[2 * k] + rots[k]
        beta_deg = math.degrees(mesh.corner_angle(3 * f + 2))
        jump = beta_deg * center_index if is_center_vertex(verts[0]) else 0.0
        closure = theta[5] - jump - (180.0 - beta_deg) - (theta[0] - 360.0)
        if abs(closure) > 1e-6:
            raise FieldError(f"synth closure failed on facet {f}: {closure}")
        for i in range(6):
            a = raw[i] % 360.0
            if a >= 360.0:
                a -= 360.0
            w = round((theta[i] - a) / 360.0)
            if abs(theta[i] - (a + 360.0 * w)) > 1e-6:
                raise FieldError(f"synth winding drift on facet {f} sample {i}")
            angles[f, i] = a
            windings[f, i] = w
    return FieldSamples(angles, windings)


def _synth_smoothed_random(mesh, seed=0, amplitude_deg=40.0):
    """Random smooth field on a closed mesh via per-edge rotation solving.

    Unknowns are one real rotation per undirected edge.  Per-corner jumps
    are fixed up front from the chosen singular vertices (spread evenly by
    corner angle), which turns the border closure of every facet into a
    linear equation on its three edge rotations.  The minimum-norm solution
    of that system, plus a smoothed random potential gradient (which lies in
    the system's null space), gives the rotations; sample values are then
    propagated facet to facet over a spanning tree.  On surfaces of nonzero
    genus the propagation can pick up fractional holonomy around handle
    loops, which is repaired with extra loop equations and one more solve.
    """
    from scipy.sparse import csr_matrix, vstack
    from scipy.sparse.linalg import lsqr

    for h in range(mesh.n_halfedges):
        if not mesh.has_facet(h):
            raise FieldError("smoothed-random fields need a closed mesh")
    rng = np.random.default_rng(seed)
    nf, nv = mesh.n_facets, mesh.n_vertices

    chi = mesh.euler_characteristic()
    singular = {}
    if chi != 0:
        sign = 1 if chi > 0 else -1
        for v in rng.choice(nv, size=abs(chi), replace=False):
            singular[int(v)] = sign

    beta_sums = np.array([mesh.corner_angle_sum(v) for v in range(nv)])
    jumps = np.empty((nf, 3))
    for f in range(nf):
        for k in range(3):
            v = int(mesh.faces[f][(k + 1) % 3])
            beta = mesh.corner_angle(3 * f + k)
            idx = singular.get(v, 0)
            jumps[f, k] = (beta / beta_sums[v]) * 360.0 * (idx - 1) + math.degrees(
                beta
            )

    # canonical (lower-id) halfedge of each undirected edge -> edge column
    edge_col = {}
    for h in range(mesh.n_interior_halfedges):
        if mesh.opposite(h) > h:
            edge_col[h] = len(edge_col)
    ne = len(edge_col)

    def edge_of(h):
        o = mesh.opposite(h)
        return (edge_col[h], 1.0) if h < o else (edge_col[o], -1.0)

    rows, cols, vals = [], [], []
    rhs = np.empty(nf)
    for f in range(nf):
        for k in range(3):
            col, sgn = edge_of(3 * f + k)
            rows.append(f)
            cols.append(col)
            vals.append(sgn)
        # border closure: edge rotations + corner steps -(jump + 180 - beta)
        # must cancel the border's own full turn
        rhs[f] = jumps[f].sum() + 180.0 - sum(
            math.degrees(mesh.corner_angle(3 * f + k)) for k in range(3)
        )
    a_facets = csr_matrix((vals, (rows, cols)), shape=(nf, ne))
    rot = lsqr(a_facets, rhs, atol=1e-14, btol=1e-14)[0]

    # smoothed random potential: its gradient sums to zero around every facet
    g = rng.normal(0.0, 1.0, nv)
    neighbors = [
        [mesh.dest(h) for h in mesh.outgoing_halfedges(v)] for v in range(nv)
    ]
    for _ in range(10):
        g = np.array(
            [
                (g[v] + sum(g[n] for n in neighbors[v])) / (1 + len(neighbors[v]))
                for v in range(nv)
            ]
        )
    spread = g.max() - g.min()
    if spread > 0:
        g *= amplitude_deg / spread
    for h, col in edge_col.items():
        rot[col] += g[mesh.dest(h)] - g[mesh.origin(h)]

    seed_angle = float(rng.uniform(0.0, 360.0))

    def chain_increments(f, rot_vec):
        # node-to-node increments around the border; they sum to zero when
        # the facet equation holds (the wrap node absorbs the full turn)
        inc = np.empty(6)
        for k in range(3):
            col, sgn = edge_of(3 * f + k)
            inc[2 * k] = sgn * rot_vec[col]
            beta_deg = math.degrees(mesh.corner_angle(3 * f + k))
            inc[2 * k + 1] = -jumps[f, k] - (180.0 - beta_deg)
        inc[5] += 360.0
        return inc

    def propagate(rot_vec):
        theta = np.full((nf, 6), np.nan)
        incs = [chain_increments(f, rot_vec) for f in range(nf)]
        anchors = {0: 0}
        parent = {}  # facet -> (parent facet, crossing halfedge in parent)

        def fill(f, node, value):
            th = theta[f]
            th[node] = value
            i = node
            for _ in range(5):
                j = (i + 1) % 6
                th[j] = th[i] + incs[f][i]
                i = j

        fill(0, 0, seed_angle)
        order = [0]
        seen = {0}
        qi = 0
        nontree = []
        while qi < len(order):
            f = order[qi]
            qi += 1
            back = (
                mesh.opposite(parent[f][1]) if f in parent else None
            )
            for k in range(3):
                h = 3 * f + k
                if h == back:
                    continue
                o = mesh.opposite(h)
                gfac = mesh.facet(o)
                if gfac in seen:
                    nontree.append(h)
                    continue
                seen.add(gfac)
                parent[gfac] = (f, h)
                anchors[gfac] = 2 * (o % 3)
                fill(gfac, 2 * (o % 3), theta[f][2 * k + 1] + 180.0)
                order.append(gfac)
        uniq = []
        have = set()
        for h in nontree:
            key = min(h, mesh.opposite(h))
            if key not in have:
                have.add(key)
                uniq.append(h)
        return theta, parent, anchors, uniq

    def defect(theta, h):
        o = mesh.opposite(h)
        f, gfac = mesh.facet(h), mesh.facet(o)
        return theta[gfac][2 * (o % 3)] - (theta[f][2 * (h % 3) + 1] + 180.0)

    # Non-tree edges may disagree by whole turns: harmless, the two facets
    # just sit on different branches of the angle (continuity is a mod-360
    # property).  A fractional disagreement is real holonomy around a handle
    # loop; only that part gets repaired, by extra loop equations.  Whole
    # turns cannot be repaired anyway: around a sphere every loop equation
    # is a combination of facet equations, so the turns are pinned.
    theta, parent, anchors, nontree = propagate(rot)
    bad = [h for h in nontree if _circular_gap(defect(theta, h)) > 1e-7]
    if bad:
        loop_rows = []
        targets = []
        for h in bad:
            row = _defect_row(mesh, parent, anchors, h, edge_of, ne)
            d = defect(theta, h)
            loop_rows.append(row)
            targets.append(float(row @ rot) + 360.0 * round(d / 360.0) - d)
        a_full = vstack([a_facets, csr_matrix(np.array(loop_rows))])
        rhs_full = np.concatenate([rhs, np.array(targets)])
        rot = lsqr(a_full, rhs_full, atol=1e-14, btol=1e-14)[0]
        theta, parent, anchors, nontree = propagate(rot)

    for h in nontree:
        if _circular_gap(defect(theta, h)) > 1e-5:
            raise FieldError("random field propagation failed to close")

    angles = np.empty((nf, 6))
    windings = np.empty((nf, 6), dtype=np.int64)
    for f in range(nf):
        for i in range(6):
            a = theta[f][i] % 360.0
            if a >= 360.0:
                a -= 360.0
            w = round((theta[f][i] - a) / 360.0)
            angles[f, i] = a
            windings[f, i] = w
    return FieldSamples(angles, windings)


def _defect_row(mesh, parent, anchors, nontree_h, edge_of, ne):
    """Edge-rotation coefficients of one propagation defect.

    The defect at a non-tree dual edge compares values propagated to its two
    facets through the spanning tree.  As a function of the edge rotations it
    is the difference of two border-walk sums, one per tree path.  Forward
    walks around a whole facet border differ from zero only by that facet's
    closure equation, which is part of every solve, so forward walks give a
    valid representative row.
    """
    row = np.zeros(ne)

    def add_walk(f, node_a, node_b, sign):
        i = node_a
        while i != node_b:
            if i % 2 == 0:  # node 2k -> 2k+1 runs along edge k
                col, sgn = edge_of(3 * f + i // 2)
                row[col] += sign * sgn
            i = (i + 1) % 6

    def add_path(f, final_node, sign):
        add_walk(f, anchors[f], final_node, sign)
        while f in parent:
            pf, ph = parent[f]
            add_walk(pf, anchors[pf], 2 * (ph % 3) + 1, sign)
            f = pf

    o = mesh.opposite(nontree_h)
    add_path(mesh.facet(o), 2 * (o % 3), 1.0)
    add_path(mesh.facet(nontree_h), 2 * (nontree_h % 3) + 1, -1.0)
    return row
