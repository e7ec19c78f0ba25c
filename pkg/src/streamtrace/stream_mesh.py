"""Per-facet stream mesh: the combinatorial structure used to cross a facet.

The border of a facet (edge, corner, edge, corner, edge, corner) is cut at
every point where the interpolated field runs tangent to the border, giving
a cyclic sequence of constant-behavior pieces:

* ``I``  -- the field points into the facet across the piece;
* ``O``  -- it points out of the facet;
* ``Tf`` -- tangent, along the border direction (angle 0 mod 360);
* ``Tb`` -- tangent, against it (angle 180 mod 360).

Tangency crossings in the middle of a piece produce zero-length tangent
pieces, so behavior is constant on every piece including its endpoints.
Edge pieces are always computed on the lower-id halfedge of the undirected
edge and mirrored to the other side (swap I/O and Tf/Tb, reverse the
parameter), which makes the cut parameters of the two facets sharing the
edge identical by construction rather than approximately equal.

A face whose border carries exactly one inflow run and one outflow run,
separated by a backward tangency at the outflow-to-inflow transition and a
forward tangency at the other, is *simple* and can be crossed by flux ratio.
``decompose`` repeatedly carves simple faces off the main face with chords
drawn between a split forward tangency and a split backward tangency until
every face is simple.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

from .errors import StreamMeshError
from .mesh import TracePoint


class Behavior(Enum):
    IN = "I"
    OUT = "O"
    TF = "Tf"
    TB = "Tb"

    @property
    def is_tangent(self):
        return self in (Behavior.TF, Behavior.TB)


_MIRROR = {
    Behavior.IN: Behavior.OUT,
    Behavior.OUT: Behavior.IN,
    Behavior.TF: Behavior.TB,
    Behavior.TB: Behavior.TF,
}

# snapping tolerances (parameters are dimensionless in [0, 1])
VERTEX_SNAP = 1e-12


class StreamVertex:
    """Border anchor: element ordinal, parameter, 3D point, field angle.

    ``alpha`` is the field angle at the anchor in radians relative to the
    facet reference vector, on the continuous (winding-aware) branch.
    """

    __slots__ = ("id", "element", "t", "position", "alpha")

    def __init__(self, vid, element, t, position, alpha):
        self.id = vid
        self.element = element  # border element ordinal 0..5
        self.t = t
        self.position = position
        self.alpha = alpha


class StreamHalfedge:
    """One stream-mesh halfedge.

    Border halfedges (kind ``edge`` or ``corner``) carry their element
    ordinal, the anchor span [t0, t1] on it, and the border-relative field
    angles b0, b1 in degrees at their endpoints.  Chord halfedges carry the
    field angles relative to the chord direction instead, also in degrees.
    ``opp`` is None on the border (the outside is not represented) and the
    twin record on chords.
    """

    __slots__ = (
        "id",
        "kind",
        "element",
        "t0",
        "t1",
        "b0",
        "b1",
        "behavior",
        "length",
        "origin",
        "dest",
        "nxt",
        "prv",
        "opp",
        "face",
    )

    def __init__(self, hid, kind, behavior, element, t0, t1, b0, b1, length):
        self.id = hid
        self.kind = kind
        self.behavior = behavior
        self.element = element
        self.t0 = t0
        self.t1 = t1
        self.b0 = b0
        self.b1 = b1
        self.length = length
        self.origin = None
        self.dest = None
        self.nxt = None
        self.prv = None
        self.opp = None
        self.face = 0

    def anchor_t(self, c):
        return self.t0 + c * (self.t1 - self.t0)

    def __repr__(self):
        return (
            f"<sh{self.id} {self.kind} e{self.element} "
            f"[{self.t0:.6g},{self.t1:.6g}] {self.behavior.value}>"
        )


class Run:
    """One inflow or outflow run of a simple face, with flux prefix sums."""

    __slots__ = ("pieces", "starts", "totals", "total", "pos")

    def __init__(self, pieces, totals):
        self.pieces = pieces
        self.totals = totals
        self.starts = np.concatenate([[0.0], np.cumsum(totals)])[:-1]
        self.total = float(np.sum(totals))
        self.pos = {sh.id: i for i, sh in enumerate(pieces)}


def _classify(value_deg):
    m = value_deg % 360.0
    if m == 0.0:
        return Behavior.TF
    if m == 180.0:
        return Behavior.TB
    return Behavior.IN if m < 180.0 else Behavior.OUT


def _segment_values(d0, d1):
    """Partition [0, 1] by the tangency roots of the linear angle d0 -> d1.

    Returns 5-tuples (behavior, t0, t1, b0, b1) with angles in degrees.
    Tangency crossings interior to the interval become zero-length tangent
    pieces; endpoint tangencies become zero-length pieces at 0 or 1.
    """
    if d0 == d1:
        return [(_classify(d0), 0.0, 1.0, d0, d1)]
    span = d1 - d0
    lo, hi = (d0, d1) if d0 < d1 else (d1, d0)
    m0 = math.ceil(lo / 180.0)
    m1 = math.floor(hi / 180.0)
    cuts = []
    for m in range(m0, m1 + 1):
        level = 180.0 * m
        t = (level - d0) / span
        t = min(1.0, max(0.0, t))
        cuts.append((t, level))
    cuts.sort()
    pieces = []
    prev_t, prev_b = 0.0, d0
    for t, level in cuts:
        if t > prev_t:
            mid = 0.5 * (prev_b + level)
            pieces.append((_classify(mid), prev_t, t, prev_b, level))
        pieces.append((_classify(level), t, t, level, level))
        prev_t, prev_b = t, level
    if prev_t < 1.0:
        mid = 0.5 * (prev_b + d1)
        pieces.append((_classify(mid), prev_t, 1.0, prev_b, d1))
    return pieces


def _snap_level(value_deg):
    return 180.0 * round(value_deg / 180.0)


def segment_interval(mesh, fieldsamples, f, element):
    """Constant-behavior partition of one border element of facet ``f``.

    ``element`` is ``("edge", k)`` or ``("corner", k)``.  Returns ordered
    (behavior, t0, t1) triples covering [0, 1], with zero-length tangent
    pieces at interior tangency crossings.  Edge partitions are always
    derived on the lower-id halfedge of the undirected edge and mirrored, so
    the two incident facets cut the edge at bitwise-identical parameters.
    """
    return [
        (p[0], p[1], p[2])
        for p in _segment_element(mesh, fieldsamples, f, element)
    ]


def _segment_element(mesh, fieldsamples, f, element):
    kind, k = element
    nodes = fieldsamples.nodes(f)
    if kind == "corner":
        return _segment_values(nodes[2 * k + 1], nodes[2 * k + 2])
    if kind != "edge":
        raise StreamMeshError(f"unknown border element {kind!r}")
    h = 3 * f + k
    o = mesh.opposite(h)
    if not mesh.has_facet(o) or h < o:
        return _segment_values(nodes[2 * k], nodes[2 * k + 1])
    # mirror the canonical side
    g, k2 = o // 3, o % 3
    ng = fieldsamples.nodes(g)
    canonical = _segment_values(ng[2 * k2], ng[2 * k2 + 1])
    d0, d1 = nodes[2 * k], nodes[2 * k + 1]

    def local(t, snap):
        v = d0 + t * (d1 - d0)
        return _snap_level(v) if snap else v

    out = []
    for beh, t0, t1, b0, b1 in reversed(canonical):
        s0, s1 = 1.0 - t1, 1.0 - t0
        beh2 = _MIRROR[beh]
        if beh2.is_tangent:
            lv = local(0.5 * (s0 + s1), True)
            out.append((beh2, s0, s1, lv, lv))
        else:
            e0 = local(s0, b1 % 180.0 == 0.0)
            e1 = local(s1, b0 % 180.0 == 0.0)
            out.append((beh2, s0, s1, e0, e1))
    return out


class StreamMesh:
    """Stream mesh of one facet; built as a single main face, then decomposed."""

    def __init__(self, mesh, fieldsamples, facet):
        self.mesh = mesh
        self.field = fieldsamples
        self.facet = facet
        self.hs: list[StreamHalfedge] = []
        self.vertices: list[StreamVertex] = []
        self.faces: dict[int, StreamHalfedge] = {}
        self.main_face = 0
        self.split_count = 0
        self._border: list[StreamHalfedge] = []
        self._runs = None
        self._edge_pieces = None
        self._frame = mesh.frame(facet)
        self._init_border()

    # -- construction -------------------------------------------------------

    def _init_border(self):
        mesh, f = self.mesh, self.facet
        raw = []
        for ordinal in range(6):
            k = ordinal // 2
            element = ("edge", k) if ordinal % 2 == 0 else ("corner", k)
            for p in _segment_element(mesh, self.field, f, element):
                raw.append((ordinal,) + p)

        # drop zero-length tangent pieces duplicated at element junctions
        cleaned = []
        for item in raw:
            ordinal, beh, t0, t1, b0, b1 = item
            if cleaned:
                po, pbeh, pt0, pt1, _, _ = cleaned[-1]
                junction = ordinal != po and t0 == 0.0 and pt1 == 1.0
                if junction and beh.is_tangent and pbeh.is_tangent:
                    if t0 == t1:
                        continue  # keep the earlier piece
                    if pt0 == pt1:
                        cleaned.pop()
            cleaned.append(item)
        if len(cleaned) > 1:
            fo, fbeh, ft0, ft1, _, _ = cleaned[0]
            lo, lbeh, lt0, lt1, _, _ = cleaned[-1]
            if (
                fo != lo
                and ft0 == 0.0
                and lt1 == 1.0
                and fbeh.is_tangent
                and lbeh.is_tangent
            ):
                if ft0 == ft1:
                    cleaned.pop(0)
                elif lt0 == lt1:
                    cleaned.pop()

        for ordinal, beh, t0, t1, b0, b1 in cleaned:
            sh = StreamHalfedge(
                len(self.hs),
                "edge" if ordinal % 2 == 0 else "corner",
                beh,
                ordinal,
                t0,
                t1,
                b0,
                b1,
                self._piece_length(ordinal, t0, t1),
            )
            self.hs.append(sh)
            self._border.append(sh)

        n = len(self._border)
        if n == 0:
            raise StreamMeshError("empty facet border")
        for i, sh in enumerate(self._border):
            sh.nxt = self._border[(i + 1) % n]
            sh.prv = self._border[(i - 1) % n]
            sh.origin = self._make_vertex(sh.element, sh.t0, sh.b0)
            sh.face = 0
        for sh in self._border:
            sh.dest = sh.nxt.origin
        self.faces = {0: self._border[0]}

        flows = [sh.behavior for sh in self._border if not sh.behavior.is_tangent]
        if Behavior.IN not in flows or Behavior.OUT not in flows:
            raise StreamMeshError(
                f"facet {self.facet}: border lacks inflow or outflow"
            )
        groups, _, _ = self._groups_and_separators(0)
        self.initial_pairs = len(groups) // 2

    def _piece_length(self, ordinal, t0, t1):
        if ordinal % 2 == 1:
            return 0.0
        return float(self._frame.edge_lens[ordinal // 2]) * (t1 - t0)

    def _make_vertex(self, element, t, b_deg):
        pos = self._anchor_position(element, t)
        alpha = self._anchor_alpha_rad(element, t, b_deg)
        sv = StreamVertex(len(self.vertices), element, t, pos, alpha)
        self.vertices.append(sv)
        return sv

    def _anchor_position(self, element, t):
        mesh, f = self.mesh, self.facet
        k = element // 2
        vids = mesh.faces[f]
        if element % 2 == 0:
            p0 = mesh.vertices[vids[k]]
            p1 = mesh.vertices[vids[(k + 1) % 3]]
            return (1.0 - t) * p0 + t * p1
        return mesh.vertices[vids[(k + 1) % 3]].copy()

    def _anchor_alpha_rad(self, element, t, level_deg):
        """Field angle at a border anchor, in radians relative to r."""
        k = element // 2
        ang = self._frame.edge_angles[k]
        if element % 2 == 1:
            ang = ang + t * (math.pi - self._frame.betas[k])
        return math.radians(level_deg) + ang

    # -- face walking ------------------------------------------------------

    def face_cycle(self, face_id):
        start = self.faces[face_id]
        cycle = [start]
        sh = start.nxt
        guard = 0
        while sh is not start:
            cycle.append(sh)
            sh = sh.nxt
            guard += 1
            if guard > len(self.hs) + 1:
                raise StreamMeshError("broken face cycle")
        return cycle

    def _groups_and_separators(self, face_id):
        """Maximal same-direction flow groups and the tangent runs between.

        Returns (groups, seps, cycle): groups[i] is a list of cycle indices
        (flow pieces plus the tangents interleaved among them), seps[i] is
        the list of tangent cycle indices between groups[i-1] and groups[i].
        Groups alternate IN/OUT around the face.
        """
        cycle = self.face_cycle(face_id)
        n = len(cycle)
        flow_idx = [i for i, sh in enumerate(cycle) if not sh.behavior.is_tangent]
        if not flow_idx:
            raise StreamMeshError("face has no flow pieces")
        nf = len(flow_idx)
        # cyclic run starts over the flow subsequence
        marks = [
            j
            for j in range(nf)
            if cycle[flow_idx[j]].behavior != cycle[flow_idx[j - 1]].behavior
        ] or [0]
        groups = []
        seps = []
        for gi, mstart in enumerate(marks):
            mend = marks[(gi + 1) % len(marks)]
            count = (mend - mstart) % nf or nf
            first = flow_idx[mstart]
            last = flow_idx[(mstart + count - 1) % nf]
            members = []
            i = first
            while True:
                members.append(i)
                if i == last:
                    break
                i = (i + 1) % n
            groups.append(members)
        for gi in range(len(groups)):
            prev_last = groups[gi - 1][-1]
            first = groups[gi][0]
            sep = []
            i = (prev_last + 1) % n
            while i != first:
                if not cycle[i].behavior.is_tangent:
                    raise StreamMeshError("flow piece between separator tangents")
                sep.append(i)
                i = (i + 1) % n
            if len(groups) > 1 and not sep:
                raise StreamMeshError(
                    "adjacent opposite flow groups without a tangency"
                )
            seps.append(sep)
        return groups, seps, cycle

    def a_sequence(self, face_id=None):
        """Alternation profile of a face border, one value per flow group.

        Starts at 0 on an outflow group; steps by +1 or -1 per the type of
        the tangency separating consecutive groups.  Closes one period at
        -2, which reflects that the border direction gains a full turn per
        loop; strictly decreasing over the period means the face is simple.
        """
        if face_id is None:
            face_id = self.main_face
        groups, seps, cycle = self._groups_and_separators(face_id)
        if len(groups) % 2 != 0:
            raise StreamMeshError("flow groups do not alternate")
        start = None
        for gi, g in enumerate(groups):
            if cycle[g[0]].behavior == Behavior.OUT:
                start = gi
                break
        if start is None:
            raise StreamMeshError("face has no outflow group")
        seq = [0]
        a = 0
        m = len(groups)
        for j in range(1, m + 1):
            gi = (start + j) % m
            sep = seps[gi]
            sep_type = cycle[sep[0]].behavior if sep else None
            entering = cycle[groups[gi][0]].behavior
            if entering == Behavior.IN:
                a += 1 if sep_type == Behavior.TF else -1
            else:
                a += 1 if sep_type == Behavior.TB else -1
            seq.append(a)
        if seq[-1] != -2:
            raise StreamMeshError(
                f"malformed border: alternation closes at {seq[-1]}, not -2"
            )
        return seq[:-1]

    def is_simple(self, face_id):
        groups, _, _ = self._groups_and_separators(face_id)
        return len(groups) == 2

    # -- decomposition -------------------------------------------------------

    def split_step(self):
        """Carve one simple face off the main face; False if already simple.

        Finds three consecutive separators typed (Tf, Tb, Tb) around an
        outflow-then-inflow group pair, or the symmetric (Tb, Tf, Tf) around
        an inflow-then-outflow pair, splits the two outer tangents at their
        anchor midpoints and connects the split points with a chord.  The
        chord is typed incoming on the carved side and outgoing on the main
        side (swapped for the symmetric form).
        """
        groups, seps, cycle = self._groups_and_separators(self.main_face)
        m = len(groups)
        if m == 2:
            return False
        if m % 2 != 0:
            raise StreamMeshError("flow groups do not alternate")

        for gi in range(m):
            t_first = cycle[seps[gi][0]].behavior
            first_beh = cycle[groups[gi][0]].behavior
            t_mid = cycle[seps[(gi + 1) % m][0]].behavior
            t_last = cycle[seps[(gi + 2) % m][0]].behavior
            if (
                first_beh == Behavior.OUT
                and t_first == Behavior.TF
                and t_mid == Behavior.TB
                and t_last == Behavior.TB
            ):
                self._apply_split(gi, groups, seps, cycle, primal=True)
                return True
            if (
                first_beh == Behavior.IN
                and t_first == Behavior.TB
                and t_mid == Behavior.TF
                and t_last == Behavior.TF
            ):
                self._apply_split(gi, groups, seps, cycle, primal=False)
                return True
        raise StreamMeshError("no splittable tangency pattern on non-simple face")

    def _apply_split(self, gi, groups, seps, cycle, primal):
        m = len(groups)
        first_run = seps[gi]
        last_run = seps[(gi + 2) % m]
        # split the tangent adjacent to the carved group pair on each side
        sh_a = cycle[first_run[-1]]
        sh_b = cycle[last_run[0]]
        a2 = self._split_tangent(sh_a)  # sh_a keeps [t0,tm], a2 is [tm,t1]
        b2 = self._split_tangent(sh_b)

        sv1 = a2.origin  # split point on the leading tangent
        sv2 = b2.origin  # split point on the trailing tangent
        p1 = sv1.position
        p2 = sv2.position
        chord_vec = p1 - p2
        clen = float(np.linalg.norm(chord_vec))
        if clen <= 0.0:
            raise StreamMeshError("degenerate zero-length chord")

        if primal:
            ext_beh, main_beh = Behavior.IN, Behavior.OUT
        else:
            ext_beh, main_beh = Behavior.OUT, Behavior.IN

        # carved side runs sv2 -> sv1; the main side mirrors it bit-exactly
        ext = self._make_chord(sv2, sv1, ext_beh)
        mainc = self._mirror_chord(ext, main_beh)
        ext.opp = mainc
        mainc.opp = ext

        # relink: carved cycle is a2 ... sh_b, closed by ext
        sh_b.nxt = ext
        ext.prv = sh_b
        ext.nxt = a2
        a2.prv = ext
        # main cycle: sh_a, mainc, b2
        sh_a.nxt = mainc
        mainc.prv = sh_a
        mainc.nxt = b2
        b2.prv = mainc

        new_id = len(self.faces)
        sh = ext
        while True:
            sh.face = new_id
            sh = sh.nxt
            if sh is ext:
                break
        self.faces[new_id] = ext
        mainc.face = self.main_face
        self.faces[self.main_face] = mainc
        self.split_count += 1

    def _split_tangent(self, sh):
        if not sh.behavior.is_tangent:
            raise StreamMeshError("split target is not a tangent piece")
        tm = 0.5 * (sh.t0 + sh.t1)
        second = StreamHalfedge(
            len(self.hs),
            sh.kind,
            sh.behavior,
            sh.element,
            tm,
            sh.t1,
            sh.b1,
            sh.b1,
            self._piece_length(sh.element, tm, sh.t1),
        )
        self.hs.append(second)
        sv = self._make_vertex(sh.element, tm, sh.b0)
        second.origin = sv
        second.dest = sh.dest
        second.nxt = sh.nxt
        second.prv = sh
        second.face = sh.face
        sh.nxt.prv = second
        sh.nxt = second
        sh.dest = sv
        sh.t1 = tm
        sh.b1 = sh.b0
        sh.length = self._piece_length(sh.element, sh.t0, tm)
        i = self._border.index(sh)
        self._border.insert(i + 1, second)
        return second

    def _make_chord(self, sv_from, sv_to, behavior):
        alpha0 = sv_from.alpha
        alpha1 = sv_to.alpha
        d = sv_to.position - sv_from.position
        ang = math.atan2(
            float(np.dot(d, self._frame.v)), float(np.dot(d, self._frame.u))
        )
        b0 = self._reduce_to_band(alpha0 - ang, behavior)
        b1 = self._reduce_to_band(alpha1 - ang, behavior)
        sh = StreamHalfedge(
            len(self.hs),
            "chord",
            behavior,
            None,
            0.0,
            1.0,
            math.degrees(b0),
            math.degrees(b1),
            float(np.linalg.norm(d)),
        )
        self.hs.append(sh)
        sh.origin = sv_from
        sh.dest = sv_to
        return sh

    def _mirror_chord(self, twin, behavior):
        """Reversed copy of a chord: same angles shifted a half turn."""
        sh = StreamHalfedge(
            len(self.hs),
            "chord",
            behavior,
            None,
            0.0,
            1.0,
            twin.b1 - 180.0,
            twin.b0 - 180.0,
            twin.length,
        )
        self.hs.append(sh)
        sh.origin = twin.dest
        sh.dest = twin.origin
        return sh

    def _reduce_to_band(self, b_rad, behavior):
        """Reduce a real angle into [0, pi] for IN or [pi, 2 pi] for OUT.

        Chord endpoints are border tangencies, so the value may sit exactly
        on a band end (field along the chord itself); the representative is
        then chosen on the band, e.g. a hair below 0 becomes 2 pi for OUT.
        """
        m = b_rad % (2.0 * math.pi)
        lo, hi = (0.0, math.pi) if behavior == Behavior.IN else (math.pi, 2 * math.pi)
        tol = 1e-9
        for cand in (m, m - 2.0 * math.pi, m + 2.0 * math.pi):
            if lo - tol <= cand <= hi + tol:
                return min(max(cand, lo), hi)
        raise StreamMeshError(
            f"chord angle {m} rad falls outside its {behavior.value} band"
        )

    # -- finalized queries ---------------------------------------------------

    def finalize(self):
        """Freeze after decomposition: build run tables and edge piece maps."""
        from . import flux

        self._runs = {}
        for face_id in self.faces:
            groups, seps, cycle = self._groups_and_separators(face_id)
            if len(groups) != 2:
                raise StreamMeshError(f"face {face_id} is not simple")
            runs = {}
            for g in groups:
                pieces = [cycle[i] for i in g]
                beh = cycle[g[0]].behavior
                totals = np.array(
                    [
                        0.0 if sh.behavior.is_tangent else flux.phi(sh, 1.0)
                        for sh in pieces
                    ]
                )
                runs[beh] = Run(pieces, totals)
            if runs[Behavior.IN].total <= 0.0 or runs[Behavior.OUT].total <= 0.0:
                raise StreamMeshError(
                    f"simple face {face_id} has a zero-flux run"
                )
            self._runs[face_id] = runs
        self._edge_pieces = {k: [] for k in range(3)}
        self._corner_pieces = {k: [] for k in range(3)}
        for sh in self._border:
            if sh.element % 2 == 0:
                self._edge_pieces[sh.element // 2].append(sh)
            else:
                self._corner_pieces[sh.element // 2].append(sh)
        return self

    def face_runs(self, face_id):
        if self._runs is None:
            raise StreamMeshError("stream mesh not finalized")
        return self._runs[face_id]

    # -- conversions ---------------------------------------------------------

    def import_position(self, halfedge, c):
        """Map a mesh border point into the stream mesh: (piece, local c).

        ``halfedge`` must bound this facet (either side of the edge is
        accepted; the parameter is reoriented to the facet's own halfedge).
        Points landing on a tangency resolve to the endpoint of the adjacent
        inflow piece; landing strictly inside an outflow piece is an error.
        """
        mesh = self.mesh
        if mesh.facet(halfedge) == self.facet:
            k = halfedge % 3
            t = c
        else:
            o = mesh.opposite(halfedge)
            if mesh.facet(o) != self.facet:
                raise StreamMeshError(
                    f"halfedge {halfedge} does not bound facet {self.facet}"
                )
            k = o % 3
            t = 1.0 - c
        if not -VERTEX_SNAP <= t <= 1.0 + VERTEX_SNAP:
            raise StreamMeshError(f"entry parameter {t} outside [0, 1]")
        t = min(1.0, max(0.0, t))
        pieces = self._edge_pieces[k]
        touching = [sh for sh in pieces if sh.t0 <= t <= sh.t1]
        for sh in touching:
            if sh.behavior == Behavior.IN:
                if sh.t1 == sh.t0:
                    return sh, 0.0
                return sh, (t - sh.t0) / (sh.t1 - sh.t0)
        for sh in touching:
            if sh.behavior.is_tangent:
                return self._resolve_tangent_entry(sh)
        if touching:
            raise StreamMeshError(
                f"entry at edge {k} t={t} lands in an outflow interval"
            )
        raise StreamMeshError(f"no border piece covers edge {k} t={t}")

    def _resolve_tangent_entry(self, sh):
        """Snap a tangency entry to the endpoint of the adjacent inflow piece.

        A point on a forward tangency slides with the border orientation, so
        the forward neighbor is preferred; backward tangencies prefer the
        backward neighbor.  Walks use border adjacency, not face adjacency,
        so split tangents resolve across chord junctions correctly.
        """
        i = self._border.index(sh)
        n = len(self._border)
        fwd = next(
            self._border[(i + d) % n]
            for d in range(1, n)
            if not self._border[(i + d) % n].behavior.is_tangent
        )
        bwd = next(
            self._border[(i - d) % n]
            for d in range(1, n)
            if not self._border[(i - d) % n].behavior.is_tangent
        )
        order = [(fwd, 0.0), (bwd, 1.0)]
        if sh.behavior == Behavior.TB:
            order.reverse()
        for cand, c in order:
            if cand.behavior == Behavior.IN:
                return cand, c
        raise StreamMeshError("tangency entry with no adjacent inflow")

    def corner_entry(self, k, t):
        """Entry into the facet through corner k at corner parameter t.

        Used when a streamline starts at a vertex: the flow enters the facet
        through the corner's inflow piece rather than across an edge.
        """
        if self._edge_pieces is None:
            raise StreamMeshError("stream mesh not finalized")
        touching = [sh for sh in self._corner_pieces[k] if sh.t0 <= t <= sh.t1]
        for sh in touching:
            if sh.behavior == Behavior.IN:
                if sh.t1 == sh.t0:
                    return sh, 0.0
                return sh, (t - sh.t0) / (sh.t1 - sh.t0)
        for sh in touching:
            if sh.behavior.is_tangent:
                return self._resolve_tangent_entry(sh)
        raise StreamMeshError(
            f"corner {k} t={t} of facet {self.facet} is not an inflow"
        )

    def export_position(self, sh, c):
        """Map a stream-mesh border point back to the mesh: a TracePoint.

        Edge pieces yield (facet halfedge, t on it); exits through a surface
        boundary edge are flipped to the outside halfedge so the returned
        point's halfedge has no facet.  Corner pieces only terminate
        streamlines (absorbing corners); they yield the halfedge pointing at
        the corner vertex with c = 1 + t as terminal encoding.  Chords
        cannot be exported.
        """
        if sh.kind == "chord":
            raise StreamMeshError("cannot export a chord position")
        t = sh.anchor_t(c)
        k = sh.element // 2
        if sh.kind == "edge":
            h = 3 * self.facet + k
            o = self.mesh.opposite(h)
            if not self.mesh.has_facet(o):
                return TracePoint(o, 1.0 - t)
            return TracePoint(h, t)
        return TracePoint(3 * self.facet + k, 1.0 + t)

    # -- diagnostics -----------------------------------------------------------

    def dump(self):
        """Stable text form: border pieces in order, then chords per face."""
        names = {0: "edge0", 1: "corner0", 2: "edge1", 3: "corner1", 4: "edge2", 5: "corner2"}
        lines = []
        for sh in self._border:
            lines.append(
                f"{names[sh.element]} [{sh.t0:.12g}, {sh.t1:.12g}] "
                f"{sh.behavior.value} face{sh.face}"
            )
        for sh in self.hs:
            if sh.kind == "chord":
                lines.append(
                    f"chord face{sh.face} ({names[sh.origin.element]} "
                    f"t={sh.origin.t:.12g}) -> ({names[sh.dest.element]} "
                    f"t={sh.dest.t:.12g}) {sh.behavior.value}"
                )
        return "\n".join(lines) + "\n"


def init_main_face(mesh, fieldsamples, facet) -> StreamMesh:
    """Segment a facet border into one (possibly non-simple) stream face."""
    return StreamMesh(mesh, fieldsamples, facet)


def decompose(mesh, fieldsamples, facet) -> StreamMesh:
    """Fully decompose a facet into simple stream faces.

    The number of splits is always (initial inflow/outflow pair count) - 1;
    the iteration cap of 3 + 2 x (initial tangent piece count) exists only
    to turn a logic error into a loud failure instead of a hang.
    """
    sm = StreamMesh(mesh, fieldsamples, facet)
    tangents = sum(1 for sh in sm._border if sh.behavior.is_tangent)
    cap = 3 + 2 * tangents
    n = 0
    while sm.split_step():
        n += 1
        if n > cap:
            raise StreamMeshError(
                f"decomposition of facet {facet} exceeded {cap} splits"
            )
    return sm.finalize()
