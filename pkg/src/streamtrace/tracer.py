"""Streamline tracing over decomposed facets.

A streamline is advanced one facet at a time: the entry point is imported
into the facet's stream mesh, carried across simple faces by flux ratio
(hopping chords between faces as needed), and exported back to a mesh
border point.  No step size exists anywhere; a crossing is one closed-form
evaluation per simple face traversed.

Crossings of two traced lines inside a facet are impossible by construction
(each simple face maps the inflow interval monotonically onto the outflow
interval); ``check_crossings`` verifies that property on traced output.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from . import flux, stream_mesh
from .errors import StreamMeshError, TraceError
from .field import vertex_index
from .mesh import TracePoint
from .stream_mesh import Behavior, VERTEX_SNAP

ORBIT_TOL = 1e-9


@dataclass(frozen=True)
class Seed:
    """A trace start: a border point, or a vertex with a chosen corner sector."""

    point: TracePoint
    direction: str = "forward"
    corner_entry: tuple | None = None  # (facet, corner k, corner parameter)


class Polyline:
    """Traced streamline: border points in order plus the termination cause."""

    def __init__(self, seed):
        self.seed = seed
        self.points: list[TracePoint] = []
        self.positions: list[np.ndarray] = []
        self.termination = None
        self.sink_vertex = None

    def append(self, tp, pos):
        self.points.append(tp)
        self.positions.append(np.asarray(pos, dtype=float))

    def __len__(self):
        return len(self.points)

    def to_record(self):
        return {
            "seed": {
                "halfedge": self.seed.point.halfedge,
                "c": self.seed.point.c,
                "direction": self.seed.direction,
            },
            "termination": self.termination,
            "sink_vertex": self.sink_vertex,
            "points": [[tp.halfedge, tp.c] for tp in self.points],
            "positions": [[float(x) for x in p] for p in self.positions],
        }

    @classmethod
    def from_record(cls, rec):
        seed = Seed(
            TracePoint(rec["seed"]["halfedge"], rec["seed"]["c"]),
            rec["seed"].get("direction", "forward"),
        )
        pl = cls(seed)
        pl.termination = rec["termination"]
        pl.sink_vertex = rec.get("sink_vertex")
        for (h, c), pos in zip(rec["points"], rec["positions"]):
            pl.append(TracePoint(h, c), np.array(pos))
        return pl


def save_polylines(path, polylines):
    with open(path, "w") as fh:
        for pl in polylines:
            fh.write(json.dumps(pl.to_record()) + "\n")


def load_polylines(path):
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(Polyline.from_record(json.loads(line)))
    return out


class Tracer:
    """Holds per-facet stream-mesh caches for both trace directions."""

    def __init__(self, mesh, fieldsamples, max_steps=None):
        self.mesh = mesh
        self._fields = {
            "forward": fieldsamples,
            "backward": fieldsamples.flipped(),
        }
        self.max_steps = max_steps if max_steps else 100 * mesh.n_facets
        self._cache = {}

    def field(self, direction="forward"):
        return self._fields[direction]

    def stream_mesh(self, facet, direction="forward"):
        key = (facet, direction)
        sm = self._cache.get(key)
        if sm is None:
            sm = stream_mesh.decompose(self.mesh, self._fields[direction], facet)
            self._cache[key] = sm
        return sm

    # -- facet crossing ------------------------------------------------------

    def cross_facet(self, sm, sh, c):
        """Carry an entry (piece, c) to the exit border piece of the facet.

        Each simple face preserves the flux fraction: the exit splits the
        outflow total in the same ratio the entry splits the inflow total,
        measured from the shared bounding tangency.  Chord exits hop into
        the neighboring simple face with the parameter reversed.
        """
        hops = 0
        while True:
            runs = sm.face_runs(sh.face)
            rin = runs[Behavior.IN]
            rout = runs[Behavior.OUT]
            xin = flux.accumulate(rin, sh, c)
            ratio = min(1.0, max(0.0, xin / rin.total))
            out_sh, c_out = flux.locate(rout, rout.total * (1.0 - ratio))
            if out_sh.kind != "chord":
                return out_sh, c_out
            sh, c = out_sh.opp, 1.0 - c_out
            hops += 1
            if hops > len(sm.faces) + 1:
                raise TraceError(
                    f"facet {sm.facet}: chord hopping failed to reach the border"
                )

    # -- the main loop ---------------------------------------------------------

    def trace(self, seed) -> Polyline:
        mesh = self.mesh
        direction = seed.direction
        if direction not in self._fields:
            raise TraceError(f"unknown trace direction {direction!r}")
        pl = Polyline(seed)
        tp0 = seed.point
        pl.append(tp0, mesh.position(tp0))

        entry = None  # (stream mesh, piece, local c)
        if seed.corner_entry is not None:
            f, k, tc = seed.corner_entry
            sm = self.stream_mesh(f, direction)
            sh, csm = sm.corner_entry(k, tc)
            entry = (sm, sh, csm)
            h = c = None
        else:
            h, c = tp0.halfedge, tp0.c
            if not mesh.has_facet(h):
                h, c = mesh.opposite(h), 1.0 - c
                if not mesh.has_facet(h):
                    raise TraceError("seed halfedge bounds no facet")

        visited = defaultdict(list)
        pivot_vertex = None
        pivot_count = 0
        steps = 0

        while True:
            if entry is None:
                f = mesh.facet(h)
                sm = self.stream_mesh(f, direction)
                try:
                    sh, csm = sm.import_position(h, c)
                except StreamMeshError:
                    if steps == 0 and mesh.has_facet(mesh.opposite(h)):
                        # seed placed on the downstream side of its edge
                        h, c = mesh.opposite(h), 1.0 - c
                        sm = self.stream_mesh(mesh.facet(h), direction)
                        sh, csm = sm.import_position(h, c)
                    else:
                        raise
                entry = (sm, sh, csm)

            sm, sh, csm = entry
            entry = None
            out_sh, c_out = self.cross_facet(sm, sh, csm)
            tp = sm.export_position(out_sh, c_out)

            if tp.c > 1.0:
                pl.append(tp, mesh.position(tp))
                pl.termination = "sink-vertex"
                pl.sink_vertex = mesh.dest(tp.halfedge)
                return pl

            c_exit = tp.c
            if c_exit < VERTEX_SNAP:
                c_exit = 0.0
            elif c_exit > 1.0 - VERTEX_SNAP:
                c_exit = 1.0
            tp = TracePoint(tp.halfedge, c_exit)
            pl.append(tp, mesh.position(tp))

            for prev_c in visited[tp.halfedge]:
                if abs(prev_c - c_exit) <= ORBIT_TOL:
                    pl.termination = "closed-orbit"
                    return pl
            visited[tp.halfedge].append(c_exit)

            steps += 1
            if steps >= self.max_steps:
                pl.termination = "step-cap"
                return pl

            if not mesh.has_facet(tp.halfedge):
                # export flipped the point outward: surface boundary reached
                pl.termination = "boundary"
                return pl

            if c_exit == 0.0 or c_exit == 1.0:
                v = (
                    mesh.dest(tp.halfedge)
                    if c_exit == 1.0
                    else mesh.origin(tp.halfedge)
                )
                if v == pivot_vertex:
                    pivot_count += 1
                else:
                    pivot_vertex, pivot_count = v, 1
                if pivot_count > mesh.vertex_valence(v):
                    pl.termination = "vertex-stall"
                    return pl
                result = self._pivot_at_vertex(tp, c_exit, v, direction)
                if result is None:
                    pl.termination = "vertex-stall"
                    return pl
                if result == "boundary":
                    pl.termination = "boundary"
                    return pl
                entry = result
            else:
                pivot_vertex, pivot_count = None, 0
                h, c = mesh.opposite(tp.halfedge), 1.0 - c_exit

    def _pivot_at_vertex(self, tp, c_exit, v, direction):
        """Continue a trace that exited exactly at a vertex.

        Walks the facet fan around the vertex, attempting entry at the
        vertex end of each shared edge; the mirrored segmentation guarantees
        an inflow opens somewhere unless the flow genuinely stalls.
        """
        mesh = self.mesh
        h_at = tp.halfedge if c_exit == 1.0 else mesh.prev(tp.halfedge)
        tries = mesh.vertex_valence(v)
        for _ in range(tries):
            e = mesh.opposite(h_at)
            if not mesh.has_facet(e):
                return "boundary"
            sm = self.stream_mesh(mesh.facet(e), direction)
            try:
                sh, csm = sm.import_position(e, 0.0)
                return sm, sh, csm
            except StreamMeshError:
                h_at = mesh.prev(e)
        return None


def handle_vertex_crossing(tracer, tp, direction="forward"):
    """Resolve a border point at a vertex (c within 1e-12 of 0 or 1) to the
    facet fan entry that accepts the flow; None means the flow stalls."""
    mesh = tracer.mesh
    c = tp.c
    if min(abs(c), abs(c - 1.0)) > VERTEX_SNAP:
        raise TraceError(f"point c={c} is not at a vertex")
    c_exit = 0.0 if abs(c) <= VERTEX_SNAP else 1.0
    v = mesh.dest(tp.halfedge) if c_exit == 1.0 else mesh.origin(tp.halfedge)
    result = tracer._pivot_at_vertex(
        TracePoint(tp.halfedge, c_exit), c_exit, v, direction
    )
    if result is None or result == "boundary":
        return None
    return result


# -- separatrix seeding ---------------------------------------------------------


def _fan_corners(mesh, v):
    """(facet, corner k) pairs around an interior vertex, in fan order."""
    h0 = None
    for h in mesh.outgoing_halfedges(v):
        if mesh.has_facet(h):
            h0 = h
            break
    if h0 is None:
        raise TraceError(f"vertex {v} has no incident facet")
    out = []
    h = h0
    while True:
        f = mesh.facet(h)
        out.append((f, (h % 3 + 2) % 3))
        h = mesh.opposite(mesh.prev(h))
        if h == h0:
            break
        if not mesh.has_facet(h):
            raise TraceError(f"vertex {v} is on the boundary")
    return out


def seed_from_vertex(mesh, fieldsamples, v, direction="forward"):
    """Separatrix seeds at a vertex: one per direction the field leaves it.

    Within corner k of a facet the field angle relative to the rotating
    border direction interpolates linearly, while the outward radial
    direction sits at 180 (1 - t) relative to the same reference; their
    alignment roots are the directions a streamline can leave the vertex.
    A positive-index vertex emits streamlines in every direction, which has
    no finite seed set, so it is refused.
    """
    if direction not in ("forward", "backward"):
        raise TraceError(f"unknown trace direction {direction!r}")
    idx = vertex_index(mesh, fieldsamples, v)
    if idx > 1e-9:
        raise TraceError(
            f"vertex {v} has positive index {idx:.3f}: "
            "its separatrix family is infinite"
        )
    fs = fieldsamples if direction == "forward" else fieldsamples.flipped()
    corners = _fan_corners(mesh, v)
    events = []  # (fan position, facet, corner k, t)
    for fan_i, (f, k) in enumerate(corners):
        nodes = fs.nodes(f)
        b0 = nodes[2 * k + 1]
        b1 = nodes[2 * k + 2]
        slope = (b1 - b0) + 180.0
        g0 = b0 - 180.0
        if slope == 0.0:
            if g0 % 360.0 == 0.0:
                raise TraceError(
                    f"field is radial across a whole corner of vertex {v}"
                )
            continue
        lo, hi = sorted((g0, g0 + slope))
        # pad the level window: a root exactly on a corner end can fall one
        # ulp outside it, the t check below still rejects real outsiders
        m0 = math.ceil(lo / 360.0 - 1e-9)
        m1 = math.floor(hi / 360.0 + 1e-9)
        for m in range(m0, m1 + 1):
            t = (360.0 * m - g0) / slope
            if -1e-9 <= t <= 1.0 + 1e-9:
                t = min(1.0, max(0.0, t))
                # the fan walk runs against in-corner t: the t = 0 end of
                # one corner is the t = 1 end of the next
                events.append((fan_i + (1.0 - t), f, k, t))
    events.sort()
    seeds = []
    n = len(corners)
    for pos, f, k, t in events:
        if seeds and pos - seeds[-1][0] <= 1e-9:
            continue
        seeds.append((pos, f, k, t))
    # wraparound duplicate: last event at fan end == first at fan start
    if len(seeds) > 1 and (seeds[0][0] + n) - seeds[-1][0] <= 1e-9:
        seeds.pop()
    return [
        Seed(TracePoint(3 * f + k, 1.0), direction, corner_entry=(f, k, t))
        for _, f, k, t in seeds
    ]


# -- crossing verification ------------------------------------------------------


@dataclass(frozen=True)
class CrossingViolation:
    facet: int
    line_a: int
    segment_a: int
    line_b: int
    segment_b: int

    def __str__(self):
        return (
            f"facet {self.facet}: line {self.line_a} segment {self.segment_a} "
            f"crosses line {self.line_b} segment {self.segment_b}"
        )


def _border_key(mesh, facet, tp):
    """Map a trace point on the facet border to a cyclic coordinate in [0, 3)."""
    h = tp.halfedge
    if tp.c > 1.0:
        return (h % 3 + 1.0) % 3.0  # absorbing corner: the vertex itself
    if mesh.facet(h) == facet:
        return h % 3 + tp.c
    o = mesh.opposite(h)
    if mesh.facet(o) == facet:
        return o % 3 + (1.0 - tp.c)
    # vertex pivots connect through a vertex shared with the facet
    if tp.c == 0.0 or tp.c == 1.0:
        v = mesh.dest(h) if tp.c == 1.0 else mesh.origin(h)
        verts = list(mesh.faces[facet])
        if v in verts:
            return float(verts.index(v))
    raise TraceError(f"trace point {tp} does not touch facet {facet}")


def _in_open_arc(x, a, b):
    span = (b - a) % 3.0
    pos = (x - a) % 3.0
    return 0.0 < pos < span


def check_crossings(mesh, polylines):
    """Pairwise interleaving test of traced segments inside each facet.

    Two segments whose endpoints strictly interleave around the facet border
    must cross; segments sharing an endpoint are tangential meetings and are
    allowed.  Returns the violations found (empty when the no-crossing
    guarantee holds).
    """
    by_facet = defaultdict(list)
    for li, pl in enumerate(polylines):
        pts = pl.points
        for si in range(len(pts) - 1):
            tp_a, tp_b = pts[si], pts[si + 1]
            f = mesh.facet(tp_b.halfedge)
            if f is None:
                f = mesh.facet(mesh.opposite(tp_b.halfedge))
            ka = _border_key(mesh, f, tp_a)
            kb = _border_key(mesh, f, tp_b)
            if ka == kb:
                continue
            by_facet[f].append((ka, kb, li, si))
    violations = []
    eps = 1e-12
    for f, segs in by_facet.items():
        for i in range(len(segs)):
            a1, b1, l1, s1 = segs[i]
            for j in range(i + 1, len(segs)):
                a2, b2, l2, s2 = segs[j]
                shared = any(
                    min((p - q) % 3.0, (q - p) % 3.0) <= eps
                    for p in (a1, b1)
                    for q in (a2, b2)
                )
                if shared:
                    continue
                if _in_open_arc(a2, a1, b1) != _in_open_arc(b2, a1, b1):
                    violations.append(CrossingViolation(f, l1, s1, l2, s2))
    return violations
