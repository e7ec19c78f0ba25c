"""Command-line front end.

Subcommands: validate, trace, bench, synth, check-crossings.
Exit codes: 0 ok, 1 property failure (violations found), 2 input error.
Parallelism for trace campaigns is capped by STREAMTRACE_THREADS (default 1);
results are aggregated in seed order either way, so output is deterministic.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dfield

import numpy as np

from . import meshgen
from .errors import FieldError, MeshError, StreamMeshError, TraceError
from .field import load_field, save_field, synth_field, validate, vertex_index
from .mesh import SurfaceMesh, TracePoint, load_obj, save_obj
from .rk4 import RK4Config, rk4_trace
from .tracer import Seed, Tracer, check_crossings, save_polylines, load_polylines, seed_from_vertex


@dataclass
class RunReport:
    polylines: int = 0
    crossings: int = 0
    terminations: dict = dfield(default_factory=dict)
    rejected_seeds: int = 0
    total_time: float = 0.0
    median_crossing_time: float = 0.0
    violations: int = 0

    def print(self, out=sys.stdout):
        out.write(f"polylines:            {self.polylines}\n")
        out.write(f"facet crossings:      {self.crossings}\n")
        for reason in sorted(self.terminations):
            out.write(f"  ended by {reason}: {self.terminations[reason]}\n")
        if self.rejected_seeds:
            out.write(f"rejected seeds:       {self.rejected_seeds}\n")
        out.write(f"total time:           {self.total_time:.3f} s\n")
        if self.median_crossing_time:
            out.write(
                f"median per crossing:  {self.median_crossing_time * 1e6:.1f} us\n"
            )
        out.write(f"crossing violations:  {self.violations}\n")


def _load_inputs(args):
    mesh = load_obj(args.mesh)
    fs = load_field(args.field, mesh)
    return mesh, fs


def _thread_count():
    try:
        n = int(os.environ.get("STREAMTRACE_THREADS", "1"))
    except ValueError:
        return 1
    return max(1, n)


# -- seeding -----------------------------------------------------------------


def _boundary_loop_seeds(mesh, n):
    """n seeds spaced by arc length along the surface boundary."""
    loops = []
    seen = set()
    for h in range(mesh.n_halfedges):
        if mesh.has_facet(h) or h in seen:
            continue
        loop = []
        cur = h
        while True:
            seen.add(cur)
            loop.append(cur)
            cur = mesh.next(cur)
            if cur == h:
                break
        loops.append(loop)
    segs = [(h, mesh.edge_length(h)) for loop in loops for h in loop]
    total = sum(l for _, l in segs)
    seeds = []
    targets = [(i + 0.5) * total / n for i in range(n)]
    acc = 0.0
    ti = 0
    for h, l in segs:
        while ti < n and targets[ti] <= acc + l:
            c = (targets[ti] - acc) / l
            seeds.append(Seed(TracePoint(h, c)))
            ti += 1
        acc += l
    return seeds


def _spread_edge_seeds(mesh, n):
    """n seeds spread over the mesh's undirected edges (closed meshes)."""
    canon = [
        h
        for h in range(mesh.n_interior_halfedges)
        if not mesh.has_facet(mesh.opposite(h)) or h < mesh.opposite(h)
    ]
    idx = np.linspace(0, len(canon) - 1, n).round().astype(int)
    return [Seed(TracePoint(canon[i], 0.5)) for i in idx]


def make_seeds(mesh, fs, args):
    direction = getattr(args, "direction", "forward")
    if getattr(args, "seed_points", None):
        seeds = []
        for tok in args.seed_points.split(","):
            h_s, c_s = tok.split(":")
            seeds.append(Seed(TracePoint(int(h_s), float(c_s)), direction))
        return seeds
    if getattr(args, "seed_singularities", False):
        seeds = []
        for v in range(mesh.n_vertices):
            if mesh.is_boundary_vertex(v):
                continue
            idx = vertex_index(mesh, fs, v)
            if idx > 1e-9:
                continue
            if abs(idx) <= 1e-9 and not _has_vertex_tangency(mesh, fs, v):
                continue
            for d in ("forward", "backward"):
                seeds.extend(seed_from_vertex(mesh, fs, v, d))
        return seeds
    n = getattr(args, "seeds", None) or 20
    boundary = [h for h in range(mesh.n_halfedges) if not mesh.has_facet(h)]
    base = (
        _boundary_loop_seeds(mesh, n) if boundary else _spread_edge_seeds(mesh, n)
    )
    if direction != "forward":
        base = [Seed(s.point, direction) for s in base]
    return base


def _has_vertex_tangency(mesh, fs, v):
    for h in mesh.outgoing_halfedges(v):
        f = mesh.facet(h)
        if f is None:
            continue
        k = h % 3
        if fs.nodes(f)[2 * k] % 180.0 == 0.0:
            return True
    return False


# -- trace running ------------------------------------------------------------


def _run_campaign(mesh, fs, seeds, engine, rk4_h, max_steps=None):
    report = RunReport()
    polylines = []
    per_line = []
    tracer = Tracer(mesh, fs, max_steps=max_steps)
    cfg = RK4Config(step_fraction=rk4_h) if rk4_h else RK4Config()

    def run_one(seed):
        t0 = time.perf_counter()
        try:
            if engine == "rk4":
                pl = rk4_trace(mesh, fs, seed, cfg, direction=seed.direction)
            else:
                pl = tracer.trace(seed)
        except (TraceError, StreamMeshError) as exc:
            return None, 0.0, exc
        return pl, time.perf_counter() - t0, None

    t_start = time.perf_counter()
    workers = _thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, seeds))
    else:
        results = [run_one(s) for s in seeds]
    report.total_time = time.perf_counter() - t_start

    for pl, dt, exc in results:
        if pl is None:
            report.rejected_seeds += 1
            continue
        polylines.append(pl)
        nx = max(1, len(pl.points) - 1)
        report.crossings += nx
        per_line.append(dt / nx)
        report.terminations[pl.termination] = (
            report.terminations.get(pl.termination, 0) + 1
        )
    report.polylines = len(polylines)
    if per_line:
        report.median_crossing_time = statistics.median(per_line)
    return polylines, report


# -- exporters ----------------------------------------------------------------


def write_svg(path, mesh, polylines):
    z = mesh.vertices[:, 2]
    if z.size and (z.max() != 0.0 or z.min() != 0.0):
        raise MeshError("SVG export requires an all-zero z extent")
    lo = mesh.vertices[:, :2].min(axis=0)
    hi = mesh.vertices[:, :2].max(axis=0)
    span = max(float((hi - lo).max()), 1e-12)
    margin = 0.05 * span
    lo = lo - margin
    size = (hi - lo) + margin

    def pt(p):
        x = (p[0] - lo[0]) / span * 1000.0
        y = (size[1] - (p[1] - lo[1])) / span * 1000.0
        return f"{x:.2f},{y:.2f}"

    palette = ["#d33", "#36c", "#293", "#a3c", "#e80", "#087"]
    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="0 0 {size[0] / span * 1000:.1f} {size[1] / span * 1000:.1f}">'
    ]
    drawn = set()
    for h in range(mesh.n_halfedges):
        o = mesh.opposite(h)
        key = (min(h, o), max(h, o))
        if key in drawn:
            continue
        drawn.add(key)
        a = mesh.vertices[mesh.origin(h)]
        b = mesh.vertices[mesh.dest(h)]
        parts.append(
            f'<line x1="{pt(a).split(",")[0]}" y1="{pt(a).split(",")[1]}" '
            f'x2="{pt(b).split(",")[0]}" y2="{pt(b).split(",")[1]}" '
            'stroke="#ddd" stroke-width="0.7"/>'
        )
    for i, pl in enumerate(polylines):
        pts = " ".join(pt(p) for p in pl.positions)
        color = palette[i % len(palette)]
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            'stroke-width="1.6"/>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def write_obj_polylines(path, polylines):
    save_obj(path, None, polylines=[pl.positions for pl in polylines])


# -- subcommands ----------------------------------------------------------------


def cmd_validate(args):
    mesh, fs = _load_inputs(args)
    violations = validate(mesh, fs)
    for v in violations:
        print(v)
    print(f"{len(violations)} violation(s)")
    return 1 if violations else 0


def cmd_trace(args):
    mesh, fs = _load_inputs(args)
    seeds = make_seeds(mesh, fs, args)
    if not seeds:
        print("no seeds produced", file=sys.stderr)
        return 2
    polylines, report = _run_campaign(
        mesh, fs, seeds, args.engine, args.rk4_h, args.max_steps
    )
    violations = check_crossings(mesh, polylines)
    report.violations = len(violations)
    save_polylines(args.out, polylines)
    if args.svg:
        write_svg(args.svg, mesh, polylines)
    if args.obj:
        write_obj_polylines(args.obj, polylines)
    report.print()
    for v in violations[:20]:
        print(v)
    return 1 if violations else 0


def cmd_bench(args):
    mesh, fs = _load_inputs(args)
    seeds = make_seeds(mesh, fs, args)
    # cold pass builds decompositions, warm pass measures the hot path
    _, cold = _run_campaign(mesh, fs, seeds, "stream", None)
    _, warm = _run_campaign(mesh, fs, seeds, "stream", None)
    stream_t = min(cold.median_crossing_time, warm.median_crossing_time)

    rk4_h = args.rk4_h or 0.1
    t0 = time.perf_counter()
    rk4_steps = 0
    cfg = RK4Config(step_fraction=rk4_h)
    for s in seeds:
        pl = rk4_trace(mesh, fs, s, cfg, direction=s.direction)
        rk4_steps += getattr(pl, "rk4_steps", max(1, len(pl.points) - 1))
    rk4_total = time.perf_counter() - t0
    rk4_per_step = rk4_total / max(1, rk4_steps)

    print(f"stream: median {stream_t * 1e6:.2f} us per facet crossing")
    print(f"        (cold {cold.median_crossing_time * 1e6:.2f} us, "
          f"warm {warm.median_crossing_time * 1e6:.2f} us)")
    print(f"rk4:    {rk4_per_step * 1e6:.2f} us per step (h = {rk4_h} avg edge)")
    print(f"ratio:  {stream_t / rk4_per_step:.2f} stream crossings per rk4 step")
    return 0


def cmd_synth(args):
    kind = args.kind
    seed = args.seed
    if kind == "grid":
        mesh = meshgen.grid(args.nx, args.ny, distortion=args.distort, seed=seed)
        fs = synth_field(mesh, "constant", angle_deg=args.angle)
    elif kind == "circular":
        mesh = meshgen.disc(args.rings, args.sectors, distortion=args.distort, seed=seed)
        fs = synth_field(mesh, "circular", center=(0.0, 0.0))
    elif kind in ("saddle", "source", "sink"):
        mesh = meshgen.disc(args.rings, args.sectors, distortion=args.distort, seed=seed)
        fs = synth_field(mesh, kind, center=(0.0, 0.0))
    elif kind == "icosphere-random":
        mesh = meshgen.icosphere(args.subdiv)
        fs = synth_field(mesh, "smoothed-random", seed=seed)
    elif kind == "torus-random":
        mesh = meshgen.torus()
        fs = synth_field(mesh, "smoothed-random", seed=seed)
    else:
        print(f"unknown synth kind {kind!r}", file=sys.stderr)
        return 2
    save_obj(args.out + ".obj", mesh)
    save_field(args.out + ".field", fs)
    bad = validate(mesh, fs)
    print(f"wrote {args.out}.obj and {args.out}.field ({len(bad)} violations)")
    return 1 if bad else 0


def cmd_check_crossings(args):
    mesh = load_obj(args.mesh)
    polylines = load_polylines(args.lines)
    violations = check_crossings(mesh, polylines)
    for v in violations:
        print(v)
    print(f"{len(violations)} crossing violation(s) in {len(polylines)} polylines")
    return 1 if violations else 0


# -- argument parsing --------------------------------------------------------------


def _build_parser():
    p = argparse.ArgumentParser(
        prog="streamtrace",
        description="Streamline tracing on triangle meshes without numerical integration",
    )
    sub = p.add_subparsers(dest="cmd", required=True)

    def add_io(q):
        q.add_argument("--mesh", required=True)
        q.add_argument("--field", required=True)

    q = sub.add_parser("validate", help="check field continuity invariants")
    add_io(q)
    q.set_defaults(fn=cmd_validate)

    q = sub.add_parser("trace", help="trace streamlines")
    add_io(q)
    q.add_argument("--seeds", type=int, default=None, help="N spread seeds")
    q.add_argument("--seed-points", default=None, help="explicit h:c,h:c,... seeds")
    q.add_argument("--seed-singularities", action="store_true")
    q.add_argument("--direction", choices=("forward", "backward"), default="forward")
    q.add_argument("--engine", choices=("stream", "rk4"), default="stream")
    q.add_argument("--rk4-h", type=float, default=None, help="step, fraction of avg edge")
    q.add_argument("--max-steps", type=int, default=None)
    q.add_argument("--out", required=True, help="polylines JSON (one per line)")
    q.add_argument("--svg", default=None)
    q.add_argument("--obj", default=None)
    q.set_defaults(fn=cmd_trace)

    q = sub.add_parser("bench", help="stream vs rk4 timing")
    add_io(q)
    q.add_argument("--seeds", type=int, default=20)
    q.add_argument("--rk4-h", type=float, default=None)
    q.set_defaults(fn=cmd_bench)

    q = sub.add_parser("synth", help="generate a test mesh + field")
    q.add_argument("kind", choices=(
        "grid", "circular", "saddle", "source", "sink",
        "icosphere-random", "torus-random",
    ))
    q.add_argument("--out", required=True, help="output path prefix")
    q.add_argument("--nx", type=int, default=10)
    q.add_argument("--ny", type=int, default=10)
    q.add_argument("--rings", type=int, default=8)
    q.add_argument("--sectors", type=int, default=24)
    q.add_argument("--subdiv", type=int, default=2)
    q.add_argument("--distort", type=float, default=0.0)
    q.add_argument("--angle", type=float, default=30.0)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(fn=cmd_synth)

    q = sub.add_parser("check-crossings", help="verify traced polylines do not cross")
    q.add_argument("--mesh", required=True)
    q.add_argument("--lines", required=True)
    q.set_defaults(fn=cmd_check_crossings)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (MeshError, FieldError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TraceError, StreamMeshError) as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
