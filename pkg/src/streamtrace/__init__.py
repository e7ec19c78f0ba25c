"""Combinatorial streamline tracing on triangle meshes.

Streamlines aligned with a per-triangle sampled direction field are carried
across each facet by a closed-form flux-ratio mapping on a per-facet
combinatorial decomposition, with no numerical integration; traced lines
cannot cross.  A fixed-step RK4 integrator over the same fields is included
as the reference baseline.
"""

from .errors import FieldError, FluxError, MeshError, StreamMeshError, TraceError
from .field import (
    FieldSamples,
    Violation,
    corner_jump_deg,
    interpolated_angle,
    load_field,
    save_field,
    synth_field,
    validate,
    vertex_index,
)
from .flux import accumulate, locate, phi, phi_inverse, phi_signed
from .mesh import FacetFrame, SurfaceMesh, TracePoint, load_obj, save_obj
from .rk4 import RK4Config, eval_field_interior, rk4_trace
from .stream_mesh import (
    Behavior,
    StreamHalfedge,
    StreamMesh,
    StreamVertex,
    decompose,
    init_main_face,
    segment_interval,
)
from .tracer import (
    CrossingViolation,
    Polyline,
    Seed,
    Tracer,
    check_crossings,
    handle_vertex_crossing,
    load_polylines,
    save_polylines,
    seed_from_vertex,
)

__version__ = "0.1.0"

__all__ = [
    "Behavior",
    "CrossingViolation",
    "FacetFrame",
    "FieldError",
    "FieldSamples",
    "FluxError",
    "MeshError",
    "Polyline",
    "RK4Config",
    "Seed",
    "StreamHalfedge",
    "StreamMesh",
    "StreamMeshError",
    "SurfaceMesh",
    "TraceError",
    "TracePoint",
    "Tracer",
    "Violation",
    "accumulate",
    "check_crossings",
    "corner_jump_deg",
    "decompose",
    "eval_field_interior",
    "handle_vertex_crossing",
    "init_main_face",
    "interpolated_angle",
    "load_field",
    "load_obj",
    "load_polylines",
    "locate",
    "phi",
    "phi_inverse",
    "phi_signed",
    "rk4_trace",
    "save_field",
    "save_obj",
    "save_polylines",
    "seed_from_vertex",
    "segment_interval",
    "synth_field",
    "validate",
    "vertex_index",
]
