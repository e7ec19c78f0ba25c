"""Exception types shared across the package."""


class MeshError(Exception):
    """Raised for malformed input meshes or illegal mesh queries."""


class FieldError(Exception):
    """Raised for malformed direction field files or illegal field queries."""


class StreamMeshError(Exception):
    """Raised when a per-facet stream mesh is inconsistent or misused."""


class FluxError(Exception):
    """Raised for flux evaluation on pieces that carry none, or bad ranges."""


class TraceError(Exception):
    """Raised for illegal tracing requests (bad seeds, corrupt state)."""
