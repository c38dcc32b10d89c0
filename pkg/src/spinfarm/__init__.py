"""Spin-image generation under dynamic loop scheduling."""

from .errors import (ParseError, ProtocolError, RunAborted, SpinfarmError, StartupError,
                     UsageError, ValidationError)
from .geometry import (OrientedPoint, PointCloud, compute_vertex_normals, load_point_cloud,
                       synth_cloud)
from .scheduling import SchedulerKind, SchedulerState, chunk_sequence
from .spinimage import (Projection, SpinImage, SpinImageParams, bin_indices, generate_all_sequential,
                        generate_range, generate_spin_image, project, support_test)

__version__ = "0.1.0"

__all__ = [
    "ParseError", "ProtocolError", "RunAborted", "SpinfarmError", "StartupError",
    "UsageError", "ValidationError",
    "OrientedPoint", "PointCloud", "compute_vertex_normals", "load_point_cloud", "synth_cloud",
    "SchedulerKind", "SchedulerState", "chunk_sequence",
    "Projection", "SpinImage", "SpinImageParams", "bin_indices", "generate_all_sequential",
    "generate_range", "generate_spin_image", "project", "support_test",
]
