"""Topological road-boundary toolkit.

Polyline ingestion and tile-to-patch splitting, ground-truth label raster
generation, relaxed pixel metrics plus three connectivity metrics, and a
graph-growing rollout engine with oracle policies.
"""

from .geometry import (
    BoundaryGraph,
    BoundaryInstance,
    Vertex,
    densify,
    digital_line,
    instance_pixel_count,
    key_vertices,
)
from .ingest import (
    FilterConfig,
    FilterReport,
    Patch,
    Tile,
    filter_patch,
    geo_to_image,
    image_to_geo,
    make_splits,
    split_tile,
)
from .labels import (
    Raster,
    binary_map,
    direction_map,
    endpoint_map,
    instance_map,
    inverse_distance_map,
    orientation_map,
)
from .metrics import (
    MatchAssignment,
    MetricReport,
    entropy_connectivity,
    evaluate_graphs,
    match_hausdorff,
    match_voting,
    naive_connectivity,
    relaxed_pixel_metrics,
    weighted_connectivity,
)
from .rollout import (
    RolloutConfig,
    RolloutTrace,
    beta_schedule,
    expert_closest_pixel,
    expert_orientation,
    interpolate_step,
    run_episode,
    run_patch_rollout,
)
from .synth import Degradation, SceneSpec, generate_scene, generate_tile

__version__ = "0.1.0"
