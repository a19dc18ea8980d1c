"""Ground-truth label rasters generated from a patch's boundary graph.

Six rasters are produced here: the binary map, instance map, endpoint map,
inverse-distance map, direction map and orientation map. The two sequence
labels (annotation and dense vertex chains) come straight from the geometry
module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geometry import (
    BoundaryGraph,
    BoundaryInstance,
    Vertex,
    densify,
    digital_line,
    edge_radian,
    key_vertices,
)
from .rng import PortableRng

_DTYPES = {"u8": np.uint8, "u16": np.uint16, "f32": np.float32}


@dataclass(frozen=True)
class Raster:
    """An H x W (x C) grid of u8, u16 or f32 values."""

    data: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in _DTYPES:
            raise ValueError(f"unknown raster kind {self.kind!r}")
        if self.data.dtype != _DTYPES[self.kind]:
            raise ValueError(f"raster kind {self.kind} does not match dtype {self.data.dtype}")
        if self.data.ndim not in (2, 3):
            raise ValueError("raster data must be HxW or HxWxC")
        if self.kind == "f32" and not np.isfinite(self.data).all():
            raise ValueError("f32 raster contains non-finite values")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]


def _dense_instances(graph: BoundaryGraph) -> list[BoundaryInstance]:
    return [densify(inst) for inst in sorted(graph.instances, key=lambda i: i.id)]


def _check_bounds(v: Vertex, size: tuple[int, int]) -> None:
    if not (0 <= v.row < size[0] and 0 <= v.col < size[1]):
        raise ValueError(f"vertex {v} outside raster of size {size}")


def _pixel_array(inst: BoundaryInstance, size: tuple[int, int]) -> np.ndarray:
    pts = np.asarray(inst.vertices, dtype=np.int64)
    if (
        pts[:, 0].min() < 0
        or pts[:, 1].min() < 0
        or pts[:, 0].max() >= size[0]
        or pts[:, 1].max() >= size[1]
    ):
        raise ValueError(f"instance {inst.id} has vertices outside raster of size {size}")
    return pts


def binary_map(graph: BoundaryGraph, size: tuple[int, int]) -> Raster:
    """Foreground = 1 on every pixel covered by the dense chains."""
    out = np.zeros(size, dtype=np.uint8)
    for inst in _dense_instances(graph):
        pts = _pixel_array(inst, size)
        out[pts[:, 0], pts[:, 1]] = 1
    return Raster(out, "u8")


def instance_map(graph: BoundaryGraph, size: tuple[int, int]) -> Raster:
    """Pixel value = covering instance id; overlaps resolve to the higher id.

    Uses u8 when all ids fit, u16 otherwise.
    """
    max_id = max((inst.id for inst in graph.instances), default=0)
    if max_id > 0xFFFF:
        raise ValueError(f"instance id {max_id} overflows u16")
    kind = "u8" if max_id <= 0xFF else "u16"
    out = np.zeros(size, dtype=_DTYPES[kind])
    # ascending id order + overwrite implements the higher-id tie rule
    for inst in _dense_instances(graph):
        pts = _pixel_array(inst, size)
        out[pts[:, 0], pts[:, 1]] = inst.id
    return Raster(out, kind)


_ENDPOINT_RADIUS = 5.0
_ENDPOINT_OFFSETS = [
    (dr, dc)
    for dr in range(-4, 5)
    for dc in range(-4, 5)
    if dr * dr + dc * dc < _ENDPOINT_RADIUS * _ENDPOINT_RADIUS
]


def endpoint_map(graph: BoundaryGraph, size: tuple[int, int]) -> Raster:
    """Foreground where the Euclidean distance to any instance endpoint is < 5."""
    out = np.zeros(size, dtype=np.uint8)
    for inst in graph.instances:
        for e in inst.endpoints:
            _check_bounds(e, size)
            for dr, dc in _ENDPOINT_OFFSETS:
                r, c = e.row + dr, e.col + dc
                if 0 <= r < size[0] and 0 <= c < size[1]:
                    out[r, c] = 1
    return Raster(out, "u8")


def nearest_boundary_dsq(mask: np.ndarray) -> np.ndarray:
    """Exact integer squared Euclidean distance to the nearest True pixel."""
    if not mask.any():
        raise ValueError("mask has no foreground pixels")
    idx = ndimage.distance_transform_edt(~mask, return_distances=False, return_indices=True)
    rr, cc = np.indices(mask.shape)
    dr = rr.astype(np.int64) - idx[0]
    dc = cc.astype(np.int64) - idx[1]
    return dr * dr + dc * dc


def inverse_distance_map(graph: BoundaryGraph, size: tuple[int, int]) -> Raster:
    """Per pixel 1 / (1 + d) with d the exact Euclidean distance to the boundary.

    Boundary pixels get 1.0. An empty graph yields an all-zero raster (the
    documented sentinel; a reciprocal has no meaning without a boundary).
    """
    if len(graph) == 0:
        return Raster(np.zeros(size, dtype=np.float32), "f32")
    mask = binary_map(graph, size).data.astype(bool)
    dsq = nearest_boundary_dsq(mask)
    values = 1.0 / (1.0 + np.sqrt(dsq.astype(np.float64)))
    return Raster(values.astype(np.float32), "f32")


_SOBEL_EPS = 1e-8


def direction_map(idmap: Raster) -> Raster:
    """Unit vectors (row, col) pointing toward increasing inverse distance.

    Sobel derivatives with replicate padding, normalized; gradients with
    magnitude <= 1e-8 become (0, 0).
    """
    if idmap.channels != 1:
        raise ValueError("direction_map expects a single-channel raster")
    field = idmap.data.astype(np.float64)
    g_row = ndimage.sobel(field, axis=0, mode="nearest")
    g_col = ndimage.sobel(field, axis=1, mode="nearest")
    norm = np.hypot(g_row, g_col)
    keep = norm > _SOBEL_EPS
    out = np.zeros(field.shape + (2,), dtype=np.float64)
    out[..., 0] = np.where(keep, g_row / np.where(keep, norm, 1.0), 0.0)
    out[..., 1] = np.where(keep, g_col / np.where(keep, norm, 1.0), 0.0)
    return Raster(out.astype(np.float32), "f32")


def orientation_map(
    graph: BoundaryGraph,
    size: tuple[int, int],
    start: str = "lexicographic",
    seed: int | None = None,
) -> tuple[Raster, Raster]:
    """Radian of the annotated edge each boundary pixel belongs to.

    For every instance a starting endpoint is chosen (lexicographically
    smaller (row, col) by default; ``start="random"`` flips a seeded coin),
    then each annotation edge's direction is written onto its dense pixels as
    a radian in [0, 2*pi). Returns (values, validity mask); background pixels
    hold 0 with mask 0.
    """
    if start not in ("lexicographic", "random"):
        raise ValueError("start must be 'lexicographic' or 'random'")
    rng = PortableRng(seed if seed is not None else 0)
    values = np.zeros(size, dtype=np.float32)
    mask = np.zeros(size, dtype=np.uint8)
    for inst in sorted(graph.instances, key=lambda i: i.id):
        sparse = inst if not inst.densified else _sparse_view(inst)
        verts = list(sparse.vertices)
        if start == "random":
            flip = rng.below(2) == 1
        else:
            flip = verts[-1] < verts[0]
        if flip:
            verts.reverse()
        for a, b in zip(verts, verts[1:]):
            if a == b:
                continue
            r = edge_radian(a, b)
            for v in digital_line(a, b):
                _check_bounds(v, size)
                values[v.row, v.col] = np.float32(r)
                mask[v.row, v.col] = 1
    return Raster(values, "f32"), Raster(mask, "u8")


def _sparse_view(inst: BoundaryInstance) -> BoundaryInstance:
    return key_vertices(inst)


def direction_display_channel(direction: Raster) -> np.ndarray:
    """Third display channel (sum of the two stored ones); visualization only."""
    return direction.data[..., 0] + direction.data[..., 1]


def orientation_raster_with_mask(values: Raster, mask: Raster) -> Raster:
    """Pack orientation values and validity mask as a 2-channel f32 raster."""
    packed = np.stack([values.data, mask.data.astype(np.float32)], axis=-1)
    return Raster(packed, "f32")
