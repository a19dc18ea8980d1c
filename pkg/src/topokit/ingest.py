"""Tile ingestion: geo transform, patch splitting with edge clipping, filtering.

Tiles are square aerial images (default 5000x5000, 1 foot per pixel) carrying
polyline boundary annotations. Splitting cuts each tile into a row-major grid
of patches (default 5x5 of 1000x1000) and clips every boundary chain to each
patch window: a vertex outside the window is replaced by the rounded
segment/border intersection, and a chain that leaves and re-enters becomes
multiple instances with fresh ids.

Intersection points are computed with exact rational arithmetic so the
rounded border vertices are reproducible bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .geometry import BoundaryGraph, BoundaryInstance, Vertex, densify, instance_pixel_count
from .rng import PortableRng

# Default split ratios: train/valid/test/pretrain patch counts of the full dataset.
DEFAULT_SPLIT_RATIOS = (10057, 1092, 2085, 8322)
DEFAULT_SPLIT_NAMES = ("train", "valid", "test", "pretrain")


@dataclass(frozen=True)
class Tile:
    id: str
    boundaries: BoundaryGraph
    width: int = 5000
    height: int = 5000
    geo_origin: tuple[float, float] = (0.0, 0.0)
    resolution: float = 1.0

    def __post_init__(self) -> None:
        if self.resolution <= 0:
            raise ValueError("tile resolution must be positive")


@dataclass(frozen=True)
class Patch:
    tile_id: str
    index: int
    offset: tuple[int, int]
    boundaries: BoundaryGraph
    size: tuple[int, int] = (1000, 1000)
    grid: int = 5
    image_ref: str | None = None

    def __post_init__(self) -> None:
        h, w = self.size
        row_block = self.offset[0] // h
        col_block = self.offset[1] // w
        if self.index != row_block * self.grid + col_block:
            raise ValueError(
                f"patch index {self.index} inconsistent with offset {self.offset}"
            )
        for inst in self.boundaries.instances:
            for v in inst.vertices:
                if not (0 <= v.row < h and 0 <= v.col < w):
                    raise ValueError(f"vertex {v} outside patch of size {self.size}")

    @property
    def id(self) -> str:
        return f"{self.tile_id}_p{self.index:02d}"


@dataclass(frozen=True)
class FilterConfig:
    # "very complex" has no precise definition upstream; thresholds are ours
    # and deliberately generous so only extreme patches are dropped.
    max_instances: int = 15
    max_pixels: int = 12000


@dataclass(frozen=True)
class FilterReport:
    patch_id: str
    verdict: str  # "kept" | "dropped"
    reason: str  # "none" | "empty" | "has_intersection" | "too_complex"

    def __post_init__(self) -> None:
        if self.verdict == "dropped" and self.reason == "none":
            raise ValueError("dropped patches must carry a reason")


class OutOfRangeError(ValueError):
    pass


def round_half_away(x: float) -> int:
    """Round to nearest integer, halves away from zero."""
    return math.floor(x + 0.5) if x >= 0 else math.ceil(x - 0.5)


def _round_half_away_fraction(q: Fraction) -> int:
    p, r = q.numerator, q.denominator
    if p >= 0:
        return (2 * p + r) // (2 * r)
    return -((2 * (-p) + r) // (2 * r))


def geo_to_image(point: tuple[float, float], tile: Tile) -> Vertex:
    """Map a geo coordinate (x east, y north) to (row, col) pixels.

    Raises OutOfRangeError if the rounded pixel falls outside the tile.
    """
    x, y = point
    ox, oy = tile.geo_origin
    row = round_half_away((oy - y) / tile.resolution)
    col = round_half_away((x - ox) / tile.resolution)
    if not (0 <= row < tile.height and 0 <= col < tile.width):
        raise OutOfRangeError(f"geo point {point} maps to {(row, col)} outside tile {tile.id}")
    return Vertex(row, col)


def image_to_geo(vertex: Vertex, tile: Tile) -> tuple[float, float]:
    ox, oy = tile.geo_origin
    return (ox + vertex.col * tile.resolution, oy - vertex.row * tile.resolution)


def _clip_segment_params(a: Vertex, b: Vertex, box: tuple[int, int, int, int]):
    """Liang-Barsky parameters of segment a->b against the closed pixel box.

    Returns (t0, t1) as exact Fractions with 0 <= t0 <= t1 <= 1, or None when
    the segment misses the box entirely.
    """
    r0, r1, c0, c1 = box
    dr = b.row - a.row
    dc = b.col - a.col
    t0, t1 = Fraction(0), Fraction(1)
    for p, q in (
        (-dr, a.row - r0),
        (dr, r1 - a.row),
        (-dc, a.col - c0),
        (dc, c1 - a.col),
    ):
        if p == 0:
            if q < 0:
                return None
            continue
        t = Fraction(q, p)
        if p < 0:
            if t > t1:
                return None
            if t > t0:
                t0 = t
        else:
            if t < t0:
                return None
            if t < t1:
                t1 = t
    return t0, t1


def _point_at(a: Vertex, b: Vertex, t: Fraction) -> Vertex:
    row = _round_half_away_fraction(Fraction(a.row) + t * (b.row - a.row))
    col = _round_half_away_fraction(Fraction(a.col) + t * (b.col - a.col))
    return Vertex(row, col)


def clip_chain(vertices: tuple[Vertex, ...], box: tuple[int, int, int, int]) -> list[list[Vertex]]:
    """Clip a vertex chain to the closed box [r0,r1]x[c0,c1].

    Each maximal in-window run becomes one piece. Replacement vertices at
    window crossings are the rounded exact intersections; they always land on
    the window border. Pieces that collapse to fewer than 2 distinct vertices
    are dropped.
    """
    pieces: list[list[Vertex]] = []
    current: list[Vertex] | None = None

    def close() -> None:
        nonlocal current
        if current is not None:
            pieces.append(current)
            current = None

    for a, b in zip(vertices, vertices[1:]):
        params = _clip_segment_params(a, b, box)
        if params is None:
            close()
            continue
        t0, t1 = params
        start = a if t0 == 0 else _point_at(a, b, t0)
        end = b if t1 == 1 else _point_at(a, b, t1)
        if t0 == 0 and current is not None:
            current.append(end)
        else:
            close()
            current = [start, end]
        if t1 != 1:
            close()
    close()

    cleaned: list[list[Vertex]] = []
    for piece in pieces:
        out = [piece[0]]
        for v in piece[1:]:
            if v != out[-1]:
                out.append(v)
        if len(out) >= 2:
            cleaned.append(out)
    return cleaned


def split_tile(tile: Tile, patch_size: int = 1000, grid: int = 5) -> list[Patch]:
    """Split a tile into grid*grid patches with boundary clipping.

    Patch windows tile the image row-major; patch (i,j) owns pixel rows
    [i*patch_size, (i+1)*patch_size) and the analogous columns. Empty patches
    are returned too; filtering is a separate step.
    """
    if patch_size * grid != tile.height or patch_size * grid != tile.width:
        raise ValueError("patch_size * grid must equal the tile dimensions")
    patches: list[Patch] = []
    for pr in range(grid):
        for pc in range(grid):
            r0, c0 = pr * patch_size, pc * patch_size
            box = (r0, r0 + patch_size - 1, c0, c0 + patch_size - 1)
            clipped: list[BoundaryInstance] = []
            next_id = 1
            for inst in tile.boundaries.instances:
                for piece in clip_chain(inst.vertices, box):
                    local = tuple(Vertex(v.row - r0, v.col - c0) for v in piece)
                    clipped.append(BoundaryInstance(next_id, local))
                    next_id += 1
            patches.append(
                Patch(
                    tile_id=tile.id,
                    index=pr * grid + pc,
                    offset=(r0, c0),
                    size=(patch_size, patch_size),
                    grid=grid,
                    boundaries=BoundaryGraph(tuple(clipped)),
                )
            )
    return patches


def filter_patch(patch: Patch, cfg: FilterConfig = FilterConfig()) -> FilterReport:
    """Apply the keep/drop rules to one patch.

    Dropped when: no instances; any pixel is covered by two or more chain
    positions (within or across instances, i.e. a junction); or the patch
    exceeds the complexity thresholds.
    """
    graph = patch.boundaries
    if len(graph) == 0:
        return FilterReport(patch.id, "dropped", "empty")
    dense = [densify(inst) for inst in graph.instances]
    seen: set[Vertex] = set()
    junction = False
    for inst in dense:
        for v in inst.vertices:
            if v in seen:
                junction = True
                break
            seen.add(v)
        if junction:
            break
    if junction:
        return FilterReport(patch.id, "dropped", "has_intersection")
    total_pixels = sum(instance_pixel_count(inst) for inst in dense)
    if len(dense) > cfg.max_instances or total_pixels > cfg.max_pixels:
        return FilterReport(patch.id, "dropped", "too_complex")
    return FilterReport(patch.id, "kept", "none")


def make_splits(
    patch_ids: list[str],
    seed: int,
    ratios: tuple[float, ...] = DEFAULT_SPLIT_RATIOS,
    names: tuple[str, ...] = DEFAULT_SPLIT_NAMES,
) -> dict[str, list[str]]:
    """Deterministically partition patch ids into named splits.

    Ratios are normalized; sizes use largest-remainder rounding so they sum
    to the input count. The shuffle is seeded and platform-independent.
    """
    if not patch_ids:
        raise ValueError("cannot split an empty patch list")
    if len(ratios) != len(names):
        raise ValueError("ratios and names must align")
    total = sum(Fraction(r) for r in ratios)
    if total <= 0:
        raise ValueError("ratios must sum to a positive value")
    n = len(patch_ids)
    exact = [Fraction(r) / total * n for r in ratios]
    sizes = [int(e) for e in exact]
    remainders = sorted(
        range(len(ratios)), key=lambda k: (exact[k] - sizes[k], -k), reverse=True
    )
    for k in remainders[: n - sum(sizes)]:
        sizes[k] += 1
    ids = sorted(patch_ids)
    PortableRng(seed).shuffle(ids)
    out: dict[str, list[str]] = {}
    cursor = 0
    for name, size in zip(names, sizes):
        out[name] = ids[cursor : cursor + size]
        cursor += size
    return out
