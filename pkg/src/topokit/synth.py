"""Seeded synthetic scenes: ground-truth graphs plus controlled degradations.

Scenes provide the oracle corpus for metric and rollout tests. Instances are
laid out in disjoint horizontal bands with shallow headings, which keeps
chains junction-free and one pixel wide when rasterized. Degradations are
applied in a fixed order (drop -> gap -> jitter -> spurious) and every stage
draws from its own derived random stream, so a seed pins the scene byte for
byte on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geometry import BoundaryGraph, BoundaryInstance, Vertex
from .ingest import Tile, round_half_away
from .rng import PortableRng, derive_seed

FAMILIES = ("straight", "polyline", "arc")

_MARGIN = 10
_MIN_FRAGMENT_ARC = 3.0


@dataclass(frozen=True)
class Degradation:
    gap_count: int = 0
    gap_length: float = 0.0
    jitter_sigma: float = 0.0
    drop_fraction: float = 0.0
    spurious_count: int = 0
    # Explicit kept arc intervals per instance index: ((idx, ((s0, s1), ...)), ...).
    # Overrides random gap placement; used by shipped fixtures that need an
    # exact fragment structure.
    keep_intervals: tuple[tuple[int, tuple[tuple[float, float], ...]], ...] | None = None


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    size: tuple[int, int] = (256, 256)
    n_instances: int = 3
    family: str = "polyline"
    degradation: Degradation = field(default_factory=Degradation)

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.n_instances < 1:
            raise ValueError("need at least one instance")
        band = self.size[0] // self.n_instances
        if band < 2 * _MARGIN:
            raise ValueError("scene too small for the requested instance count")


def _dedupe(verts: list[Vertex]) -> list[Vertex]:
    out = [verts[0]]
    for v in verts[1:]:
        if v != out[-1]:
            out.append(v)
    return out


def _straight_instance(rng: PortableRng, band: tuple[int, int], width: int) -> list[Vertex]:
    row = rng.randint(band[0], band[1])
    return [Vertex(row, _MARGIN), Vertex(row, width - _MARGIN - 1)]


_MAX_HEADING = math.radians(40.0)
_MAX_TURN = math.radians(35.0)


def _polyline_instance(rng: PortableRng, band: tuple[int, int], width: int) -> list[Vertex]:
    # Shallow headings and bounded turns: keeps the chain column-monotone and
    # free of hairpins, so its raster stays one pixel wide.
    row = float(rng.randint(band[0] + 2, band[1] - 2))
    col = float(_MARGIN)
    heading = rng.uniform() * 2 * _MAX_HEADING - _MAX_HEADING
    verts = [Vertex(round_half_away(row), _MARGIN)]
    limit = float(width - _MARGIN - 1)
    while col < limit:
        heading += rng.uniform() * 2 * _MAX_TURN - _MAX_TURN
        heading = min(max(heading, -_MAX_HEADING), _MAX_HEADING)
        length = float(rng.randint(25, 60))
        advance = length * math.cos(heading)
        if col + advance > limit:
            length = (limit - col) / math.cos(heading)
            advance = limit - col
        row = min(max(row + length * math.sin(heading), float(band[0])), float(band[1]))
        col += advance
        verts.append(Vertex(round_half_away(row), round_half_away(col)))
    return _dedupe(verts)


def _arc_instance(rng: PortableRng, band: tuple[int, int], width: int) -> list[Vertex]:
    mid = (band[0] + band[1]) / 2.0
    span = width - 2 * _MARGIN - 1
    amp = min((band[1] - band[0]) / 2.0 - 1.0, span / 8.0) * (0.4 + 0.6 * rng.uniform())
    if rng.below(2):
        amp = -amp
    n_chords = 8
    verts = []
    for k in range(n_chords + 1):
        s = k / n_chords
        verts.append(
            Vertex(
                round_half_away(mid + amp * math.sin(math.pi * s)),
                round_half_away(_MARGIN + s * span),
            )
        )
    return _dedupe(verts)


_BUILDERS = {
    "straight": _straight_instance,
    "polyline": _polyline_instance,
    "arc": _arc_instance,
}


def _ground_truth(spec: SceneSpec) -> BoundaryGraph:
    h, w = spec.size
    band_h = h // spec.n_instances
    instances = []
    for i in range(spec.n_instances):
        rng = PortableRng(derive_seed(spec.seed, "gt", i))
        lo = i * band_h + _MARGIN // 2
        hi = (i + 1) * band_h - _MARGIN // 2 - 1
        verts = _BUILDERS[spec.family](rng, (lo, hi), w)
        instances.append(BoundaryInstance(i + 1, tuple(verts)))
    return BoundaryGraph(tuple(instances))


def _arc_length(verts: list[Vertex]) -> float:
    return sum(math.dist(a, b) for a, b in zip(verts, verts[1:]))


def _point_at_arc(verts: list[Vertex], s: float) -> tuple[float, float]:
    acc = 0.0
    for a, b in zip(verts, verts[1:]):
        seg = math.dist(a, b)
        if acc + seg >= s or (a, b) == (verts[-2], verts[-1]):
            t = 0.0 if seg == 0 else min(max((s - acc) / seg, 0.0), 1.0)
            return (a.row + t * (b.row - a.row), a.col + t * (b.col - a.col))
        acc += seg
    last = verts[-1]
    return (float(last.row), float(last.col))


def _slice_polyline(verts: list[Vertex], s0: float, s1: float) -> list[Vertex] | None:
    """Sub-polyline covering arc positions [s0, s1], endpoints interpolated."""
    start = _point_at_arc(verts, s0)
    end = _point_at_arc(verts, s1)
    out = [Vertex(round_half_away(start[0]), round_half_away(start[1]))]
    acc = 0.0
    for a, b in zip(verts, verts[1:]):
        seg = math.dist(a, b)
        if s0 < acc + seg and acc + seg < s1:
            out.append(b)
        acc += seg
    out.append(Vertex(round_half_away(end[0]), round_half_away(end[1])))
    out = _dedupe(out)
    return out if len(out) >= 2 else None


def _apply_gaps(
    pieces: dict[int, list[tuple[float, float]]],
    count: int,
    gap_length: float,
    rng: PortableRng,
) -> None:
    for _ in range(count):
        candidates = [
            (idx, k)
            for idx, spans in pieces.items()
            for k, (a, b) in enumerate(spans)
            if (b - a) >= gap_length + 2 * _MIN_FRAGMENT_ARC
        ]
        if not candidates:
            raise ValueError("gap longer than any remaining fragment")
        idx, k = candidates[rng.below(len(candidates))]
        a, b = pieces[idx][k]
        start = a + _MIN_FRAGMENT_ARC + rng.uniform() * (
            (b - a) - gap_length - 2 * _MIN_FRAGMENT_ARC
        )
        pieces[idx][k : k + 1] = [(a, start), (start + gap_length, b)]


def generate_scene(spec: SceneSpec) -> tuple[BoundaryGraph, BoundaryGraph]:
    """Build (ground truth, degraded prediction) for a scene spec."""
    gt = _ground_truth(spec)
    deg = spec.degradation
    h, w = spec.size

    # drop
    indices = list(range(len(gt.instances)))
    n_drop = int(deg.drop_fraction * len(indices))
    if n_drop:
        drop_rng = PortableRng(derive_seed(spec.seed, "deg", "drop"))
        pool = indices[:]
        drop_rng.shuffle(pool)
        dropped = set(pool[:n_drop])
        indices = [i for i in indices if i not in dropped]

    # gap: kept arc spans per surviving instance
    source = {i: list(gt.instances[i].vertices) for i in indices}
    spans: dict[int, list[tuple[float, float]]] = {}
    lengths: dict[int, float] = {}
    for i in indices:
        lengths[i] = _arc_length(source[i])
        spans[i] = [(0.0, lengths[i])]
    if deg.keep_intervals is not None:
        for idx, intervals in deg.keep_intervals:
            if idx not in spans:
                raise ValueError(f"keep_intervals references dropped/unknown instance {idx}")
            spans[idx] = [(float(a), float(b)) for a, b in intervals]
    elif deg.gap_count:
        gap_rng = PortableRng(derive_seed(spec.seed, "deg", "gap"))
        _apply_gaps(spans, deg.gap_count, deg.gap_length, gap_rng)

    fragments: list[list[Vertex]] = []
    for i in indices:
        for a, b in spans[i]:
            piece = _slice_polyline(source[i], a, b)
            if piece is not None:
                fragments.append(piece)

    # jitter
    if deg.jitter_sigma > 0:
        jit_rng = PortableRng(derive_seed(spec.seed, "deg", "jitter"))
        jittered = []
        for piece in fragments:
            moved = [
                Vertex(
                    min(max(v.row + round_half_away(jit_rng.normal(0, deg.jitter_sigma)), 0), h - 1),
                    min(max(v.col + round_half_away(jit_rng.normal(0, deg.jitter_sigma)), 0), w - 1),
                )
                for v in piece
            ]
            moved = _dedupe(moved)
            if len(moved) >= 2:
                jittered.append(moved)
        fragments = jittered

    # spurious short segments
    if deg.spurious_count:
        sp_rng = PortableRng(derive_seed(spec.seed, "deg", "spurious"))
        for _ in range(deg.spurious_count):
            r = sp_rng.randint(_MARGIN, h - _MARGIN - 1)
            c = sp_rng.randint(_MARGIN, w - _MARGIN - 1)
            heading = sp_rng.uniform() * 2 * math.pi
            length = sp_rng.randint(5, 15)
            r2 = min(max(r + round_half_away(length * math.sin(heading)), 0), h - 1)
            c2 = min(max(c + round_half_away(length * math.cos(heading)), 0), w - 1)
            if (r2, c2) == (r, c):
                c2 = min(c + 5, w - 1)
            fragments.append([Vertex(r, c), Vertex(r2, c2)])

    pred = BoundaryGraph(
        tuple(BoundaryInstance(k + 1, tuple(piece)) for k, piece in enumerate(fragments))
    )
    return gt, pred


def generate_tile(
    seed: int,
    tile_id: str,
    size: int = 5000,
    n_instances: int = 30,
    family: str = "polyline",
) -> Tile:
    """A synthetic tile with band-separated boundary instances in image coords."""
    spec = SceneSpec(seed=seed, size=(size, size), n_instances=n_instances, family=family)
    gt = _ground_truth(spec)
    return Tile(
        id=tile_id,
        boundaries=gt,
        width=size,
        height=size,
        geo_origin=(0.0, float(size)),
        resolution=1.0,
    )
