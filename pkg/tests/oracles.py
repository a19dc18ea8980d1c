"""Independent brute-force oracles used to pin expected values.

Everything here is deliberately naive (quadratic scans, exhaustive
enumeration, exact rational arithmetic) and shares no code with the
production paths it checks.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy import ndimage

from topokit.geometry import BoundaryGraph, Vertex, densify


def graph_pixel_set(graph: BoundaryGraph) -> set[Vertex]:
    pixels: set[Vertex] = set()
    for inst in graph.instances:
        pixels.update(densify(inst).vertices)
    return pixels


def instance_pixel_sets(graph: BoundaryGraph) -> dict[int, set[Vertex]]:
    return {inst.id: set(densify(inst).vertices) for inst in graph.instances}


def brute_dsq_map(mask: np.ndarray) -> np.ndarray:
    """O(HW*B) squared Euclidean distance to the nearest foreground pixel."""
    sites = np.argwhere(mask)
    h, w = mask.shape
    rr, cc = np.indices((h, w))
    dsq = np.full((h, w), np.iinfo(np.int64).max, dtype=np.int64)
    for r, c in sites:
        cand = (rr - r) ** 2 + (cc - c) ** 2
        np.minimum(dsq, cand, out=dsq)
    return dsq


def brute_hausdorff_sq(a: set[Vertex], b: set[Vertex]) -> int:
    def directed(src, dst):
        return max(min((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 for q in dst) for p in src)

    return max(directed(a, b), directed(b, a))


def brute_nearest_gt_votes(pred_pixels: set[Vertex], gt_sets: dict[int, set[Vertex]]) -> dict[int, int]:
    """Votes per gt id; pixel-level ties go to the lowest gt id."""
    votes = {gid: 0 for gid in gt_sets}
    for p in pred_pixels:
        best: tuple[int, int] | None = None
        for gid in sorted(gt_sets):
            d = min((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 for q in gt_sets[gid])
            if best is None or d < best[0]:
                best = (d, gid)
        votes[best[1]] += 1
    return votes


def euclidean_disk_offsets(tau: float) -> list[tuple[int, int]]:
    radius = int(math.floor(tau))
    return [
        (dr, dc)
        for dr in range(-radius, radius + 1)
        for dc in range(-radius, radius + 1)
        if dr * dr + dc * dc <= tau * tau
    ]


def dilate_euclidean(pixels: set[Vertex], tau: float) -> set[Vertex]:
    """All lattice points within Euclidean distance tau of the pixel set."""
    offsets = euclidean_disk_offsets(tau)
    out: set[Vertex] = set()
    for p in pixels:
        for dr, dc in offsets:
            out.add(Vertex(p[0] + dr, p[1] + dc))
    return out


def _dilate_mask(mask: np.ndarray, tau: float) -> np.ndarray:
    """Shift-and-OR dilation with the explicit Euclidean disk."""
    h, w = mask.shape
    out = np.zeros_like(mask)
    for dr, dc in euclidean_disk_offsets(tau):
        src_r = slice(max(0, -dr), h - max(0, dr))
        dst_r = slice(max(0, dr), h - max(0, -dr))
        src_c = slice(max(0, -dc), w - max(0, dc))
        dst_c = slice(max(0, dc), w - max(0, -dc))
        out[dst_r, dst_c] |= mask[src_r, src_c]
    return out


def dilation_metrics(
    pred: BoundaryGraph, gt: BoundaryGraph, tau: float, size: tuple[int, int] = (64, 64)
) -> tuple[float, float]:
    """(precision, recall) by dilate-and-count, the brute-force route.

    Graphs must fit inside ``size``; dilation happens on a canvas padded by
    tau so nothing clips at the border.
    """
    pred_px = graph_pixel_set(pred)
    gt_px = graph_pixel_set(gt)
    if not pred_px and not gt_px:
        return 1.0, 1.0
    if not pred_px or not gt_px:
        return 0.0, 0.0
    pad = int(math.floor(tau)) + 1
    h, w = size[0] + 2 * pad, size[1] + 2 * pad
    pred_mask = np.zeros((h, w), dtype=bool)
    gt_mask = np.zeros((h, w), dtype=bool)
    for v in pred_px:
        pred_mask[v.row + pad, v.col + pad] = True
    for v in gt_px:
        gt_mask[v.row + pad, v.col + pad] = True
    precision = float((pred_mask & _dilate_mask(gt_mask, tau)).sum()) / len(pred_px)
    recall = float((gt_mask & _dilate_mask(pred_mask, tau)).sum()) / len(gt_px)
    return precision, recall


def hard_metrics_morphological(pred: BoundaryGraph, gt: BoundaryGraph, size: tuple[int, int]) -> tuple[float, float]:
    """Hard pixel metrics via morphological dilation with the radius-1
    Euclidean (4-connected) structuring element."""
    pred_mask = np.zeros(size, dtype=bool)
    gt_mask = np.zeros(size, dtype=bool)
    for v in graph_pixel_set(pred):
        pred_mask[v.row, v.col] = True
    for v in graph_pixel_set(gt):
        gt_mask[v.row, v.col] = True
    plus = ndimage.generate_binary_structure(2, 1)
    precision = float((pred_mask & ndimage.binary_dilation(gt_mask, plus)).sum()) / pred_mask.sum()
    recall = float((gt_mask & ndimage.binary_dilation(pred_mask, plus)).sum()) / gt_mask.sum()
    return precision, recall


def entropy_term(fragment_pixel_counts: list[int]) -> float:
    total = sum(fragment_pixel_counts)
    shares = [c / total for c in fragment_pixel_counts]
    return math.exp(sum(p * math.log(p) for p in shares))


def oracle_clip_edge(a: Vertex, b: Vertex, box: tuple[int, int, int, int]):
    """Kept parameter interval of segment a->b inside the closed box.

    Independent route: collect the crossings with each of the four border
    lines, sort the candidate parameters, and midpoint-test each cell.
    Returns (t0, t1) as Fractions or None.
    """
    r0, r1, c0, c1 = box
    dr, dc = b.row - a.row, b.col - a.col
    cands = {Fraction(0), Fraction(1)}
    for value, origin, delta in ((r0, a.row, dr), (r1, a.row, dr), (c0, a.col, dc), (c1, a.col, dc)):
        if delta != 0:
            t = Fraction(value - origin, delta)
            if 0 < t < 1:
                cands.add(t)
    ts = sorted(cands)
    kept = []
    for t_lo, t_hi in zip(ts, ts[1:]):
        mid = (t_lo + t_hi) / 2
        row = a.row + mid * dr
        col = a.col + mid * dc
        if r0 <= row <= r1 and c0 <= col <= c1:
            kept.append((t_lo, t_hi))
    if not kept:
        # the segment may still touch the box at a single point
        for t in ts:
            row = a.row + t * dr
            col = a.col + t * dc
            if r0 <= row <= r1 and c0 <= col <= c1:
                return (t, t)
        return None
    lo = kept[0][0]
    hi = kept[0][1]
    for t_lo, t_hi in kept[1:]:
        if t_lo == hi:
            hi = t_hi
    return (lo, hi)


def round_half_away_fraction(q: Fraction) -> int:
    p, r = q.numerator, q.denominator
    if p >= 0:
        return (2 * p + r) // (2 * r)
    return -((2 * (-p) + r) // (2 * r))


def oracle_exact_crossing(a: Vertex, b: Vertex, t: Fraction) -> tuple[Fraction, Fraction]:
    return (
        Fraction(a.row) + t * (b.row - a.row),
        Fraction(a.col) + t * (b.col - a.col),
    )


def dense_runs_in_window(chain: tuple[Vertex, ...], box: tuple[int, int, int, int]) -> int:
    """Number of maximal in-window runs of a dense chain (piece-count oracle)."""
    r0, r1, c0, c1 = box
    runs = 0
    inside_prev = False
    for v in chain:
        inside = r0 <= v.row <= r1 and c0 <= v.col <= c1
        if inside and not inside_prev:
            runs += 1
        inside_prev = inside
    return runs


def is_8_connected(chain) -> bool:
    return all(
        max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1 for a, b in zip(chain, chain[1:])
    )
