"""Evaluation metrics for predicted vs ground-truth boundary graphs.

Two families:

* Relaxed pixel metrics: precision / recall / F1 where a pixel counts as
  correct when it lies within Euclidean distance tau of the other graph.
* Connectivity metrics: three variants built on instance matching. The
  naive variant matches by symmetric Hausdorff distance and averages 1/M_i;
  the length-weighted variant matches by per-pixel voting and weights each
  ground-truth instance by its pixel share; the entropy variant scores each
  ground-truth instance by exp(-H) of the assigned fragments' pixel-share
  entropy (natural log), so one dominant fragment plus specks scores close
  to 1 while M equal fragments score exactly 1/M.

All distances are exact Euclidean between integer pixel centers; squared
distances are kept as integers so tie-breaking (always the lowest gt id) is
bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import BoundaryGraph, densify

DEFAULT_TAUS = (1.0, 2.0, 5.0, 10.0)


def _unique_pixels(vertices) -> np.ndarray:
    pts = np.asarray(vertices, dtype=np.int64)
    return np.unique(pts, axis=0)


def _instance_pixel_sets(graph: BoundaryGraph) -> tuple[list[int], list[np.ndarray]]:
    ids, sets = [], []
    for inst in sorted(graph.instances, key=lambda i: i.id):
        ids.append(inst.id)
        sets.append(_unique_pixels(densify(inst).vertices))
    return ids, sets


def _graph_pixels(graph: BoundaryGraph) -> np.ndarray:
    if len(graph) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    parts = [_unique_pixels(densify(inst).vertices) for inst in graph.instances]
    return np.unique(np.concatenate(parts, axis=0), axis=0)


def _dsq_to(points: np.ndarray, targets: np.ndarray, tree: cKDTree | None = None) -> np.ndarray:
    """Integer squared distance from each point to the target pixel set."""
    if tree is None:
        tree = cKDTree(targets)
    _, idx = tree.query(points)
    diff = points - targets[idx]
    return (diff * diff).sum(axis=1)


@dataclass(frozen=True)
class MatchAssignment:
    """Predicted-instance to ground-truth-instance assignment."""

    pred_to_gt: dict[int, int]
    gt_ids: tuple[int, ...]
    pred_pixel_counts: dict[int, int]
    gt_pixel_counts: dict[int, int]

    def assigned(self, gt_id: int) -> list[int]:
        return [p for p, g in sorted(self.pred_to_gt.items()) if g == gt_id]

    def match_count(self, gt_id: int) -> int:
        return sum(1 for g in self.pred_to_gt.values() if g == gt_id)


def relaxed_pixel_metrics(
    pred: BoundaryGraph, gt: BoundaryGraph, tau: float
) -> tuple[float, float, float]:
    """Relaxed precision, recall and F1 at tolerance tau (pixels).

    Precision is the fraction of predicted pixels within tau of the ground
    truth; recall swaps the roles. Conventions: both graphs empty -> all 1;
    one side empty -> all 0.
    """
    if tau < 1:
        raise ValueError("tau must be at least 1 pixel")
    pred_px = _graph_pixels(pred)
    gt_px = _graph_pixels(gt)
    if len(pred_px) == 0 and len(gt_px) == 0:
        return 1.0, 1.0, 1.0
    if len(pred_px) == 0 or len(gt_px) == 0:
        return 0.0, 0.0, 0.0
    tau_sq = tau * tau
    precision = float((_dsq_to(pred_px, gt_px) <= tau_sq).sum()) / len(pred_px)
    recall = float((_dsq_to(gt_px, pred_px) <= tau_sq).sum()) / len(gt_px)
    return precision, recall, _f1(precision, recall)


def _f1(p: float, r: float) -> float:
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def match_hausdorff(pred: BoundaryGraph, gt: BoundaryGraph) -> MatchAssignment:
    """Assign each predicted instance to the gt instance minimizing the
    symmetric Hausdorff distance between pixel sets; ties go to the lowest
    gt id."""
    if len(gt) == 0:
        raise ValueError("ground truth has no instances")
    gt_ids, gt_sets = _instance_pixel_sets(gt)
    pred_ids, pred_sets = _instance_pixel_sets(pred)
    gt_trees = [cKDTree(s) for s in gt_sets]
    assignment: dict[int, int] = {}
    for pid, ppx in zip(pred_ids, pred_sets):
        ptree = cKDTree(ppx)
        best: tuple[int, int] | None = None
        for gid, gpx, gtree in zip(gt_ids, gt_sets, gt_trees):
            forward = int(_dsq_to(ppx, gpx, gtree).max())
            backward = int(_dsq_to(gpx, ppx, ptree).max())
            h_sq = max(forward, backward)
            if best is None or (h_sq, gid) < best:
                best = (h_sq, gid)
        assignment[pid] = best[1]
    return MatchAssignment(
        pred_to_gt=assignment,
        gt_ids=tuple(gt_ids),
        pred_pixel_counts={pid: len(s) for pid, s in zip(pred_ids, pred_sets)},
        gt_pixel_counts={gid: len(s) for gid, s in zip(gt_ids, gt_sets)},
    )


def match_voting(pred: BoundaryGraph, gt: BoundaryGraph) -> MatchAssignment:
    """Assign each predicted instance by per-pixel nearest-instance voting.

    Every predicted pixel votes for its Euclidean-closest gt instance; the
    instance with the most votes wins. Pixel-level distance ties and vote
    ties both resolve to the lowest gt id.
    """
    if len(gt) == 0:
        raise ValueError("ground truth has no instances")
    gt_ids, gt_sets = _instance_pixel_sets(gt)
    pred_ids, pred_sets = _instance_pixel_sets(pred)
    gt_trees = [cKDTree(s) for s in gt_sets]
    assignment: dict[int, int] = {}
    for pid, ppx in zip(pred_ids, pred_sets):
        # rows ordered by ascending gt id, so argmin chooses the lowest id on ties
        dsq = np.stack([_dsq_to(ppx, s, t) for s, t in zip(gt_sets, gt_trees)], axis=0)
        nearest = np.argmin(dsq, axis=0)
        votes = np.bincount(nearest, minlength=len(gt_ids))
        assignment[pid] = gt_ids[int(np.argmax(votes))]
    return MatchAssignment(
        pred_to_gt=assignment,
        gt_ids=tuple(gt_ids),
        pred_pixel_counts={pid: len(s) for pid, s in zip(pred_ids, pred_sets)},
        gt_pixel_counts={gid: len(s) for gid, s in zip(gt_ids, gt_sets)},
    )


def naive_connectivity(
    pred: BoundaryGraph, gt: BoundaryGraph, assignment: MatchAssignment | None = None
) -> float:
    """Mean over gt instances of 1/M_i (0 when unmatched), Hausdorff matching."""
    if len(gt) == 0:
        raise ValueError("naive connectivity is undefined for empty ground truth")
    if assignment is None:
        assignment = match_hausdorff(pred, gt)
    scores = []
    for gid in assignment.gt_ids:
        m = assignment.match_count(gid)
        scores.append(1.0 / m if m > 0 else 0.0)
    return float(sum(scores) / len(scores))


def _alpha_weights(assignment: MatchAssignment) -> dict[int, float]:
    total = sum(assignment.gt_pixel_counts.values())
    return {gid: assignment.gt_pixel_counts[gid] / total for gid in assignment.gt_ids}


def weighted_connectivity(
    pred: BoundaryGraph, gt: BoundaryGraph, assignment: MatchAssignment | None = None
) -> float:
    """Length-weighted 1/M_i with voting matching: sum_i alpha_i / M_i."""
    if len(gt) == 0:
        raise ValueError("weighted connectivity is undefined for empty ground truth")
    if assignment is None:
        assignment = match_voting(pred, gt)
    alpha = _alpha_weights(assignment)
    value = 0.0
    for gid in assignment.gt_ids:
        m = assignment.match_count(gid)
        if m > 0:
            value += alpha[gid] / m
    return value


def entropy_connectivity(
    pred: BoundaryGraph, gt: BoundaryGraph, assignment: MatchAssignment | None = None
) -> float:
    """Entropy-based connectivity: sum_i alpha_i * exp(-H_i).

    H_i is the Shannon entropy (natural log) of the pixel shares of the
    predicted instances assigned to gt instance i. Unmatched gt instances
    contribute 0 rather than exp(0); rewarding a missing prediction with a
    full score would invert the metric's meaning.
    """
    if len(gt) == 0:
        raise ValueError("entropy connectivity is undefined for empty ground truth")
    if assignment is None:
        assignment = match_voting(pred, gt)
    alpha = _alpha_weights(assignment)
    value = 0.0
    for gid in assignment.gt_ids:
        fragments = assignment.assigned(gid)
        if not fragments:
            continue
        counts = [assignment.pred_pixel_counts[p] for p in fragments]
        total = sum(counts)
        entropy = -sum((c / total) * math.log(c / total) for c in counts)
        value += alpha[gid] * math.exp(-entropy)
    return value


@dataclass(frozen=True)
class MetricReport:
    """All metrics for one pred/gt pair (or a mean over many)."""

    taus: tuple[float, ...]
    precision: dict[float, float]
    recall: dict[float, float]
    f1: dict[float, float]
    connectivity_naive: float
    connectivity_weighted: float
    connectivity_entropy: float

    def to_kv_lines(self) -> list[str]:
        lines = []
        for tau in self.taus:
            t = _tau_label(tau)
            lines.append(f"precision_tau{t}={self.precision[tau]:.6f}")
        for tau in self.taus:
            t = _tau_label(tau)
            lines.append(f"recall_tau{t}={self.recall[tau]:.6f}")
        for tau in self.taus:
            t = _tau_label(tau)
            lines.append(f"f1_tau{t}={self.f1[tau]:.6f}")
        lines.append(f"connectivity_naive={self.connectivity_naive:.6f}")
        lines.append(f"connectivity_weighted={self.connectivity_weighted:.6f}")
        lines.append(f"connectivity_entropy={self.connectivity_entropy:.6f}")
        return lines

    def to_json_dict(self) -> dict:
        return {
            "taus": list(self.taus),
            "precision": {_tau_label(t): self.precision[t] for t in self.taus},
            "recall": {_tau_label(t): self.recall[t] for t in self.taus},
            "f1": {_tau_label(t): self.f1[t] for t in self.taus},
            "connectivity_naive": self.connectivity_naive,
            "connectivity_weighted": self.connectivity_weighted,
            "connectivity_entropy": self.connectivity_entropy,
        }


def _tau_label(tau: float) -> str:
    return str(int(tau)) if float(tau).is_integer() else str(tau)


def evaluate_graphs(
    pred: BoundaryGraph, gt: BoundaryGraph, taus: tuple[float, ...] = DEFAULT_TAUS
) -> MetricReport:
    """Full metric report for one pred/gt pair. Requires a non-empty gt."""
    if len(gt) == 0:
        raise ValueError("evaluation requires a non-empty ground-truth graph")
    precision, recall, f1 = {}, {}, {}
    for tau in taus:
        p, r, f = relaxed_pixel_metrics(pred, gt, tau)
        precision[tau], recall[tau], f1[tau] = p, r, f
    hausdorff = match_hausdorff(pred, gt) if len(pred) else _empty_assignment(gt)
    voting = match_voting(pred, gt) if len(pred) else _empty_assignment(gt)
    return MetricReport(
        taus=tuple(taus),
        precision=precision,
        recall=recall,
        f1=f1,
        connectivity_naive=naive_connectivity(pred, gt, hausdorff),
        connectivity_weighted=weighted_connectivity(pred, gt, voting),
        connectivity_entropy=entropy_connectivity(pred, gt, voting),
    )


def _empty_assignment(gt: BoundaryGraph) -> MatchAssignment:
    gt_ids, gt_sets = _instance_pixel_sets(gt)
    return MatchAssignment(
        pred_to_gt={},
        gt_ids=tuple(gt_ids),
        pred_pixel_counts={},
        gt_pixel_counts={gid: len(s) for gid, s in zip(gt_ids, gt_sets)},
    )


def mean_report(reports: list[MetricReport]) -> MetricReport:
    """Arithmetic mean of reports sharing the same tau set."""
    if not reports:
        raise ValueError("cannot average zero reports")
    taus = reports[0].taus
    for r in reports:
        if r.taus != taus:
            raise ValueError("reports disagree on tau values")
    n = len(reports)
    return MetricReport(
        taus=taus,
        precision={t: sum(r.precision[t] for r in reports) / n for t in taus},
        recall={t: sum(r.recall[t] for r in reports) / n for t in taus},
        f1={t: sum(r.f1[t] for r in reports) / n for t in taus},
        connectivity_naive=sum(r.connectivity_naive for r in reports) / n,
        connectivity_weighted=sum(r.connectivity_weighted for r in reports) / n,
        connectivity_entropy=sum(r.connectivity_entropy for r in reports) / n,
    )
