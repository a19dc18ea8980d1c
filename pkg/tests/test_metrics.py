import math

import pytest

from topokit.geometry import BoundaryGraph, BoundaryInstance, Vertex, densify
from topokit.metrics import (
    entropy_connectivity,
    evaluate_graphs,
    match_hausdorff,
    match_voting,
    mean_report,
    naive_connectivity,
    relaxed_pixel_metrics,
    weighted_connectivity,
)
from topokit.synth import Degradation, SceneSpec, generate_scene

from oracles import (
    brute_hausdorff_sq,
    brute_nearest_gt_votes,
    dilation_metrics,
    entropy_term,
    graph_pixel_set,
    hard_metrics_morphological,
    instance_pixel_sets,
)


def chain(*pts):
    return tuple(Vertex(r, c) for r, c in pts)


def hline(inst_id, row, c0, c1):
    return BoundaryInstance(inst_id, chain((row, c0), (row, c1)))


def g(*instances):
    return BoundaryGraph(tuple(instances))


def split_hline(row, c0, c1, cuts):
    """Fragments of a horizontal line tiled at the given column cuts."""
    edges = [c0] + cuts + [c1 + 1]
    return g(*[hline(k + 1, row, a, b - 1) for k, (a, b) in enumerate(zip(edges, edges[1:]))])


class TestRelaxedMetrics:
    def test_identity(self):
        gt = g(hline(1, 5, 0, 40))
        for tau in (1, 2, 5, 10):
            assert relaxed_pixel_metrics(gt, gt, tau) == (1.0, 1.0, 1.0)

    def test_threshold_semantics(self):
        gt = g(hline(1, 5, 0, 9))
        pred = g(hline(1, 8, 0, 9))  # every pixel at d=3
        p2, _, _ = relaxed_pixel_metrics(pred, gt, 2)
        p5, _, _ = relaxed_pixel_metrics(pred, gt, 5)
        assert p2 == 0.0 and p5 == 1.0

    def test_empty_conventions(self):
        empty = g()
        gt = g(hline(1, 5, 0, 9))
        assert relaxed_pixel_metrics(empty, empty, 2) == (1.0, 1.0, 1.0)
        assert relaxed_pixel_metrics(empty, gt, 2) == (0.0, 0.0, 0.0)
        assert relaxed_pixel_metrics(gt, empty, 2) == (0.0, 0.0, 0.0)

    def test_tau_below_one_rejected(self):
        gt = g(hline(1, 5, 0, 9))
        with pytest.raises(ValueError):
            relaxed_pixel_metrics(gt, gt, 0.5)

    def test_matches_dilation_oracle(self):
        for seed in range(8):
            pred, gt = _degraded_pair(seed)
            for tau in (1, 2, 5, 10):
                p, r, _ = relaxed_pixel_metrics(pred, gt, tau)
                op, orc = dilation_metrics(pred, gt, tau)
                assert p == op and r == orc, (seed, tau)

    def test_tau1_equals_hard_metrics(self):
        for seed in range(4):
            pred, gt = _degraded_pair(seed)
            p, r, _ = relaxed_pixel_metrics(pred, gt, 1)
            hp, hr = hard_metrics_morphological(pred, gt, (64, 64))
            assert p == hp and r == hr

    def test_monotone_in_tau_and_symmetric_swap(self):
        pred, gt = _degraded_pair(3)
        values = [relaxed_pixel_metrics(pred, gt, t) for t in (1, 2, 5, 10)]
        for (p0, r0, _), (p1, r1, _) in zip(values, values[1:]):
            assert p1 >= p0 and r1 >= r0
        p, r, _ = relaxed_pixel_metrics(pred, gt, 5)
        rp, rr, _ = relaxed_pixel_metrics(gt, pred, 5)
        assert (p, r) == (rr, rp)


def _degraded_pair(seed):
    gt, pred = generate_scene(
        SceneSpec(
            seed=seed,
            size=(64, 64),
            n_instances=2,
            family=("polyline", "arc", "straight")[seed % 3],
            degradation=Degradation(
                gap_count=1, gap_length=4.0, jitter_sigma=1.0, spurious_count=1
            ),
        )
    )
    return pred, gt


class TestHausdorffMatch:
    def test_exact_instance_assigned(self):
        gt = g(hline(1, 5, 0, 20), hline(2, 15, 0, 20), hline(3, 25, 0, 20))
        pred = g(hline(1, 15, 0, 20))
        assignment = match_hausdorff(pred, gt)
        assert assignment.pred_to_gt == {1: 2}

    def test_fragment_on_instance(self):
        gt = g(hline(1, 5, 0, 40), hline(2, 30, 0, 40))
        pred = g(hline(1, 5, 10, 20))
        assert match_hausdorff(pred, gt).pred_to_gt == {1: 1}

    def test_tie_goes_to_lowest_id(self):
        gt = g(hline(1, 0, 0, 10), hline(2, 20, 0, 10))
        pred = g(hline(1, 10, 0, 10))  # equidistant fragment
        sets = instance_pixel_sets(gt)
        ppx = graph_pixel_set(pred)
        assert brute_hausdorff_sq(ppx, sets[1]) == brute_hausdorff_sq(ppx, sets[2])
        assert match_hausdorff(pred, gt).pred_to_gt == {1: 1}

    def test_matches_brute_force_argmin(self):
        pred, gt = _degraded_pair(5)
        sets = instance_pixel_sets(gt)
        assignment = match_hausdorff(pred, gt)
        for inst in pred.instances:
            ppx = set(densify(inst).vertices)
            expected = min(
                sorted(sets), key=lambda gid: (brute_hausdorff_sq(ppx, sets[gid]), gid)
            )
            assert assignment.pred_to_gt[inst.id] == expected

    def test_empty_pred_empty_assignment(self):
        gt = g(hline(1, 5, 0, 20))
        assert match_hausdorff(g(), gt).pred_to_gt == {}

    def test_empty_gt_rejected(self):
        with pytest.raises(ValueError):
            match_hausdorff(g(hline(1, 5, 0, 20)), g())


class TestVotingMatch:
    def test_fragment_nearer_second_instance(self):
        gt = g(hline(1, 5, 0, 20), hline(2, 25, 0, 20))
        pred = g(hline(1, 22, 0, 20))
        assert match_voting(pred, gt).pred_to_gt == {1: 2}

    def test_majority_vote_matches_oracle(self):
        for seed in range(6):
            pred, gt = _degraded_pair(seed)
            sets = instance_pixel_sets(gt)
            assignment = match_voting(pred, gt)
            for inst in pred.instances:
                votes = brute_nearest_gt_votes(set(densify(inst).vertices), sets)
                best = max(sorted(votes), key=lambda gid: (votes[gid], -gid))
                assert assignment.pred_to_gt[inst.id] == best

    def test_exact_five_fifty_tie_goes_to_lowest(self):
        gt = g(hline(1, 0, 40, 60), hline(3, 3, 40, 60))
        pred = g(BoundaryInstance(1, chain((1, 50), (2, 50))))
        votes = brute_nearest_gt_votes(graph_pixel_set(pred), instance_pixel_sets(gt))
        assert votes[1] == votes[3] == 1
        assert match_voting(pred, gt).pred_to_gt == {1: 1}

    def test_invariant_under_pred_relabeling(self):
        pred, gt = _degraded_pair(2)
        relabeled = BoundaryGraph(
            tuple(
                BoundaryInstance(100 + inst.id, inst.vertices)
                for inst in pred.instances
            )
        )
        a = match_voting(pred, gt)
        b = match_voting(relabeled, gt)
        assert {p + 100: gid for p, gid in a.pred_to_gt.items()} == b.pred_to_gt


class TestNaiveConnectivity:
    def test_one_to_one(self):
        gt = g(hline(1, 5, 0, 20), hline(2, 25, 0, 20))
        assert naive_connectivity(gt, gt) == 1.0

    def test_split_in_two(self):
        gt = g(hline(1, 5, 0, 99))
        pred = split_hline(5, 0, 99, [50])
        assert naive_connectivity(pred, gt) == 0.5

    def test_unmatched_instance(self):
        gt = g(hline(1, 5, 0, 20), hline(2, 25, 0, 20))
        pred = g(hline(1, 5, 0, 20))
        assert naive_connectivity(pred, gt) == 0.5

    def test_empty_gt_rejected(self):
        with pytest.raises(ValueError):
            naive_connectivity(g(), g())


class TestWeightedConnectivity:
    def test_all_matched_once(self):
        gt = g(hline(1, 5, 0, 299), hline(2, 25, 0, 99))
        assert weighted_connectivity(gt, gt) == pytest.approx(1.0)

    def test_length_weights(self):
        gt = g(hline(1, 5, 0, 299), hline(2, 25, 0, 99))  # 300 and 100 pixels
        pred = g(
            hline(1, 5, 0, 149),
            hline(2, 5, 150, 299),
            hline(3, 25, 0, 99),
        )
        assert weighted_connectivity(pred, gt) == pytest.approx(0.625)

    def test_unmatched_contributes_zero(self):
        gt = g(hline(1, 5, 0, 299), hline(2, 25, 0, 99))
        pred = g(hline(1, 25, 0, 99))
        assert weighted_connectivity(pred, gt) == pytest.approx(0.25)


class TestEntropyConnectivity:
    def test_single_assignment_scores_one(self):
        gt = g(hline(1, 5, 0, 99))
        assert entropy_connectivity(gt, gt) == pytest.approx(1.0)

    def test_two_equal_fragments(self):
        gt = g(hline(1, 5, 0, 99))
        pred = split_hline(5, 0, 99, [50])
        assert entropy_connectivity(pred, gt) == pytest.approx(0.5, abs=1e-12)

    def test_ninety_ten_split(self):
        gt = g(hline(1, 5, 0, 99))
        pred = split_hline(5, 0, 99, [90])  # fragments of 90 and 10 pixels
        value = entropy_connectivity(pred, gt)
        expected_c = -(0.9 * math.log(0.9) + 0.1 * math.log(0.1))
        assert expected_c == pytest.approx(0.3251, abs=5e-5)
        assert value == pytest.approx(math.exp(-expected_c), abs=1e-12)
        assert value == pytest.approx(0.7225, abs=5e-5)

    def test_equal_split_identity(self):
        gt = g(hline(1, 5, 0, 599))
        for m in range(1, 7):
            width = 600 // m
            cuts = [width * k for k in range(1, m)]
            pred = split_hline(5, 0, 599, cuts)
            value = entropy_connectivity(pred, gt)
            assert abs(value - 1.0 / m) < 1e-9
            assert value == pytest.approx(entropy_term([width] * m), abs=1e-12)

    def test_dominant_fragment_robustness(self):
        # one dominant fragment plus two specks: the entropy term approaches 1
        # as the dominant share grows, while the naive score stays 1/3
        gt = g(hline(1, 5, 0, 399))
        pred = split_hline(5, 0, 399, [396, 398])  # 396 + 2 + 2 pixels, p=0.99
        value = entropy_connectivity(pred, gt)
        assert value == pytest.approx(entropy_term([396, 2, 2]), abs=1e-12)
        assert value > 0.9
        assert naive_connectivity(pred, gt) == pytest.approx(1 / 3)
        # monotone approach to 1 in the dominant share, k=2 fixed
        gt_long = g(hline(1, 5, 0, 3999))
        closer = split_hline(5, 0, 3999, [3996, 3998])  # p=0.999
        assert entropy_connectivity(closer, gt_long) > value
        assert entropy_connectivity(closer, gt_long) > 0.99

    def test_unmatched_gt_contributes_zero(self):
        gt = g(hline(1, 5, 0, 99), hline(2, 25, 0, 99))
        pred = g(hline(1, 5, 0, 99))
        assert entropy_connectivity(pred, gt) == pytest.approx(0.5)

    def test_range_on_random_scenes(self):
        for seed in range(8):
            pred, gt = _degraded_pair(seed)
            for value in (
                entropy_connectivity(pred, gt),
                weighted_connectivity(pred, gt),
                naive_connectivity(pred, gt),
            ):
                assert 0.0 <= value <= 1.0 + 1e-12


class TestReport:
    def test_evaluate_and_serialize(self):
        gt = g(hline(1, 5, 0, 40))
        report = evaluate_graphs(gt, gt)
        lines = report.to_kv_lines()
        assert "precision_tau1=1.000000" in lines
        assert "connectivity_entropy=1.000000" in lines
        d = report.to_json_dict()
        assert d["f1"]["10"] == 1.0

    def test_empty_gt_rejected(self):
        with pytest.raises(ValueError):
            evaluate_graphs(g(), g())

    def test_mean_report(self):
        gt = g(hline(1, 5, 0, 99))
        r1 = evaluate_graphs(gt, gt)
        r2 = evaluate_graphs(split_hline(5, 0, 99, [50]), gt)
        mean = mean_report([r1, r2])
        assert mean.connectivity_naive == pytest.approx((1.0 + 0.5) / 2)
