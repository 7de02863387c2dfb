import numpy as np
import pytest

from fovealprep.detmetrics import (
    Detection,
    GroundTruth,
    NoGroundTruth,
    average_precision,
    iou,
    mean_ap,
    read_detections,
    read_ground_truth,
)
from fovealprep.imgcore import BoundingBox

from oracles import average_precision_pr_walk


def det(seg, xywh, class_id, score):
    return Detection(seg, BoundingBox(*xywh), class_id, score)


def gt(seg, xywh, class_id):
    return GroundTruth(seg, BoundingBox(*xywh), class_id)


def random_instance(rng, n_classes=3, n_segments=3, n_gts=6, n_dets=12):
    gts, dets = [], []
    for _ in range(n_gts):
        seg = f"s{rng.integers(n_segments)}"
        box = (rng.integers(0, 50), rng.integers(0, 50), rng.integers(5, 30), rng.integers(5, 30))
        gts.append(gt(seg, box, int(rng.integers(n_classes))))
    for _ in range(n_dets):
        if rng.random() < 0.6 and gts:
            target = gts[rng.integers(len(gts))]
            jitter = rng.integers(-6, 7, size=2)
            box = (
                target.box.x + jitter[0],
                target.box.y + jitter[1],
                max(3, target.box.w + rng.integers(-4, 5)),
                max(3, target.box.h + rng.integers(-4, 5)),
            )
            seg, class_id = target.segment_id, target.class_id
        else:
            seg = f"s{rng.integers(n_segments)}"
            box = (rng.integers(0, 60), rng.integers(0, 60), rng.integers(5, 25), rng.integers(5, 25))
            class_id = int(rng.integers(n_classes))
        dets.append(det(seg, box, class_id, float(rng.random())))
    return dets, gts


class TestIou:
    def test_identical_boxes(self):
        box = BoundingBox(3, 4, 10, 12)
        assert iou(box, box) == 1.0

    def test_disjoint_boxes(self):
        assert iou(BoundingBox(0, 0, 5, 5), BoundingBox(10, 10, 5, 5)) == 0.0

    def test_half_overlap_value(self):
        assert abs(iou(BoundingBox(0, 0, 10, 10), BoundingBox(5, 0, 10, 10)) - 1 / 3) < 1e-12

    def test_symmetric_and_scale_consistent(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            a = BoundingBox(*rng.uniform(0, 40, 2), *rng.uniform(1, 30, 2))
            b = BoundingBox(*rng.uniform(0, 40, 2), *rng.uniform(1, 30, 2))
            assert iou(a, b) == iou(b, a)
            s = float(rng.uniform(0.5, 4.0))
            a2 = BoundingBox(a.x * s, a.y * s, a.w * s, a.h * s)
            b2 = BoundingBox(b.x * s, b.y * s, b.w * s, b.h * s)
            assert abs(iou(a, b) - iou(a2, b2)) < 1e-9

    def test_touching_boxes_do_not_overlap(self):
        assert iou(BoundingBox(0, 0, 5, 5), BoundingBox(5, 0, 5, 5)) == 0.0


class TestAveragePrecision:
    def test_perfect_detections(self):
        gts = [gt("a", (0, 0, 10, 10), 1), gt("b", (5, 5, 10, 10), 1)]
        dets = [det("a", (0, 0, 10, 10), 1, 0.9), det("b", (5, 5, 10, 10), 1, 0.8)]
        assert average_precision(dets, gts, 1) == 1.0

    def test_high_scoring_false_positive_halves_ap(self):
        gts = [gt("a", (0, 0, 10, 10), 1)]
        dets = [
            det("a", (40, 40, 10, 10), 1, 0.9),  # FP
            det("a", (0, 0, 10, 10), 1, 0.5),  # TP
        ]
        assert average_precision(dets, gts, 1) == 0.5

    def test_no_detections_is_zero(self):
        assert average_precision([], [gt("a", (0, 0, 5, 5), 1)], 1) == 0.0

    def test_no_ground_truth_is_undefined(self):
        assert average_precision([det("a", (0, 0, 5, 5), 1, 0.5)], [], 1) is None

    def test_segment_boundary_respected(self):
        gts = [gt("a", (0, 0, 10, 10), 1)]
        dets = [det("b", (0, 0, 10, 10), 1, 0.9)]  # right box, wrong segment
        assert average_precision(dets, gts, 1) == 0.0

    def test_duplicate_detection_is_false_positive(self):
        gts = [gt("a", (0, 0, 10, 10), 1)]
        dets = [det("a", (0, 0, 10, 10), 1, 0.9)]
        full = average_precision(dets, gts, 1)
        duplicated = average_precision(dets + [det("a", (0, 0, 10, 10), 1, 0.8)], gts, 1)
        assert full == 1.0
        assert duplicated <= full

    def test_score_monotone_transform_invariance(self):
        rng = np.random.default_rng(12)
        dets, gts = random_instance(rng)
        base = average_precision(dets, gts, 1)
        squashed = [
            Detection(d.segment_id, d.box, d.class_id, float(np.tanh(d.score) * 3 + 7))
            for d in dets
        ]
        assert average_precision(squashed, gts, 1) == base

    def test_matches_pr_walk_oracle(self):
        rng = np.random.default_rng(99)
        for _ in range(100):
            dets, gts = random_instance(rng)
            for class_id in range(3):
                got = average_precision(dets, gts, class_id)
                want = average_precision_pr_walk(
                    [
                        (d.segment_id, (d.box.x, d.box.y, d.box.w, d.box.h), d.score)
                        for d in dets
                        if d.class_id == class_id
                    ],
                    [
                        (g.segment_id, (g.box.x, g.box.y, g.box.w, g.box.h))
                        for g in gts
                        if g.class_id == class_id
                    ],
                    0.5,
                )
                if want is None:
                    assert got is None
                else:
                    assert abs(got - want) <= 1e-9

    def test_eleven_point_close_to_envelope(self):
        gts = [gt("a", (0, 0, 10, 10), 1)]
        dets = [det("a", (0, 0, 10, 10), 1, 0.9)]
        assert average_precision(dets, gts, 1, eleven_point=True) == 1.0


class TestMeanAp:
    def test_two_class_mean(self):
        gts = [gt("a", (0, 0, 10, 10), 1), gt("a", (20, 20, 10, 10), 2)]
        dets = [det("a", (0, 0, 10, 10), 1, 0.9)]  # class 2 undetected
        value, per_class = mean_ap(dets, gts)
        assert per_class == {1: 1.0, 2: 0.0}
        assert value == 0.5

    def test_single_class(self):
        gts = [gt("a", (0, 0, 10, 10), 4)]
        dets = [det("a", (0, 0, 10, 10), 4, 0.2)]
        value, per_class = mean_ap(dets, gts)
        assert value == per_class[4] == 1.0

    def test_no_ground_truth_raises(self):
        with pytest.raises(NoGroundTruth):
            mean_ap([det("a", (0, 0, 5, 5), 1, 0.5)], [])

    def test_class_relabeling_invariance(self):
        rng = np.random.default_rng(5)
        dets, gts = random_instance(rng)
        base, _ = mean_ap(dets, gts)
        mapping = {0: 7, 1: 5, 2: 9}
        dets2 = [Detection(d.segment_id, d.box, mapping[d.class_id], d.score) for d in dets]
        gts2 = [GroundTruth(g.segment_id, g.box, mapping[g.class_id]) for g in gts]
        relabeled, _ = mean_ap(dets2, gts2)
        assert abs(base - relabeled) < 1e-12

    def test_undetected_classes_average_in_as_zero(self):
        rng = np.random.default_rng(15)
        dets, gts = random_instance(rng)
        value, per_class = mean_ap(dets, gts)
        assert abs(value - np.mean(list(per_class.values()))) < 1e-12


class TestCsvIo:
    def test_detections_round_trip(self, tmp_path):
        path = tmp_path / "dets.csv"
        path.write_text(
            "segment_id,x1,y1,x2,y2,class_id,score\n"
            "seg1,10,20,30,50,3,0.75\n"
            "seg2,0,0,5,5,1,0.5\n"
        )
        dets = read_detections(path)
        assert dets[0] == det("seg1", (10, 20, 20, 30), 3, 0.75)
        assert len(dets) == 2

    def test_ground_truth_without_header(self, tmp_path):
        path = tmp_path / "gt.csv"
        path.write_text("seg1,10,20,30,50,3\n")
        gts = read_ground_truth(path)
        assert gts == [gt("seg1", (10, 20, 20, 30), 3)]

    def test_bad_corners_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("seg1,30,20,10,50,3,0.5\n")
        with pytest.raises(ValueError):
            read_detections(path)
