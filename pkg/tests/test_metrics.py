import numpy as np
import pytest

from rgbdcrf.metrics import (
    ConfusionMatrix,
    UndefinedMetricError,
    accumulate,
    classwise_iou,
    mean_accuracy,
    mean_iou,
    pixel_accuracy,
)

from conftest import label_map


def fixture_cm():
    return ConfusionMatrix(2, counts=np.array([[3, 1], [0, 4]]))


class TestAccumulate:
    def test_perfect_prediction_on_diagonal(self):
        cm = ConfusionMatrix(3)
        accumulate(cm, label_map([[2, 2], [2, 2]]), label_map([[2, 2], [2, 2]]))
        assert cm.counts[2, 2] == 4
        assert cm.counts.sum() == 4

    def test_ignore_pixels_skipped(self):
        cm = ConfusionMatrix(2)
        accumulate(cm, label_map([[0, 1]]), label_map([[255, 1]]))
        assert cm.counts.sum() == 1
        assert cm.counts[1, 1] == 1

    def test_counts_orientation(self):
        # counts[i][j]: true class i predicted as j
        cm = ConfusionMatrix(2)
        accumulate(cm, label_map([[0, 1]]), label_map([[1, 1]]))
        assert cm.counts[1, 0] == 1
        assert cm.counts[1, 1] == 1

    def test_out_of_range_label(self):
        cm = ConfusionMatrix(2)
        with pytest.raises(ValueError):
            accumulate(cm, label_map([[0]]), label_map([[5]]))

    def test_order_independent(self, rng):
        images = [
            (label_map(rng.integers(0, 3, (4, 4))), label_map(rng.integers(0, 3, (4, 4))))
            for _ in range(5)
        ]
        cm1 = ConfusionMatrix(3)
        for pred, gt in images:
            accumulate(cm1, pred, gt)
        cm2 = ConfusionMatrix(3)
        for pred, gt in reversed(images):
            accumulate(cm2, pred, gt)
        assert cm1 == cm2

    def test_merge_is_addition(self, rng):
        pred = label_map(rng.integers(0, 3, (4, 4)))
        gt = label_map(rng.integers(0, 3, (4, 4)))
        merged = accumulate(ConfusionMatrix(3), pred, gt) + accumulate(
            ConfusionMatrix(3), pred, gt
        )
        doubled = ConfusionMatrix(3)
        accumulate(doubled, pred, gt)
        accumulate(doubled, pred, gt)
        assert merged == doubled


class TestPixelAccuracy:
    def test_hand_count(self):
        assert pixel_accuracy(fixture_cm()) == pytest.approx(7 / 8)

    def test_perfect_diagonal(self):
        cm = ConfusionMatrix(2, counts=np.array([[5, 0], [0, 2]]))
        assert pixel_accuracy(cm) == 1.0

    def test_all_off_diagonal(self):
        cm = ConfusionMatrix(2, counts=np.array([[0, 3], [2, 0]]))
        assert pixel_accuracy(cm) == 0.0

    def test_empty_undefined(self):
        with pytest.raises(UndefinedMetricError):
            pixel_accuracy(ConfusionMatrix(2))


class TestMeanAccuracy:
    def test_hand_count(self):
        assert mean_accuracy(fixture_cm()) == pytest.approx((0.75 + 1.0) / 2)

    def test_absent_class_excluded(self):
        cm = ConfusionMatrix(3, counts=np.array([[3, 1, 0], [0, 4, 0], [0, 0, 0]]))
        assert mean_accuracy(cm) == pytest.approx((0.75 + 1.0) / 2)

    def test_perfect(self):
        cm = ConfusionMatrix(2, counts=np.array([[2, 0], [0, 9]]))
        assert mean_accuracy(cm) == 1.0


class TestIou:
    def test_hand_count(self):
        ious = classwise_iou(fixture_cm())
        assert ious[0] == pytest.approx(3 / 4)       # 3 / (4 + 3 - 3)
        assert ious[1] == pytest.approx(4 / 5)       # 4 / (4 + 5 - 4)
        assert mean_iou(fixture_cm()) == pytest.approx(0.775)

    def test_perfect(self):
        cm = ConfusionMatrix(2, counts=np.array([[5, 0], [0, 5]]))
        assert mean_iou(cm) == 1.0

    def test_zero_intersection_nonzero_union(self):
        # class 0 present in gt but never predicted correctly: IoU 0
        cm = ConfusionMatrix(2, counts=np.array([[0, 4], [0, 4]]))
        ious = classwise_iou(cm)
        assert ious[0] == 0.0

    def test_class_absent_everywhere_is_nan_and_excluded(self):
        cm = ConfusionMatrix(3, counts=np.array([[3, 1, 0], [0, 4, 0], [0, 0, 0]]))
        ious = classwise_iou(cm)
        assert np.isnan(ious[2])
        assert mean_iou(cm) == pytest.approx((0.75 + 0.8) / 2)

    def test_prediction_only_class_counts_as_zero(self):
        # class 2 never in gt but predicted: zero IoU pulled into the mean
        cm = ConfusionMatrix(3, counts=np.array([[3, 0, 1], [0, 4, 0], [0, 0, 0]]))
        ious = classwise_iou(cm)
        assert ious[2] == 0.0

    def test_mean_iou_never_exceeds_mean_accuracy(self, rng):
        for _ in range(1000):
            k = int(rng.integers(2, 6))
            counts = rng.integers(0, 20, size=(k, k))
            if rng.uniform() < 0.3:
                counts[rng.integers(0, k)] = 0  # absent gt class
            if counts.sum() == 0 or not (counts.sum(axis=1) > 0).any():
                continue
            cm = ConfusionMatrix(k, counts=counts)
            assert mean_iou(cm) <= mean_accuracy(cm) + 1e-12

    def test_metrics_in_unit_interval(self, rng):
        for _ in range(50):
            counts = rng.integers(0, 50, size=(4, 4))
            if counts.sum() == 0:
                continue
            cm = ConfusionMatrix(4, counts=counts)
            for metric in (pixel_accuracy, mean_accuracy, mean_iou):
                value = metric(cm)
                assert 0.0 <= value <= 1.0
