import math
import numpy as np
import pytest

from app.constants import ROI_ORACLE_TRIALS
from app.core import ParamStore, branch_trace
from app.exceptions import ShapeMismatchError
from app.models.losses import RoITargets, detection_loss, smooth_l1
from app.models import roi_head
from app.models.roi_head import DetectionHead, RoI, RoIPool, max_roi_pool, roi_bins
from app.oracle import exhaustive_roi_max
from app.services.gradcheck_service import head_case, roi_pool_case, run_case
from app.services.oracle_service import roi_pool_trial


def _ramp():
    return np.arange(16.0).reshape(1, 1, 4, 4)

def test_whole_map_pools_quadrant_maxima():
    pooled, argmax = max_roi_pool(_ramp(), [RoI(0, 0.0, 0.0, 4.0, 4.0)], 2, 2)
    np.testing.assert_array_equal(pooled.ravel(), [5.0, 7.0, 13.0, 15.0])
    np.testing.assert_array_equal(argmax.ravel(), [5, 7, 13, 15])

def test_single_peak_keeps_its_location(rng):
    g = -np.abs(rng.standard_normal((1, 2, 5, 6)))
    g[0, 1, 3, 4] = 10.0
    pooled, argmax = max_roi_pool(g, [RoI(0, 0.0, 0.0, 6.0, 5.0)], 1, 1)
    assert pooled[0, 1, 0, 0] == 10.0
    assert argmax[0, 1, 0, 0] == 3 * 6 + 4

def test_every_bin_is_non_empty():
    rows, cols = roi_bins(RoI(0, 1.2, 1.2, 1.4, 1.4), 3, 3, 4, 4)
    assert all(lo < hi for lo, hi in rows + cols)
    pooled, _ = max_roi_pool(_ramp(), [RoI(0, 1.2, 1.2, 1.4, 1.4)], 3, 3)
    np.testing.assert_array_equal(pooled.ravel(), np.full(9, 5.0))

def test_rois_outside_the_map_are_clipped():
    pooled, _ = max_roi_pool(_ramp(), [RoI(0, -3.0, -3.0, 10.0, 10.0)], 1, 1)
    assert pooled[0, 0, 0, 0] == 15.0

def test_pooling_matches_exhaustive_scan(rng):
    g = rng.standard_normal((2, 3, 7, 9))
    rois = [RoI(1, 0.5, 1.5, 8.2, 6.9), RoI(0, 2.0, 0.0, 4.0, 3.0), RoI(0, -2.0, 5.5, 12.0, 9.0)]
    pooled, _ = max_roi_pool(g, rois, 3, 2)
    for k, roi in enumerate(rois):
        reference = exhaustive_roi_max(g, roi.batch_index, (roi.x0, roi.y0, roi.x1, roi.y1), 3, 2)
        np.testing.assert_array_equal(pooled[k], reference)

def test_pooling_matches_exhaustive_scan_on_random_pairs():
    errors = [roi_pool_trial(np.random.default_rng([17, trial])) for trial in range(ROI_ORACLE_TRIALS)]
    assert max(errors) == 0.0

def test_exhaustive_scan_detects_wrong_quantization(monkeypatch):
    def collapsed(start, stop, pooled, limit):
        return [(0, 1)] * pooled

    monkeypatch.setattr(roi_head, '_bin_ranges', collapsed)
    pooled, _ = max_roi_pool(_ramp(), [RoI(0, 0.0, 0.0, 4.0, 4.0)], 2, 2)
    reference = exhaustive_roi_max(_ramp(), 0, (0.0, 0.0, 4.0, 4.0), 2, 2)
    np.testing.assert_array_equal(reference.ravel(), [5.0, 7.0, 13.0, 15.0])
    assert not np.array_equal(pooled[0], reference)

def test_values_outside_the_roi_never_reach_its_pooled_features():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        height, width = (int(v) for v in rng.integers(4, 12, size=2))
        g = rng.standard_normal((1, 3, height, width))
        x0, y0 = rng.uniform(0.0, width - 1.0), rng.uniform(0.0, height - 1.0)
        x1, y1 = rng.uniform(x0, width), rng.uniform(y0, height)
        roi = RoI(0, float(x0), float(y0), float(x1), float(y1))
        pool_h, pool_w = (int(v) for v in rng.integers(1, 5, size=2))
        before, _ = max_roi_pool(g, [roi], pool_h, pool_w)

        row_lo, col_lo = math.floor(y0), math.floor(x0)
        row_hi, col_hi = max(math.ceil(y1), row_lo + 1), max(math.ceil(x1), col_lo + 1)
        outside = np.ones((height, width), dtype=bool)
        outside[row_lo:row_hi, col_lo:col_hi] = False
        perturbed = g + np.where(outside, rng.uniform(1.0, 100.0, size=(1, 3, height, width)), 0.0)
        after, _ = max_roi_pool(perturbed, [roi], pool_h, pool_w)
        assert np.array_equal(before, after)

def test_bad_batch_index_is_rejected():
    with pytest.raises(ValueError):
        max_roi_pool(_ramp(), [RoI(1, 0.0, 0.0, 2.0, 2.0)], 1, 1)

def test_backward_routes_to_pooled_cells():
    pool = RoIPool(2, 2)
    pool.forward(_ramp(), [RoI(0, 0.0, 0.0, 4.0, 4.0)])
    grad = pool.backward(np.ones((1, 1, 2, 2)))
    expected = np.zeros(16)
    expected[[5, 7, 13, 15]] = 1.0
    np.testing.assert_array_equal(grad.ravel(), expected)

def test_overlapping_rois_accumulate_gradient():
    pool = RoIPool(1, 1)
    pool.forward(_ramp(), [RoI(0, 0.0, 0.0, 4.0, 4.0), RoI(0, 2.0, 2.0, 4.0, 4.0)])
    grad = pool.backward(np.array([1.0, 2.0]).reshape(2, 1, 1, 1))
    assert grad[0, 0, 3, 3] == 3.0
    assert grad.sum() == 3.0

def test_pooling_records_its_argmax():
    g = _ramp()
    with branch_trace() as first:
        RoIPool(2, 2).forward(g, [RoI(0, 0.0, 0.0, 4.0, 4.0)])
    g[0, 0, 0, 0] = 100.0
    with branch_trace() as second:
        RoIPool(2, 2).forward(g, [RoI(0, 0.0, 0.0, 4.0, 4.0)])
    assert first.signature() != second.signature()

def test_image_box_is_scaled_by_stride():
    assert RoI.from_image_box(0, (8, 16, 32, 40), 8) == RoI(0, 1.0, 2.0, 4.0, 5.0)

def _head(num_classes=3, in_features=8):
    store = ParamStore(np.float64)
    return store, DetectionHead(store, in_features, num_classes, rng=np.random.default_rng(0))

def test_head_output_shapes(rng):
    _, head = _head()
    logits, deltas = head.forward(rng.standard_normal((5, 2, 2, 2)))
    assert logits.shape == (5, 4)
    assert deltas.shape == (5, 12)

def test_head_rejects_wrong_feature_count(rng):
    _, head = _head()
    with pytest.raises(ShapeMismatchError):
        head.forward(rng.standard_normal((5, 3, 2, 2)))

def test_zero_head_loss_is_log_of_class_count(rng):
    store, head = _head(num_classes=3)
    for name in store:
        store.set(name, np.zeros_like(store[name]))
    logits, deltas = head.forward(rng.standard_normal((4, 2, 2, 2)))
    result = detection_loss(logits, deltas, RoITargets(labels=np.zeros(4, dtype=int), deltas=np.zeros((4, 4))))
    assert result.loss == pytest.approx(math.log(4))
    assert result.regression == 0.0

def test_confident_correct_logits_give_near_zero_loss():
    logits = np.zeros((2, 3))
    logits[0, 1] = logits[1, 0] = 20.0
    deltas = np.zeros((2, 8))
    result = detection_loss(logits, deltas, RoITargets(labels=np.array([1, 0]), deltas=np.zeros((2, 4))))
    assert 0.0 < result.loss < 1e-8

def test_smooth_l1_regions():
    np.testing.assert_allclose(smooth_l1(np.array([0.5, -0.5, 2.0, -3.0])), [0.125, 0.125, 1.5, 2.5])

def test_regression_only_on_the_labelled_class():
    deltas = np.arange(8.0).reshape(1, 8) / 10.0
    result = detection_loss(np.zeros((1, 3)), deltas, RoITargets(labels=np.array([2]), deltas=np.zeros((1, 4))))
    assert not np.any(result.grad_deltas[0, :4])
    np.testing.assert_allclose(result.grad_deltas[0, 4:], deltas[0, 4:])
    assert result.regression == pytest.approx(0.5 * np.sum(deltas[0, 4:] ** 2))

def test_background_rois_have_no_regression_gradient(rng):
    result = detection_loss(
        rng.standard_normal((3, 3)), rng.standard_normal((3, 8)),
        RoITargets(labels=np.zeros(3, dtype=int), deltas=rng.standard_normal((3, 4))),
    )
    assert not np.any(result.grad_deltas)

def test_classification_gradient_rows_sum_to_zero(rng):
    result = detection_loss(
        rng.standard_normal((4, 3)), rng.standard_normal((4, 8)),
        RoITargets(labels=np.array([0, 1, 2, 1]), deltas=rng.standard_normal((4, 4))),
    )
    np.testing.assert_allclose(result.grad_logits.sum(axis=1), np.zeros(4), atol=1e-15)

def test_loss_needs_rois():
    with pytest.raises(ValueError):
        detection_loss(np.zeros((0, 3)), np.zeros((0, 8)), RoITargets(labels=np.zeros(0), deltas=np.zeros((0, 4))))

def test_head_gradients_match_finite_differences(checks):
    report = run_case('head_loss', head_case, checks)
    assert report.passed, report.render()

def test_pool_gradients_match_finite_differences(checks):
    report = run_case('roi_pool', roi_pool_case, checks)
    assert report.passed, report.render()
