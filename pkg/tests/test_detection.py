import numpy as np
import pytest

from app.detection.boxes import Detection, GroundTruth, box_iou, clip_boxes, decode_deltas, encode_deltas, iou_matrix
from app.detection.evaluation import average_precision, evaluate_map, voc_ap
from app.detection.export import format_detection, parse_detection, write_detections
from app.detection.nms import batched_nms, nms
from app.oracle import reference_nms
from app.utils.utils import load_text


def _det(box, score, class_id=1, image_id=0):
    return Detection(box=tuple(float(v) for v in box), class_id=class_id, score=score, image_id=image_id)

def test_iou_examples():
    assert box_iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0
    assert box_iou((0, 0, 10, 10), (20, 20, 30, 30)) == 0.0
    assert box_iou((0, 0, 10, 10), (5, 0, 15, 10)) == pytest.approx(50.0 / 150.0)
    assert box_iou((0, 0, 0, 0), (0, 0, 0, 0)) == 0.0
    assert iou_matrix([(0, 0, 1, 1)] * 2, [(0, 0, 1, 1)] * 3).shape == (2, 3)

def test_nms_suppresses_overlapping_lower_score():
    a, b, c = _det((0, 0, 10, 10), 0.9), _det((1, 1, 11, 11), 0.8), _det((20, 20, 30, 30), 0.7)
    assert nms([c, b, a], 0.3) == [a, c]

def test_nms_keeps_input_order_on_equal_scores():
    a, b = _det((0, 0, 10, 10), 0.5), _det((20, 20, 30, 30), 0.5)
    assert nms([b, a], 0.3) == [b, a]
    assert nms([_det((0, 0, 10, 10), 0.5), _det((0, 0, 10, 10), 0.5, image_id=1)], 0.3)[0].image_id == 0

def test_nms_rejects_bad_threshold():
    with pytest.raises(ValueError):
        nms([_det((0, 0, 1, 1), 0.5)], 1.0)
    assert nms([], 0.5) == []

def test_nms_matches_reference(rng):
    corners = rng.uniform(0, 60, size=(50, 2))
    sizes = rng.uniform(4, 30, size=(50, 2))
    dets = [_det((x, y, x + w, y + h), float(s)) for (x, y), (w, h), s in zip(corners, sizes, rng.uniform(size=50))]
    for threshold in (0.1, 0.3, 0.7):
        assert nms(dets, threshold) == reference_nms(dets, threshold)

def test_batched_nms_is_per_class_and_image():
    dets = [_det((0, 0, 10, 10), 0.9), _det((0, 0, 10, 10), 0.8, class_id=2), _det((0, 0, 10, 10), 0.7, image_id=1)]
    assert len(batched_nms(dets, 0.3)) == 3
    assert len(batched_nms(dets + [_det((0, 0, 10, 10), 0.6)], 0.3)) == 3

def test_voc_ap_of_a_perfect_curve():
    assert voc_ap(np.array([0.5, 1.0]), np.array([1.0, 1.0])) == 1.0
    assert voc_ap(np.array([]), np.array([])) == 0.0

def test_perfect_and_empty_detections():
    gts = [GroundTruth((0, 0, 10, 10), 1), GroundTruth((20, 20, 30, 30), 1, image_id=1)]
    perfect = [_det(gt.box, 0.9, image_id=gt.image_id) for gt in gts]
    assert average_precision(perfect, gts) == 1.0
    assert average_precision([], gts) == 0.0
    assert average_precision(perfect, []) == 0.0

def test_false_positive_between_two_hits():
    gts = [GroundTruth((0, 0, 10, 10), 1), GroundTruth((20, 20, 30, 30), 1)]
    dets = [_det((0, 0, 10, 10), 0.9), _det((50, 50, 60, 60), 0.8), _det((20, 20, 30, 30), 0.7)]
    # recall steps 0.5 at precision 1 and 1.0 at precision 2/3
    assert average_precision(dets, gts) == pytest.approx(0.5 + 0.5 * 2.0 / 3.0)

def test_duplicate_hit_counts_as_false_positive():
    gts = [GroundTruth((0, 0, 10, 10), 1)]
    dets = [_det((0, 0, 10, 10), 0.9), _det((0, 0, 10, 10), 0.8)]
    assert average_precision(dets, gts) == 1.0
    dets = [_det((0, 0, 10, 10), 0.8), _det((0, 0, 10, 10), 0.9, image_id=3)]
    assert average_precision(dets, gts) == pytest.approx(0.5)

def test_map_averages_classes_with_ground_truth():
    gts = [GroundTruth((0, 0, 10, 10), 1), GroundTruth((0, 0, 10, 10), 2)]
    dets = [_det((0, 0, 10, 10), 0.9, class_id=1), _det((40, 40, 50, 50), 0.9, class_id=2)]
    report = evaluate_map(dets, gts, num_classes=3)
    assert report.per_class_ap == {1: 1.0, 2: 0.0}
    assert report.mean_ap == 0.5
    assert report.num_detections == 2
    assert 'map50=0.500000' in report.render()

def test_detection_line_format():
    det = _det((1, 2, 3, 4.25), 0.5, class_id=2, image_id=7)
    assert format_detection(det) == "7 2 0.500000 1.000000 2.000000 3.000000 4.250000"
    assert parse_detection(format_detection(det)) == det

def test_write_detections(tmp_path):
    path = tmp_path / 'out' / 'detections.txt'
    write_detections([_det((0, 0, 1, 1), 0.25), _det((0, 0, 2, 2), 0.125, image_id=1)], str(path))
    lines = load_text(str(path)).splitlines()
    assert lines == ["0 1 0.250000 0.000000 0.000000 1.000000 1.000000", "1 1 0.125000 0.000000 0.000000 2.000000 2.000000"]

def test_deltas_take_boxes_onto_targets():
    boxes = np.array([[0.0, 0.0, 10.0, 20.0], [5.0, 5.0, 9.0, 7.0]])
    targets = np.array([[2.0, -1.0, 14.0, 17.0], [4.0, 6.0, 12.0, 10.0]])
    np.testing.assert_allclose(decode_deltas(boxes, encode_deltas(boxes, targets)), targets, atol=1e-12)
    np.testing.assert_array_equal(encode_deltas(boxes, boxes), np.zeros((2, 4)))

def test_decoding_clamps_size_deltas():
    decoded = decode_deltas([[0.0, 0.0, 10.0, 10.0]], [[0.0, 0.0, 1000.0, 1000.0]])
    assert np.all(np.isfinite(decoded))

def test_clip_boxes_to_image():
    np.testing.assert_array_equal(clip_boxes([[-5.0, 3.0, 40.0, 50.0]], 32, 32), [[0.0, 3.0, 32.0, 32.0]])

def test_map_ignores_monotone_score_transforms(rng):
    gts, dets = [], []
    for image_id in range(6):
        for _ in range(3):
            x, y = rng.uniform(0, 80, size=2)
            box = (float(x), float(y), float(x + 20), float(y + 20))
            class_id = int(rng.integers(1, 4))
            gts.append(GroundTruth(box, class_id, image_id=image_id))
            shift = rng.uniform(-6, 6, size=4)
            dets.append(_det(np.add(box, shift), float(rng.uniform()), class_id=class_id, image_id=image_id))
            x, y = rng.uniform(0, 80, size=2)
            clutter = (float(x), float(y), float(x + 15), float(y + 15))
            dets.append(_det(clutter, float(rng.uniform()), class_id=class_id, image_id=image_id))
    base = evaluate_map(dets, gts, num_classes=3)
    for transform in (lambda s: s ** 3, lambda s: float(np.exp(4.0 * s)) - 7.0, lambda s: 0.25 * s + 0.5):
        moved = [Detection(det.box, det.class_id, transform(det.score), det.image_id) for det in dets]
        report = evaluate_map(moved, gts, num_classes=3)
        assert report.mean_ap == base.mean_ap
        assert report.per_class_ap == base.per_class_ap
