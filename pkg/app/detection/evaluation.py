import numpy as np
from collections import defaultdict
from typing import Dict, List, Optional, Sequence

from app.context import context
from app.detection.boxes import Detection, GroundTruth, iou_matrix
from app.dto.report_dto import MapReport
from app.utils.utils import create_logger

evaluation_log = create_logger(__name__, entity_name='EVALUATION', level=context.log_level)


def voc_ap(recall: np.ndarray, precision: np.ndarray) -> float:
    """Area under the precision envelope of a PR curve (continuous interpolation)."""
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(mpre.size - 1, 0, -1):
        mpre[i - 1] = max(mpre[i - 1], mpre[i])
    changes = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[changes + 1] - mrec[changes]) * mpre[changes + 1]))

def average_precision(detections: Sequence[Detection], ground_truth: Sequence[GroundTruth], iou: float = 0.5) -> float:
    """AP of one class: detections greedily matched by descending score, each ground truth at most once."""
    boxes_by_image: Dict[int, List] = defaultdict(list)
    for gt in ground_truth:
        boxes_by_image[gt.image_id].append(gt.box)
    matched = {image_id: np.zeros(len(boxes), dtype=bool) for image_id, boxes in boxes_by_image.items()}
    num_positives = len(ground_truth)
    if num_positives == 0:
        return 0.0

    order = sorted(range(len(detections)), key=lambda index: (-detections[index].score, index))
    true_positive = np.zeros(len(order))
    false_positive = np.zeros(len(order))
    for rank, index in enumerate(order):
        det = detections[index]
        candidates = boxes_by_image.get(det.image_id)
        if not candidates:
            false_positive[rank] = 1
            continue
        overlaps = iou_matrix(det.box, candidates)[0]
        best = int(np.argmax(overlaps))
        if overlaps[best] >= iou and not matched[det.image_id][best]:
            matched[det.image_id][best] = True
            true_positive[rank] = 1
        else:
            false_positive[rank] = 1

    tp = np.cumsum(true_positive)
    fp = np.cumsum(false_positive)
    recall = tp / num_positives
    precision = tp / np.maximum(tp + fp, np.finfo(np.float64).eps)
    return voc_ap(recall, precision)

def evaluate_map(detections: Sequence[Detection], ground_truth: Sequence[GroundTruth], iou: float = 0.5,
                 num_classes: Optional[int] = None) -> MapReport:
    """Per-class VOC AP and their mean over classes that have ground truth."""
    gt_by_class: Dict[int, List[GroundTruth]] = defaultdict(list)
    for gt in ground_truth:
        gt_by_class[gt.class_id].append(gt)
    dets_by_class: Dict[int, List[Detection]] = defaultdict(list)
    for det in detections:
        dets_by_class[det.class_id].append(det)

    classes = set(gt_by_class)
    if num_classes is not None:
        classes |= set(range(1, num_classes + 1))
    per_class = {}
    for class_id in sorted(classes):
        if not gt_by_class[class_id]:
            continue
        per_class[class_id] = average_precision(dets_by_class[class_id], gt_by_class[class_id], iou)

    mean_ap = float(np.mean(list(per_class.values()))) if per_class else 0.0
    evaluation_log.debug(f"mAP@{iou}: {mean_ap:.4f} over {len(per_class)} classes")
    return MapReport(
        per_class_ap=per_class,
        mean_ap=mean_ap,
        iou=iou,
        num_detections=len(detections),
        num_ground_truth=len(ground_truth),
    )
