import numpy as np
from collections import defaultdict
from typing import Dict, List, Tuple

from app.detection.boxes import Detection, iou_matrix


def nms(dets: List[Detection], iou_threshold: float) -> List[Detection]:
    """
    Greedy non-maximum suppression. Survivors come out by descending score;
    equal scores keep their input order.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError(f"IoU threshold must lie in (0, 1), got {iou_threshold}")
    if not dets:
        return []
    order = sorted(range(len(dets)), key=lambda index: (-dets[index].score, index))
    overlaps = iou_matrix([det.box for det in dets], [det.box for det in dets])
    suppressed = np.zeros(len(dets), dtype=bool)
    keep = []
    for index in order:
        if suppressed[index]:
            continue
        keep.append(index)
        suppressed |= overlaps[index] > iou_threshold
    return [dets[index] for index in keep]

def batched_nms(dets: List[Detection], iou_threshold: float) -> List[Detection]:
    """NMS applied independently per (image, class); result sorted by descending score."""
    groups: Dict[Tuple[int, int], List[Detection]] = defaultdict(list)
    for det in dets:
        groups[(det.image_id, det.class_id)].append(det)
    survivors = []
    for key in sorted(groups):
        survivors.extend(nms(groups[key], iou_threshold))
    return sorted(survivors, key=lambda det: (det.image_id, -det.score))
