import numpy as np
from dataclasses import dataclass
from typing import List

from app.constants import FEATURE_STRIDE, PROPOSAL_STREAM
from app.context import context
from app.data.scenes import Scene
from app.detection.boxes import clip_boxes, encode_deltas, iou_matrix
from app.dto.config_dto import ProposalSpec
from app.models.losses import RoITargets
from app.models.roi_head import RoI
from app.utils.utils import create_logger

proposals_log = create_logger(__name__, entity_name='PROPOSALS', level=context.log_level)


@dataclass
class ProposalSet:
    boxes: np.ndarray      # (N, 4) image coordinates
    labels: np.ndarray     # (N,) class id, 0 for background
    targets: np.ndarray    # (N, 4) regression targets, zero for background
    gt_index: np.ndarray   # (N,) source ground truth, -1 for background
    feature_stride: float

    def __len__(self) -> int:
        return len(self.boxes)

    @property
    def num_positive(self) -> int:
        return int(np.count_nonzero(self.labels))

    def rois(self, batch_index: int = 0) -> List[RoI]:
        return [RoI.from_image_box(batch_index, box, self.feature_stride) for box in self.boxes]

    def roi_targets(self) -> RoITargets:
        return RoITargets(labels=self.labels, deltas=self.targets)


def jitter_box(box: np.ndarray, jitter: float, rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Shifts the center by up to ±jitter of the size and scales each side by 1 ± jitter."""
    x0, y0, x1, y1 = box
    box_w, box_h = x1 - x0, y1 - y0
    shift_x, shift_y, scale_w, scale_h = rng.uniform(-jitter, jitter, size=4)
    center_x = x0 + 0.5 * box_w + shift_x * box_w
    center_y = y0 + 0.5 * box_h + shift_y * box_h
    new_w, new_h = box_w * (1.0 + scale_w), box_h * (1.0 + scale_h)
    jittered = np.array([center_x - 0.5 * new_w, center_y - 0.5 * new_h, center_x + 0.5 * new_w, center_y + 0.5 * new_h])
    return clip_boxes(jittered, height, width)[0]

def _random_box(spec: ProposalSpec, rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    box_w = int(rng.integers(min(spec.min_size, width), min(spec.max_size, width) + 1))
    box_h = int(rng.integers(min(spec.min_size, height), min(spec.max_size, height) + 1))
    x0 = int(rng.integers(0, width - box_w + 1))
    y0 = int(rng.integers(0, height - box_h + 1))
    return np.array([x0, y0, x0 + box_w, y0 + box_h], dtype=np.float64)

def generate_proposals(scene: Scene, spec: ProposalSpec, num_rois: int, fg_fraction: float, seed: int,
                       stream: int = PROPOSAL_STREAM, feature_stride: float = FEATURE_STRIDE) -> ProposalSet:
    """
    Stands in for a region proposal network: positives are jittered ground
    truth boxes overlapping their source by at least spec.positive_iou,
    negatives are random boxes overlapping every ground truth by less than
    spec.negative_iou. Deterministic given (seed, scene index, stream).
    """
    rng = np.random.default_rng([seed, scene.index, stream])
    gt = scene.gt_boxes
    boxes, labels, gt_index = [], [], []

    num_fg = int(round(num_rois * fg_fraction)) if len(gt) else 0
    for k in range(num_fg):
        source = k % len(gt)
        candidate = gt[source].copy()
        for _ in range(spec.max_attempts):
            jittered = jitter_box(gt[source], spec.jitter, rng, scene.height, scene.width)
            if iou_matrix(jittered, gt[source])[0, 0] >= spec.positive_iou:
                candidate = jittered
                break
        boxes.append(candidate)
        labels.append(int(scene.gt_labels[source]))
        gt_index.append(source)

    wanted_negatives = num_rois - len(boxes)
    for _ in range(wanted_negatives):
        for _ in range(spec.max_attempts):
            candidate = _random_box(spec, rng, scene.height, scene.width)
            if not len(gt) or iou_matrix(candidate, gt).max() < spec.negative_iou:
                boxes.append(candidate)
                labels.append(0)
                gt_index.append(-1)
                break
    if len(boxes) < num_rois:
        proposals_log.warning(
            f"Scene {scene.index}: found {wanted_negatives - (num_rois - len(boxes))} of {wanted_negatives} negatives "
            f"below IoU {spec.negative_iou} in {spec.max_attempts} attempts each; returning {len(boxes)} proposals"
        )

    boxes_array = np.array(boxes, dtype=np.float64).reshape(-1, 4)
    labels_array = np.array(labels, dtype=np.int64)
    gt_array = np.array(gt_index, dtype=np.int64)
    targets = np.zeros_like(boxes_array)
    positive = gt_array >= 0
    if positive.any():
        targets[positive] = encode_deltas(boxes_array[positive], gt[gt_array[positive]])
    return ProposalSet(
        boxes=boxes_array, labels=labels_array, targets=targets, gt_index=gt_array, feature_stride=feature_stride,
    )
