import numpy as np
from dataclasses import dataclass
from typing import Tuple

from app.constants import BOX_DELTA_CLAMP

Box = Tuple[float, float, float, float]


@dataclass(frozen=True)
class Detection:
    box: Box
    class_id: int
    score: float
    image_id: int = 0


@dataclass(frozen=True)
class GroundTruth:
    box: Box
    class_id: int
    image_id: int = 0


def as_boxes(boxes) -> np.ndarray:
    return np.asarray(boxes, dtype=np.float64).reshape(-1, 4)

def box_area(boxes: np.ndarray) -> np.ndarray:
    boxes = as_boxes(boxes)
    return np.maximum(boxes[:, 2] - boxes[:, 0], 0.0) * np.maximum(boxes[:, 3] - boxes[:, 1], 0.0)

def iou_matrix(a, b) -> np.ndarray:
    """Pairwise IoU of (x0, y0, x1, y1) boxes in continuous coordinates."""
    a, b = as_boxes(a), as_boxes(b)
    x0 = np.maximum(a[:, None, 0], b[None, :, 0])
    y0 = np.maximum(a[:, None, 1], b[None, :, 1])
    x1 = np.minimum(a[:, None, 2], b[None, :, 2])
    y1 = np.minimum(a[:, None, 3], b[None, :, 3])
    inter = np.maximum(x1 - x0, 0.0) * np.maximum(y1 - y0, 0.0)
    union = box_area(a)[:, None] + box_area(b)[None, :] - inter
    with np.errstate(invalid='ignore', divide='ignore'):
        return np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)

def box_iou(a: Box, b: Box) -> float:
    return float(iou_matrix(a, b)[0, 0])

def encode_deltas(boxes, targets) -> np.ndarray:
    """(Δx/w, Δy/h, ln(w'/w), ln(h'/h)) taking boxes onto targets."""
    boxes, targets = as_boxes(boxes), as_boxes(targets)
    widths = boxes[:, 2] - boxes[:, 0]
    heights = boxes[:, 3] - boxes[:, 1]
    target_widths = targets[:, 2] - targets[:, 0]
    target_heights = targets[:, 3] - targets[:, 1]
    dx = ((targets[:, 0] + 0.5 * target_widths) - (boxes[:, 0] + 0.5 * widths)) / widths
    dy = ((targets[:, 1] + 0.5 * target_heights) - (boxes[:, 1] + 0.5 * heights)) / heights
    dw = np.log(target_widths / widths)
    dh = np.log(target_heights / heights)
    return np.stack([dx, dy, dw, dh], axis=1)

def decode_deltas(boxes, deltas) -> np.ndarray:
    boxes = as_boxes(boxes)
    deltas = np.asarray(deltas, dtype=np.float64).reshape(-1, 4)
    widths = boxes[:, 2] - boxes[:, 0]
    heights = boxes[:, 3] - boxes[:, 1]
    centers_x = boxes[:, 0] + 0.5 * widths + deltas[:, 0] * widths
    centers_y = boxes[:, 1] + 0.5 * heights + deltas[:, 1] * heights
    new_widths = widths * np.exp(np.minimum(deltas[:, 2], BOX_DELTA_CLAMP))
    new_heights = heights * np.exp(np.minimum(deltas[:, 3], BOX_DELTA_CLAMP))
    return np.stack([
        centers_x - 0.5 * new_widths,
        centers_y - 0.5 * new_heights,
        centers_x + 0.5 * new_widths,
        centers_y + 0.5 * new_heights,
    ], axis=1)

def clip_boxes(boxes, height: float, width: float) -> np.ndarray:
    boxes = as_boxes(boxes).copy()
    boxes[:, [0, 2]] = np.clip(boxes[:, [0, 2]], 0.0, width)
    boxes[:, [1, 3]] = np.clip(boxes[:, [1, 3]], 0.0, height)
    return boxes
