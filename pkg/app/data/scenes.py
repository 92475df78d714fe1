import numpy as np
from dataclasses import dataclass
from typing import List

from app.constants import FILL_PATTERNS, MAX_SCENE_OVERLAP, PATTERN_PERIOD, PLACEMENT_ATTEMPTS
from app.context import context
from app.detection.boxes import GroundTruth, iou_matrix
from app.dto.config_dto import SceneSpec
from app.utils.utils import create_logger

scenes_log = create_logger(__name__, entity_name='SCENES', level=context.log_level)


@dataclass
class Scene:
    index: int
    image: np.ndarray       # (1, 3, H, W) in [0, 1]
    gt_boxes: np.ndarray    # (M, 4) image coordinates
    gt_labels: np.ndarray   # (M,) class ids in 1..K

    @property
    def height(self) -> int:
        return self.image.shape[2]

    @property
    def width(self) -> int:
        return self.image.shape[3]

    def ground_truth(self) -> List[GroundTruth]:
        return [
            GroundTruth(box=tuple(float(v) for v in box), class_id=int(label), image_id=self.index)
            for box, label in zip(self.gt_boxes, self.gt_labels)
        ]


def pattern_mask(pattern: str, height: int, width: int) -> np.ndarray:
    """Cells painted in the object's color; the rest get its darkened shade."""
    rows, cols = np.mgrid[0:height, 0:width]
    if pattern == 'solid':
        return np.ones((height, width), dtype=bool)
    if pattern == 'striped':
        return (rows // PATTERN_PERIOD) % 2 == 0
    if pattern == 'checkered':
        return (rows // PATTERN_PERIOD + cols // PATTERN_PERIOD) % 2 == 0
    raise ValueError(f"Unknown fill pattern '{pattern}'")

def _place(spec: SceneSpec, rng: np.random.Generator, placed: List[np.ndarray]):
    for _ in range(PLACEMENT_ATTEMPTS):
        box_w = int(rng.integers(spec.min_size, spec.max_size + 1))
        box_h = int(rng.integers(spec.min_size, spec.max_size + 1))
        x0 = int(rng.integers(0, spec.width - box_w + 1))
        y0 = int(rng.integers(0, spec.height - box_h + 1))
        box = np.array([x0, y0, x0 + box_w, y0 + box_h], dtype=np.float64)
        if not placed or iou_matrix(box, placed).max() <= MAX_SCENE_OVERLAP:
            return box
    return None

def generate_scene(spec: SceneSpec, index: int) -> Scene:
    """Renders scene `index` of the spec; identical (spec, index) give identical scenes."""
    rng = np.random.default_rng([spec.seed, index])
    base = rng.uniform(0.3, 0.7, size=3)
    texture = spec.noise * rng.uniform(-1.0, 1.0, size=(3, spec.height, spec.width))
    image = np.clip(base[:, None, None] + texture, 0.0, 1.0)

    boxes: List[np.ndarray] = []
    labels: List[int] = []
    wanted = int(rng.integers(spec.min_objects, spec.max_objects + 1))
    for _ in range(wanted):
        box = _place(spec, rng, boxes)
        if box is None:
            scenes_log.debug(f"Scene {index}: placement failed, emitting {len(boxes)} of {wanted} objects")
            break
        label = int(rng.integers(1, spec.num_classes + 1))
        color = rng.uniform(0.0, 1.0, size=3)
        x0, y0, x1, y1 = (int(v) for v in box)
        mask = pattern_mask(FILL_PATTERNS[label - 1], y1 - y0, x1 - x0)
        image[:, y0:y1, x0:x1] = np.where(mask[None], color[:, None, None], 0.3 * color[:, None, None])
        boxes.append(box)
        labels.append(label)

    return Scene(
        index=index,
        image=image[None],
        gt_boxes=np.array(boxes, dtype=np.float64).reshape(-1, 4),
        gt_labels=np.array(labels, dtype=np.int64),
    )
