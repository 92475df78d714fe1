import numpy as np
from typing import List, Optional, Sequence, Tuple

from app.constants import BACKBONE_BLOCKS, FEATURE_STRIDE
from app.context import context
from app.core import ParamStore, Tensor
from app.detection.boxes import Detection, clip_boxes, decode_deltas
from app.detection.nms import batched_nms
from app.dto.config_dto import ModelConfig
from app.models.backbone import TinyBackbone
from app.models.fusion import MultiScaleFusion
from app.models.losses import log_softmax
from app.models.mlkp_block import MLKPBlock
from app.models.roi_head import DetectionHead, RoI, RoIPool
from app.utils.utils import create_logger

detector_log = create_logger(__name__, entity_name='DETECTOR', level=context.log_level)


def normalize_image(image: Tensor, dtype) -> Tensor:
    """Maps [0, 1] pixels to [-1, 1]."""
    return ((image - 0.5) * 2.0).astype(dtype, copy=False)


class MLKPDetector:
    """
    Backbone → multi-scale fusion → MLKP → max RoI pooling → linear head.
    All parameters live in one ParamStore; a fresh store is initialized from
    `seed` when none is given.
    """
    feature_stride = FEATURE_STRIDE

    def __init__(self, cfg: ModelConfig, store: Optional[ParamStore] = None, seed: int = 0, dtype=np.float64):
        self.cfg = cfg
        rng = np.random.default_rng(seed) if store is None else None
        self.store = store if store is not None else ParamStore(dtype)
        self.backbone = TinyBackbone(self.store, cfg.backbone, rng=rng)
        self.fusion = MultiScaleFusion(
            self.store, cfg.fusion, {block_id: self.backbone.layer_channels(block_id) for block_id in BACKBONE_BLOCKS},
            rng=rng,
        )
        self.mlkp = MLKPBlock(self.store, cfg.mlkp, self.fusion.out_channels, rng=rng)
        self.pool = RoIPool(cfg.pool_size, cfg.pool_size)
        self.head = DetectionHead(
            self.store, self.mlkp.out_channels * cfg.pool_size * cfg.pool_size, cfg.num_classes, rng=rng
        )
        detector_log.debug(
            f"Detector with {len(self.store)} parameter tensors ({self.store.num_scalars()} scalars), "
            f"MLKP output {self.mlkp.out_channels} channels"
        )

    @property
    def dtype(self) -> np.dtype:
        return self.store.dtype

    def features(self, image: Tensor) -> Tensor:
        """The location-aware kernel representation G of an image batch."""
        fused = self.fusion.forward(self.backbone.forward(normalize_image(image, self.dtype)))
        return self.mlkp.forward(fused)

    def forward(self, image: Tensor, rois: Sequence[RoI]) -> Tuple[np.ndarray, np.ndarray]:
        pooled = self.pool.forward(self.features(image), rois)
        return self.head.forward(pooled)

    def backward(self, grad_logits: np.ndarray, grad_deltas: np.ndarray) -> None:
        grad_pooled = self.head.backward(grad_logits, grad_deltas)
        grad_g = self.pool.backward(grad_pooled)
        grad_fused = self.mlkp.backward(grad_g).input
        self.backbone.backward(self.fusion.backward(grad_fused))

    def release(self) -> None:
        self.mlkp.release()
        self.fusion.release()
        self.pool.release()

    def detect(self, image: Tensor, boxes: np.ndarray, image_id: int = 0, score_threshold: float = 0.05,
               nms_iou: float = 0.3) -> List[Detection]:
        """Scores proposal boxes (image coordinates) and returns per-class NMS survivors."""
        if len(boxes) == 0:
            return []
        rois = [RoI.from_image_box(0, box, self.feature_stride) for box in boxes]
        logits, deltas = self.forward(image, rois)
        self.release()
        probs = np.exp(log_softmax(logits.astype(np.float64)))
        height, width = image.shape[2], image.shape[3]

        dets = []
        for class_id in range(1, self.cfg.num_classes + 1):
            scores = probs[:, class_id]
            keep = np.flatnonzero(scores >= score_threshold)
            if not keep.size:
                continue
            class_deltas = deltas[keep, 4 * (class_id - 1):4 * class_id].astype(np.float64)
            decoded = clip_boxes(decode_deltas(boxes[keep], class_deltas), height, width)
            dets.extend(
                Detection(box=tuple(float(v) for v in box), class_id=class_id, score=float(score), image_id=image_id)
                for box, score in zip(decoded, scores[keep])
            )
        return batched_nms(dets, nms_iou)
