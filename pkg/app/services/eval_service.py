import numpy as np
from typing import List, Optional, Tuple

from app.constants import EVAL_PROPOSAL_STREAM
from app.context import context
from app.core import resolve_dtype
from app.data.proposals import generate_proposals
from app.data.scenes import generate_scene
from app.detection.boxes import Detection, GroundTruth
from app.detection.evaluation import evaluate_map
from app.detection.export import write_detections
from app.dto.config_dto import RunConfig
from app.dto.report_dto import MapReport
from app.models.detector import MLKPDetector
from app.utils.weights import load_weights_into
from app.utils.utils import create_logger

eval_service_log = create_logger(__name__, entity_name='EVAL_SERVICE', level=context.log_level)


def eval_indices(cfg: RunConfig) -> range:
    """Held-out scenes follow the training scenes."""
    first = cfg.data.train_scenes
    return range(first, first + cfg.data.eval_scenes)

def build_detector(cfg: RunConfig, weights_path: Optional[str] = None) -> MLKPDetector:
    """A detector initialized from the training seed, then overwritten from `weights_path` when given."""
    detector = MLKPDetector(cfg.model, seed=cfg.train.seed, dtype=resolve_dtype(cfg.train.precision))
    if weights_path:
        load_weights_into(detector.store, weights_path)
    return detector

def detect_scenes(detector: MLKPDetector, cfg: RunConfig) -> Tuple[List[Detection], List[GroundTruth]]:
    detections: List[Detection] = []
    ground_truth: List[GroundTruth] = []
    for index in eval_indices(cfg):
        scene = generate_scene(cfg.data.scene, index)
        proposals = generate_proposals(
            scene, cfg.proposals, cfg.eval.proposals_per_image, cfg.train.fg_fraction, cfg.train.seed,
            stream=EVAL_PROPOSAL_STREAM,
        )
        detections.extend(detector.detect(
            scene.image.astype(detector.dtype), proposals.boxes, image_id=scene.index,
            score_threshold=cfg.eval.score_threshold, nms_iou=cfg.eval.nms_iou,
        ))
        ground_truth.extend(scene.ground_truth())
    return detections, ground_truth

def evaluate_detector(detector: MLKPDetector, cfg: RunConfig) -> MapReport:
    detections, ground_truth = detect_scenes(detector, cfg)
    report = evaluate_map(detections, ground_truth, cfg.eval.map_iou, num_classes=cfg.model.num_classes)
    eval_service_log.debug(
        f"Evaluated {cfg.data.eval_scenes} scenes: {len(detections)} detections, mAP {report.mean_ap:.4f}"
    )
    return report

def evaluate_weights(cfg: RunConfig, weights_path: str) -> MapReport:
    report = evaluate_detector(build_detector(cfg, weights_path), cfg)
    eval_service_log.info(f"mAP@{cfg.eval.map_iou:g} of {weights_path}: {report.mean_ap:.6f}")
    return report

def export_detections(cfg: RunConfig, weights_path: str, out_path: str) -> List[Detection]:
    detections, _ = detect_scenes(build_detector(cfg, weights_path), cfg)
    write_detections(detections, out_path)
    eval_service_log.info(f"Wrote {len(detections)} detections to {out_path}")
    return detections

def map_passes(report: MapReport, cfg: RunConfig) -> bool:
    return bool(np.isfinite(report.mean_ap)) and report.mean_ap >= cfg.eval.min_map
