import math
import numpy as np
from typing import Dict, List, Optional, Tuple

from app.constants import FLOAT_FORMAT, PROPOSAL_STREAM
from app.context import context
from app.core import ParamStore
from app.data.proposals import generate_proposals
from app.data.scenes import generate_scene
from app.dto.config_dto import RunConfig, TrainConfig
from app.dto.report_dto import TrainSummary
from app.exceptions import NumericBlowUpError
from app.models.detector import MLKPDetector
from app.models.losses import detection_loss
from app.services.eval_service import build_detector, evaluate_detector
from app.utils.utils import create_logger, save_lines
from app.utils.weights import save_weights

train_service_log = create_logger(__name__, entity_name='TRAIN_SERVICE', level=context.log_level)


def metric_line(iteration: int, loss: float, map50: float) -> str:
    return f"iter={iteration} loss={FLOAT_FORMAT.format(loss)} map50={FLOAT_FORMAT.format(map50)}"

def sgd_step(store: ParamStore, velocity: Dict[str, np.ndarray], cfg: TrainConfig, iteration: int) -> float:
    """
    Momentum SGD on the accumulated gradients. Gradients are scaled down to
    the clipping norm first; weight decay applies to weights, not biases.
    Returns the pre-clipping gradient norm.
    """
    norm = store.grad_norm()
    scale = 1.0
    if cfg.clip_grad_norm is not None and norm > cfg.clip_grad_norm:
        scale = cfg.clip_grad_norm / norm
    lr = cfg.learning_rate(iteration)
    for name, param in store.items():
        grad = store.grad(name) * scale
        if name.endswith('.weight'):
            grad = grad + cfg.weight_decay * param
        step = velocity.setdefault(name, np.zeros_like(param))
        step *= cfg.momentum
        step -= lr * grad
        param += step
    return norm

def train_step(detector: MLKPDetector, cfg: RunConfig, iteration: int,
               velocity: Dict[str, np.ndarray]) -> float:
    """One image, its sampled RoIs, one parameter update. Iterations count from 1."""
    scene_index = (iteration - 1) % cfg.data.train_scenes
    epoch = (iteration - 1) // cfg.data.train_scenes
    scene = generate_scene(cfg.data.scene, scene_index)
    proposals = generate_proposals(
        scene, cfg.proposals, cfg.train.rois_per_image, cfg.train.fg_fraction, cfg.train.seed + epoch,
        stream=PROPOSAL_STREAM,
    )
    detector.store.zero_grad()
    logits, deltas = detector.forward(scene.image.astype(detector.dtype), proposals.rois())
    result = detection_loss(logits, deltas, proposals.roi_targets())
    if not math.isfinite(result.loss):
        detector.release()
        raise NumericBlowUpError(iteration, result.loss)
    detector.backward(result.grad_logits, result.grad_deltas)
    detector.release()
    norm = sgd_step(detector.store, velocity, cfg.train, iteration)
    if not math.isfinite(norm):
        raise NumericBlowUpError(iteration, norm)
    return result.loss

def train_detector(cfg: RunConfig, weights_out: Optional[str] = None, metrics_log: Optional[str] = None,
                   evaluate: bool = True) -> Tuple[MLKPDetector, TrainSummary]:
    """
    Trains from the configured seed (or from paths.weights_in) for
    train.iterations steps, evaluating every train.eval_interval iterations and
    after the last one. Zero iterations writes the initial weights.
    """
    detector = build_detector(cfg, cfg.paths.weights_in)
    velocity: Dict[str, np.ndarray] = {}
    losses: List[float] = []
    metric_lines: List[str] = []
    final_map = None
    window: List[float] = []

    train_service_log.info(
        f"Training {cfg.train.iterations} iterations, {detector.store.num_scalars()} parameters, "
        f"MLKP order {cfg.model.mlkp.max_order}, fusion {'on' if cfg.model.fusion.enabled else 'off'}"
    )
    for iteration in range(1, cfg.train.iterations + 1):
        try:
            loss = train_step(detector, cfg, iteration, velocity)
        except NumericBlowUpError as e:
            train_service_log.error(f"Numeric blow-up at iteration {e.iteration}: loss {e.loss}")
            raise
        losses.append(loss)
        window.append(loss)
        if evaluate and (iteration % cfg.train.eval_interval == 0 or iteration == cfg.train.iterations):
            final_map = evaluate_detector(detector, cfg).mean_ap
            line = metric_line(iteration, float(np.mean(window)), final_map)
            metric_lines.append(line)
            train_service_log.info(line)
            window = []

    if metrics_log:
        save_lines(metric_lines, metrics_log)
    if weights_out:
        save_weights(detector.store, weights_out)
    return detector, TrainSummary(
        iterations=cfg.train.iterations,
        loss_history=losses,
        metric_lines=metric_lines,
        final_map=final_map,
        weights_path=weights_out,
    )
