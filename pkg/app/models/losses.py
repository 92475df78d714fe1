import numpy as np
from dataclasses import dataclass

from app.constants import REGRESSION_LOSS_WEIGHT
from app.core import record_branch


@dataclass
class RoITargets:
    labels: np.ndarray   # (N,) class ids, 0 for background
    deltas: np.ndarray   # (N, 4) regression targets, ignored for background


@dataclass
class LossResult:
    loss: float
    classification: float
    regression: float
    grad_logits: np.ndarray
    grad_deltas: np.ndarray


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))

def smooth_l1(diff: np.ndarray) -> np.ndarray:
    absolute = np.abs(diff)
    return np.where(absolute < 1.0, 0.5 * diff * diff, absolute - 0.5)

def detection_loss(logits: np.ndarray, deltas: np.ndarray, targets: RoITargets,
                   regression_weight: float = REGRESSION_LOSS_WEIGHT) -> LossResult:
    """
    Softmax cross-entropy over all RoIs plus smooth-L1 on the class-specific
    deltas of positive RoIs, both averaged over the number of RoIs.
    """
    count = logits.shape[0]
    if count == 0:
        raise ValueError("Detection loss needs at least one RoI")
    labels = np.asarray(targets.labels, dtype=np.int64)
    rows = np.arange(count)

    log_probs = log_softmax(logits)
    classification = float(-log_probs[rows, labels].mean())
    grad_logits = np.exp(log_probs)
    grad_logits[rows, labels] -= 1.0
    grad_logits /= count

    grad_deltas = np.zeros_like(deltas)
    regression = 0.0
    positives = np.flatnonzero(labels > 0)
    if positives.size:
        columns = 4 * (labels[positives, None] - 1) + np.arange(4)[None, :]
        diff = deltas[positives[:, None], columns] - targets.deltas[positives]
        record_branch(np.abs(diff) < 1.0)
        regression = float(smooth_l1(diff).sum() / count)
        grad_deltas[positives[:, None], columns] = regression_weight * np.clip(diff, -1.0, 1.0) / count

    loss = classification + regression_weight * regression
    return LossResult(
        loss=loss,
        classification=classification,
        regression=regression,
        grad_logits=grad_logits.astype(logits.dtype, copy=False),
        grad_deltas=grad_deltas,
    )
