import numpy as np
from typing import Callable, List, Optional

from app.constants import NMS_ORACLE_BOXES, ROI_ORACLE_TRIALS
from app.context import context
from app.core import ConvParams, ParamStore, conv2d, deconv2d, materialize_channels
from app.detection.boxes import Detection
from app.detection.nms import nms
from app.dto.config_dto import ChecksConfig, MLKPConfig
from app.dto.report_dto import OracleCheck, OracleReport
from app.models.mlkp_block import MLKPBlock, apply_location_weight, compute_order_maps
from app.models.roi_head import RoI, max_roi_pool
from app.oracle.kernel_oracle import kernel_oracle, max_relative_error, predictor_oracle
from app.oracle.reference import direct_conv2d, direct_deconv2d, exhaustive_roi_max, reference_nms
from app.utils.utils import create_logger

oracle_service_log = create_logger(__name__, entity_name='ORACLE_SERVICE', level=context.log_level)

KERNEL_CHANNELS = 8
KERNEL_RANK = 16
KERNEL_SPATIAL = 4
PREDICTOR_CHANNELS = 5
PREDICTOR_ORDER = 3
PREDICTOR_RANK = 4


def _trial_rng(seed: int, name: str, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, sum(name.encode()), trial])

def _run_trials(name: str, trials: int, seed: int, tolerance: float,
                trial: Callable[[np.random.Generator], float]) -> OracleCheck:
    worst = 0.0
    for index in range(trials):
        worst = max(worst, trial(_trial_rng(seed, name, index)))
    check = OracleCheck(name=name, trials=trials, max_rel_error=worst, passed=worst <= tolerance)
    oracle_service_log.debug(f"{name}: {trials} trials, max_rel={worst:.3e}")
    return check

# --- Trials ---

def kernel_trial(order: int) -> Callable[[np.random.Generator], float]:
    """compute_order_maps against per-pixel products of inner products, random nonzero biases."""
    def trial(rng: np.random.Generator) -> float:
        cfg = MLKPConfig(max_order=order, ranks={r: KERNEL_RANK for r in range(2, order + 1)},
                         location_weight_enabled=False)
        store = ParamStore(np.float64)
        block = MLKPBlock(store, cfg, KERNEL_CHANNELS, rng=rng)
        for name in store:
            if name.endswith('.bias'):
                store.set(name, rng.standard_normal(store[name].shape))
        x = rng.standard_normal((2, KERNEL_CHANNELS, KERNEL_SPATIAL, KERNEL_SPATIAL))
        return max_relative_error(compute_order_maps(x, block.params, order), kernel_oracle(x, block.params, order))
    return trial

def predictor_trial(rng: np.random.Generator) -> float:
    """Explicit c^r coefficient tensors against their rank-1 factorization."""
    x = rng.standard_normal(PREDICTOR_CHANNELS)
    first_order = rng.standard_normal(PREDICTOR_CHANNELS)
    orders = {
        order: ([rng.standard_normal((PREDICTOR_RANK, PREDICTOR_CHANNELS)) for _ in range(order)],
                rng.standard_normal(PREDICTOR_RANK))
        for order in range(2, PREDICTOR_ORDER + 1)
    }
    return predictor_oracle(x, first_order, orders).rel_gap

def conv_trial(transposed: bool, kernel: int, stride: int, padding: int) -> Callable[[np.random.Generator], float]:
    def trial(rng: np.random.Generator) -> float:
        x = rng.standard_normal((2, 8, 5, 5))
        weights = rng.standard_normal((4, 8, kernel, kernel))
        bias = rng.standard_normal(4)
        p = ConvParams(weights, bias, stride, padding)
        if transposed:
            return max_relative_error(deconv2d(x, p), direct_deconv2d(x, weights, bias, stride, padding))
        return max_relative_error(conv2d(x, p), direct_conv2d(x, weights, bias, stride, padding))
    return trial

def location_remap_trial(rng: np.random.Generator) -> float:
    """Broadcast weighting must equal the materialized 1⊗m product bit for bit."""
    z = rng.standard_normal((2, 5, 4, 4))
    m = rng.uniform(0.0, 1.0, size=(2, 1, 4, 4))
    return 0.0 if np.array_equal(apply_location_weight(z, m), z * materialize_channels(m, 5)) else 1.0

def roi_pool_trial(rng: np.random.Generator) -> float:
    height, width = (int(v) for v in rng.integers(3, 12, size=2))
    g = rng.standard_normal((2, 3, height, width))
    x0, x1 = np.sort(rng.uniform(-1.0, width + 1.0, size=2))
    y0, y1 = np.sort(rng.uniform(-1.0, height + 1.0, size=2))
    roi = RoI(int(rng.integers(0, 2)), float(x0), float(y0), float(x1), float(y1))
    pool_h, pool_w = (int(v) for v in rng.integers(1, 5, size=2))
    pooled, _ = max_roi_pool(g, [roi], pool_h, pool_w)
    reference = exhaustive_roi_max(g, roi.batch_index, (roi.x0, roi.y0, roi.x1, roi.y1), pool_h, pool_w)
    return 0.0 if np.array_equal(pooled[0], reference) else float(np.max(np.abs(pooled[0] - reference)))

def nms_trial(rng: np.random.Generator) -> float:
    corners = rng.uniform(0.0, 100.0, size=(NMS_ORACLE_BOXES, 2))
    sizes = rng.uniform(5.0, 40.0, size=(NMS_ORACLE_BOXES, 2))
    scores = rng.uniform(0.0, 1.0, size=NMS_ORACLE_BOXES)
    dets = [
        Detection(box=(float(x), float(y), float(x + w), float(y + h)), class_id=1, score=float(score))
        for (x, y), (w, h), score in zip(corners, sizes, scores)
    ]
    threshold = float(rng.uniform(0.1, 0.9))
    return 0.0 if nms(dets, threshold) == reference_nms(dets, threshold) else 1.0

# --- Suite ---

def run_oracles(checks: ChecksConfig, trials: Optional[int] = None) -> OracleReport:
    """
    Runs every brute-force comparison. `trials` overrides the kernel, convolution
    and NMS trial counts; exact-match checks pass only at zero error.
    """
    trials = checks.oracle_trials if trials is None else trials
    tolerance = checks.oracle_tolerance
    seed = checks.seed
    report = OracleReport(tolerance=tolerance)
    report.checks.extend([
        _run_trials('kernel_order2', trials, seed, tolerance, kernel_trial(2)),
        _run_trials('kernel_order3', trials, seed, tolerance, kernel_trial(3)),
        _run_trials('predictor', checks.predictor_trials, seed, tolerance, predictor_trial),
        _run_trials('conv2d_direct', trials, seed, tolerance, conv_trial(False, 3, 1, 1)),
        _run_trials('conv2d_direct_strided', trials, seed, tolerance, conv_trial(False, 3, 2, 1)),
        _run_trials('deconv2d_direct', trials, seed, tolerance, conv_trial(True, 2, 2, 0)),
        _run_trials('location_remap', trials, seed, 0.0, location_remap_trial),
        _run_trials('roi_pool_exhaustive', ROI_ORACLE_TRIALS, seed, 0.0, roi_pool_trial),
        _run_trials('nms_reference', trials, seed, 0.0, nms_trial),
    ])
    for check in report.checks:
        if not check.passed:
            oracle_service_log.error(f"Oracle '{check.name}' disagrees: max_rel={check.max_rel_error:.3e}")
    return report

def failed_checks(report: OracleReport) -> List[str]:
    return [check.name for check in report.checks if not check.passed]
