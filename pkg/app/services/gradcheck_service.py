import numpy as np
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

from app.constants import PointwiseOp
from app.context import context
from app.core import Conv2d, ConvParams, Deconv2d, ParamStore, Pointwise
from app.dto.config_dto import ChecksConfig, FusionBlockConfig, FusionConfig, MLKPConfig
from app.dto.report_dto import GradReport
from app.exceptions import ConfigError
from app.models.fusion import MultiScaleFusion
from app.models.losses import RoITargets, detection_loss
from app.models.mlkp_block import MLKPBlock
from app.models.roi_head import DetectionHead, RoI, RoIPool
from app.oracle.gradcheck import finite_diff_check
from app.utils.utils import create_logger

gradcheck_service_log = create_logger(__name__, entity_name='GRADCHECK_SERVICE', level=context.log_level)


@dataclass
class GradCase:
    """A scalar loss over arrays that are perturbed in place, with its analytic gradients."""
    loss: Callable[[], float]
    params: Dict[str, np.ndarray]
    analytic: Dict[str, np.ndarray]


def _store_params(store: ParamStore) -> Dict[str, np.ndarray]:
    return {name: store[name] for name in store}

def _store_grads(store: ParamStore) -> Dict[str, np.ndarray]:
    return {name: store.grad(name).copy() for name in store}

# --- Cases ---

def conv_case(transposed: bool, kernel: int, stride: int, padding: int) -> Callable[[np.random.Generator], GradCase]:
    op_class = Deconv2d if transposed else Conv2d

    def build(rng: np.random.Generator) -> GradCase:
        x = rng.standard_normal((2, 3, 5, 5))
        weights = rng.standard_normal((4, 3, kernel, kernel))
        bias = rng.standard_normal(4)
        p = ConvParams(weights, bias, stride, padding)
        op = op_class()
        upstream = rng.standard_normal(op.forward(x, p).shape)
        grads = op.backward(upstream)
        return GradCase(
            loss=lambda: float(np.sum(op_class().forward(x, p) * upstream)),
            params={'input': x, 'weights': weights, 'bias': bias},
            analytic={'input': grads.input, 'weights': grads.weights, 'bias': grads.bias},
        )
    return build

def pointwise_case(op_name: str, broadcast: bool = False) -> Callable[[np.random.Generator], GradCase]:
    def build(rng: np.random.Generator) -> GradCase:
        a = rng.standard_normal((2, 3, 4, 4))
        b = rng.standard_normal((2, 1 if broadcast else 3, 4, 4)) if op_name in PointwiseOp.BINARY else None
        op = Pointwise(op_name)
        upstream = rng.standard_normal(op.forward(a, b).shape)
        grad_a, grad_b = op.backward(upstream)
        params, analytic = {'a': a}, {'a': grad_a}
        if b is not None:
            params['b'], analytic['b'] = b, grad_b
        return GradCase(
            loss=lambda: float(np.sum(Pointwise(op_name).forward(a, b) * upstream)),
            params=params,
            analytic=analytic,
        )
    return build

def mlkp_block_case(rng: np.random.Generator) -> GradCase:
    """Full block, c=6, 3×3, R=3, D=8, location weight on, loss ΣG²."""
    cfg = MLKPConfig(max_order=3, ranks={2: 8, 3: 8}, location_weight_enabled=True)
    store = ParamStore(np.float64)
    block = MLKPBlock(store, cfg, 6, rng=rng)
    x = rng.standard_normal((1, 6, 3, 3))

    def loss() -> float:
        g = block.forward(x, cache=False)
        return float(np.sum(g * g))

    g = block.forward(x)
    grads = block.backward(2.0 * g)
    block.release()
    return GradCase(
        loss=loss,
        params={'input': x, **_store_params(store)},
        analytic={'input': grads.input, **_store_grads(store)},
    )

def fusion_case(rng: np.random.Generator) -> GradCase:
    cfg = FusionConfig(fusion_width=3, blocks=[
        FusionBlockConfig(block_id='block4', layer_ids=[2, 1]),
        FusionBlockConfig(block_id='block5', layer_ids=[1]),
    ])
    store = ParamStore(np.float64)
    fusion = MultiScaleFusion(store, cfg, {'block4': [2, 3], 'block5': [4]}, rng=rng)
    features = {
        'block4': [rng.standard_normal((1, 2, 4, 4)), rng.standard_normal((1, 3, 4, 4))],
        'block5': [rng.standard_normal((1, 4, 2, 2))],
    }
    upstream = rng.standard_normal(fusion.forward(features).shape)
    layer_grads = fusion.backward(upstream)
    fusion.release()

    params = {f"{block_id}.layer{depth}": layer for block_id, layers in features.items() for depth, layer in enumerate(layers, 1)}
    analytic = {
        f"{block_id}.layer{depth}": grad for block_id, grads in layer_grads.items() for depth, grad in enumerate(grads, 1)
    }
    params.update(_store_params(store))
    analytic.update(_store_grads(store))
    return GradCase(loss=lambda: float(np.sum(fusion.forward(features) * upstream)), params=params, analytic=analytic)

def head_case(rng: np.random.Generator) -> GradCase:
    """Linear head plus detection loss over pooled features, including background RoIs."""
    num_classes = 3
    pooled = rng.standard_normal((6, 2, 2, 2))
    store = ParamStore(np.float64)
    head = DetectionHead(store, 8, num_classes, rng=rng)
    # head weights start at Xavier scale; spread the regression outputs across both smooth-L1 regions
    store.set('head.bbox_pred.weight', 2.0 * rng.standard_normal(store['head.bbox_pred.weight'].shape))
    targets = RoITargets(labels=np.array([0, 1, 2, 3, 1, 0]), deltas=rng.standard_normal((6, 4)))

    def loss() -> float:
        logits, deltas = head.forward(pooled)
        return detection_loss(logits, deltas, targets).loss

    logits, deltas = head.forward(pooled)
    result = detection_loss(logits, deltas, targets)
    grad_pooled = head.backward(result.grad_logits, result.grad_deltas)
    return GradCase(
        loss=loss,
        params={'pooled': pooled, **_store_params(store)},
        analytic={'pooled': grad_pooled, **_store_grads(store)},
    )

def roi_pool_case(rng: np.random.Generator) -> GradCase:
    g = rng.standard_normal((2, 3, 6, 6))
    rois = []
    for _ in range(4):
        x0, x1 = np.sort(rng.uniform(0.0, 6.0, size=2))
        y0, y1 = np.sort(rng.uniform(0.0, 6.0, size=2))
        rois.append(RoI(int(rng.integers(0, 2)), float(x0), float(y0), float(x1), float(y1)))
    pool = RoIPool(2, 2)
    upstream = rng.standard_normal(pool.forward(g, rois).shape)
    grad = pool.backward(upstream)
    return GradCase(
        loss=lambda: float(np.sum(RoIPool(2, 2).forward(g, rois) * upstream)),
        params={'feature_map': g},
        analytic={'feature_map': grad},
    )


GRADCHECK_SUITES: Dict[str, Callable[[np.random.Generator], GradCase]] = {
    'conv2d': conv_case(False, 3, 1, 1),
    'conv2d_strided': conv_case(False, 3, 2, 1),
    'deconv2d_k2s2': conv_case(True, 2, 2, 0),
    'deconv2d_k3p1': conv_case(True, 3, 1, 1),
    'pointwise_product': pointwise_case(PointwiseOp.PRODUCT),
    'pointwise_product_broadcast': pointwise_case(PointwiseOp.PRODUCT, broadcast=True),
    'pointwise_sum_broadcast': pointwise_case(PointwiseOp.SUM, broadcast=True),
    'pointwise_relu': pointwise_case(PointwiseOp.RELU),
    'pointwise_sigmoid': pointwise_case(PointwiseOp.SIGMOID),
    'mlkp_block': mlkp_block_case,
    'fusion': fusion_case,
    'head_loss': head_case,
    'roi_pool': roi_pool_case,
}

# --- Running ---

def run_case(title: str, build: Callable[[np.random.Generator], GradCase], checks: ChecksConfig,
             tolerance: Optional[float] = None) -> GradReport:
    """
    Checks one case, rebuilding it from a fresh seed while too many probes
    crossed a kink.
    """
    tolerance = checks.tolerance if tolerance is None else tolerance
    report = None
    for attempt in range(checks.max_reruns + 1):
        case = build(np.random.default_rng([checks.seed, attempt]))
        report = finite_diff_check(case.loss, case.params, case.analytic, checks.epsilon, tolerance, title)
        report.reruns = attempt
        if report.skip_fraction <= checks.max_skip_fraction:
            return report
        gradcheck_service_log.warning(
            f"{title}: {report.skip_fraction:.1%} of probes crossed a kink, rerunning with a fresh seed"
        )
    report.failures.append(
        f"skip fraction {report.skip_fraction:.3f} above {checks.max_skip_fraction} after {checks.max_reruns} reruns"
    )
    return report

def run_gradcheck(checks: ChecksConfig, tolerance: Optional[float] = None,
                  suites: Optional[List[str]] = None) -> List[GradReport]:
    names = list(GRADCHECK_SUITES) if suites is None else suites
    reports = []
    for name in names:
        if name not in GRADCHECK_SUITES:
            raise ConfigError([f"unknown gradient check '{name}'; available: {sorted(GRADCHECK_SUITES)}"])
        report = run_case(name, GRADCHECK_SUITES[name], checks, tolerance)
        level = gradcheck_service_log.info if report.passed else gradcheck_service_log.error
        level(f"{name}: {'PASS' if report.passed else 'FAIL'} ({report.checked} probes, {report.skipped} skipped)")
        reports.append(report)
    return reports

def render_reports(reports: List[GradReport]) -> str:
    passed = all(report.passed for report in reports)
    return '\n\n'.join(report.render() for report in reports) + f"\n\noverall: {'PASS' if passed else 'FAIL'}\n"
