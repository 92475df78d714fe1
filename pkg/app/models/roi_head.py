import math
import numpy as np
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from app.core import ConvLayer, ConvParams, Op, ParamStore, Tensor, check_tensor, conv2d, record_branch
from app.core.tensor import describe
from app.exceptions import ShapeMismatchError


@dataclass(frozen=True)
class RoI:
    """A proposal rectangle in continuous feature-map coordinates."""
    batch_index: int
    x0: float
    y0: float
    x1: float
    y1: float

    def clipped(self, height: int, width: int) -> 'RoI':
        x0 = min(max(self.x0, 0.0), float(width))
        y0 = min(max(self.y0, 0.0), float(height))
        x1 = min(max(self.x1, x0), float(width))
        y1 = min(max(self.y1, y0), float(height))
        return RoI(self.batch_index, x0, y0, x1, y1)

    @classmethod
    def from_image_box(cls, batch_index: int, box: Sequence[float], stride: float) -> 'RoI':
        x0, y0, x1, y1 = (float(value) / stride for value in box)
        return cls(batch_index, x0, y0, x1, y1)


def _bin_ranges(start: float, stop: float, pooled: int, limit: int) -> List[Tuple[int, int]]:
    """Rows (or columns) covered by each pooled cell, every range non-empty and inside [0, limit)."""
    first = math.floor(start)
    extent = max(math.ceil(stop) - first, 1)
    ranges = []
    for index in range(pooled):
        lo = first + (index * extent) // pooled
        hi = first - ((-(index + 1) * extent) // pooled)
        lo = min(max(lo, 0), limit - 1)
        hi = min(max(hi, lo + 1), limit)
        ranges.append((lo, hi))
    return ranges

def roi_bins(roi: RoI, pool_h: int, pool_w: int, height: int, width: int):
    roi = roi.clipped(height, width)
    return _bin_ranges(roi.y0, roi.y1, pool_h, height), _bin_ranges(roi.x0, roi.x1, pool_w, width)

def max_roi_pool(g: Tensor, rois: Sequence[RoI], pool_h: int, pool_w: int) -> Tuple[Tensor, np.ndarray]:
    """
    Max pooling of every RoI onto a pool_h × pool_w grid. Returns the pooled
    features (|rois|, c, pool_h, pool_w) and, per output cell, the flat
    h·w index of the input cell it was taken from.
    """
    check_tensor(g, 'RoI pooling input')
    if pool_h < 1 or pool_w < 1:
        raise ValueError(f"Pool size must be positive, got {pool_h}×{pool_w}")
    n, channels, height, width = g.shape
    pooled = np.zeros((len(rois), channels, pool_h, pool_w), dtype=g.dtype)
    argmax = np.zeros((len(rois), channels, pool_h, pool_w), dtype=np.int64)
    for k, roi in enumerate(rois):
        if not 0 <= roi.batch_index < n:
            raise ValueError(f"RoI {k} refers to batch index {roi.batch_index}, feature map has batch {n}")
        rows, cols = roi_bins(roi, pool_h, pool_w, height, width)
        for i, (row_lo, row_hi) in enumerate(rows):
            for j, (col_lo, col_hi) in enumerate(cols):
                window = g[roi.batch_index, :, row_lo:row_hi, col_lo:col_hi].reshape(channels, -1)
                local = np.argmax(window, axis=1)
                span = col_hi - col_lo
                argmax[k, :, i, j] = (row_lo + local // span) * width + col_lo + local % span
                pooled[k, :, i, j] = window[np.arange(channels), local]
    return pooled, argmax


class RoIPool(Op):
    name = 'max_roi_pool'

    def __init__(self, pool_h: int, pool_w: int):
        super().__init__()
        self.pool_h = pool_h
        self.pool_w = pool_w

    def forward(self, g: Tensor, rois: Sequence[RoI]) -> Tensor:
        pooled, argmax = max_roi_pool(g, rois, self.pool_h, self.pool_w)
        record_branch(argmax)
        self._cache = (g.shape, np.array([roi.batch_index for roi in rois], dtype=np.int64), argmax)
        return pooled

    def backward(self, grad_out: Tensor) -> Tensor:
        """Routes every output gradient to the single input cell it was pooled from."""
        g_shape, batch, argmax = self._cached()
        n, channels, height, width = g_shape
        grad = np.zeros((n, channels, height * width), dtype=grad_out.dtype)
        if len(batch):
            batch_index = np.broadcast_to(batch[:, None, None, None], argmax.shape)
            channel_index = np.broadcast_to(np.arange(channels)[None, :, None, None], argmax.shape)
            np.add.at(grad, (batch_index, channel_index, argmax), grad_out)
        return grad.reshape(g_shape)


@dataclass
class HeadParams:
    """Linear classifier (K+1 logits) and class-specific box regressor (4K deltas) as 1×1 maps."""
    cls: ConvParams
    box: ConvParams

    @property
    def in_features(self) -> int:
        return self.cls.in_channels


def _flatten(pooled: Tensor, params: HeadParams) -> Tensor:
    check_tensor(pooled, 'pooled features')
    features = pooled.shape[1] * pooled.shape[2] * pooled.shape[3]
    if features != params.in_features or params.box.in_channels != params.in_features:
        raise ShapeMismatchError(
            f"Pooled features {describe(pooled.shape)} give {features} inputs, head expects {params.in_features}"
        )
    return pooled.reshape(pooled.shape[0], features, 1, 1)

def head_forward(pooled: Tensor, params: HeadParams) -> Tuple[np.ndarray, np.ndarray]:
    flat = _flatten(pooled, params)
    logits = conv2d(flat, params.cls)
    deltas = conv2d(flat, params.box)
    return logits[:, :, 0, 0], deltas[:, :, 0, 0]


class DetectionHead:
    def __init__(self, store: ParamStore, in_features: int, num_classes: int, prefix: str = 'head',
                 rng: Optional[np.random.Generator] = None):
        self.num_classes = num_classes
        self.cls_score = ConvLayer(store, f"{prefix}.cls_score", in_features, num_classes + 1, 1, rng=rng)
        self.bbox_pred = ConvLayer(store, f"{prefix}.bbox_pred", in_features, 4 * num_classes, 1, rng=rng)
        self._pooled_shape = None

    @property
    def params(self) -> HeadParams:
        return HeadParams(cls=self.cls_score.params, box=self.bbox_pred.params)

    def forward(self, pooled: Tensor) -> Tuple[np.ndarray, np.ndarray]:
        flat = _flatten(pooled, self.params)
        self._pooled_shape = pooled.shape
        logits = self.cls_score.forward(flat)
        deltas = self.bbox_pred.forward(flat)
        return logits[:, :, 0, 0], deltas[:, :, 0, 0]

    def backward(self, grad_logits: np.ndarray, grad_deltas: np.ndarray) -> Tensor:
        grad_flat = self.cls_score.backward(grad_logits[:, :, None, None]).input
        grad_flat = grad_flat + self.bbox_pred.backward(grad_deltas[:, :, None, None]).input
        return grad_flat.reshape(self._pooled_shape)
