"""Brute-force reference implementations used to cross-check the fast paths."""
import math
import numpy as np
from typing import List, Sequence, Tuple

from app.detection.boxes import Detection


def direct_conv2d(x: np.ndarray, weights: np.ndarray, bias: np.ndarray, stride: int = 1, padding: int = 0) -> np.ndarray:
    n, c_in, h, w = x.shape
    c_out, _, kh, kw = weights.shape
    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((n, c_out, h_out, w_out))
    for b in range(n):
        for o in range(c_out):
            for i in range(h_out):
                for j in range(w_out):
                    total = bias[o]
                    for c in range(c_in):
                        for p in range(kh):
                            for q in range(kw):
                                row = i * stride + p - padding
                                col = j * stride + q - padding
                                if 0 <= row < h and 0 <= col < w:
                                    total += x[b, c, row, col] * weights[o, c, p, q]
                    out[b, o, i, j] = total
    return out

def direct_deconv2d(x: np.ndarray, weights: np.ndarray, bias: np.ndarray, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Scatter form: every input pixel spreads weights[:, c] onto its strided output window."""
    n, c_in, h, w = x.shape
    c_out, _, kh, kw = weights.shape
    h_out = (h - 1) * stride - 2 * padding + kh
    w_out = (w - 1) * stride - 2 * padding + kw
    out = np.zeros((n, c_out, h_out, w_out))
    for b in range(n):
        for o in range(c_out):
            out[b, o] += bias[o]
            for c in range(c_in):
                for i in range(h):
                    for j in range(w):
                        for p in range(kh):
                            for q in range(kw):
                                row = i * stride + p - padding
                                col = j * stride + q - padding
                                if 0 <= row < h_out and 0 <= col < w_out:
                                    out[b, o, row, col] += x[b, c, i, j] * weights[o, c, p, q]
    return out

def _reference_bins(start: float, stop: float, pooled: int, limit: int) -> List[Tuple[int, int]]:
    """Half-open [lo, hi) index ranges: floor(start) + floor(i*H/p) up to floor(start) + ceil((i+1)*H/p)."""
    start = min(max(start, 0.0), float(limit))
    stop = min(max(stop, start), float(limit))
    first = math.floor(start)
    size = max(math.ceil(stop) - first, 1)
    ranges = []
    for i in range(pooled):
        lo = first + math.floor(i * size / pooled)
        hi = first + math.ceil((i + 1) * size / pooled)
        lo = min(max(lo, 0), limit - 1)
        hi = min(max(hi, lo + 1), limit)
        ranges.append((lo, hi))
    return ranges

def exhaustive_roi_max(g: np.ndarray, batch_index: int, box: Sequence[float], pool_h: int, pool_w: int) -> np.ndarray:
    """Per-cell scalar max over the quantized window of an (x0, y0, x1, y1) RoI in feature coordinates."""
    channels, height, width = g.shape[1:]
    x0, y0, x1, y1 = (float(value) for value in box)
    rows = _reference_bins(y0, y1, pool_h, height)
    cols = _reference_bins(x0, x1, pool_w, width)
    out = np.zeros((channels, pool_h, pool_w), dtype=g.dtype)
    for c in range(channels):
        for i, (row_lo, row_hi) in enumerate(rows):
            for j, (col_lo, col_hi) in enumerate(cols):
                best = -np.inf
                for row in range(row_lo, row_hi):
                    for col in range(col_lo, col_hi):
                        best = max(best, g[batch_index, c, row, col])
                out[c, i, j] = best
    return out

def _pair_iou(a: Sequence[float], b: Sequence[float]) -> float:
    inter_w = max(min(a[2], b[2]) - max(a[0], b[0]), 0.0)
    inter_h = max(min(a[3], b[3]) - max(a[1], b[1]), 0.0)
    inter = inter_w * inter_h
    union = max(a[2] - a[0], 0.0) * max(a[3] - a[1], 0.0) + max(b[2] - b[0], 0.0) * max(b[3] - b[1], 0.0) - inter
    return inter / union if union > 0 else 0.0

def reference_nms(dets: List[Detection], iou_threshold: float) -> List[Detection]:
    """Quadratic greedy NMS: a box survives unless a kept, higher-ranked box overlaps it."""
    ranked = sorted(enumerate(dets), key=lambda pair: (-pair[1].score, pair[0]))
    kept: List[Detection] = []
    for _, det in ranked:
        if all(_pair_iou(det.box, other.box) <= iou_threshold for other in kept):
            kept.append(det)
    return kept
