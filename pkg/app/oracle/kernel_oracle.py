"""
Direct evaluation of the polynomial kernel maps, written with explicit loops
over plain Python numbers. Nothing here calls the tensor-core convolutions,
so agreement with compute_order_maps is an independent check.
"""
import itertools
import numpy as np
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from app.constants import (
    MAX_SUPPORTED_ORDER, ORACLE_MAX_CHANNELS, ORACLE_MAX_PIXELS, ORACLE_MAX_RANK, PREDICTOR_MAX_CHANNELS,
)
from app.exceptions import OracleSizeError


@dataclass
class PredictorComparison:
    explicit: float
    factored: float

    @property
    def rel_gap(self) -> float:
        return abs(self.explicit - self.factored) / max(1.0, abs(self.explicit), abs(self.factored))


def kernel_oracle(x: np.ndarray, params, order: int) -> np.ndarray:
    """z[n, d, i, j] = ∏_s (⟨u_s^{r,d}, x_ij⟩ + b_s^{r,d}) for every pixel."""
    if not 1 <= order <= MAX_SUPPORTED_ORDER:
        raise OracleSizeError(f"Kernel oracle supports orders up to {MAX_SUPPORTED_ORDER}, got {order}")
    convs = params.factor_convs[order][:order]
    batch, channels, height, width = x.shape
    rank = convs[0].weights.shape[0]
    if channels > ORACLE_MAX_CHANNELS or rank > ORACLE_MAX_RANK or height * width > ORACLE_MAX_PIXELS:
        raise OracleSizeError(
            f"Instance c={channels}, D={rank}, h·w={height * width} exceeds the oracle limits "
            f"(c ≤ {ORACLE_MAX_CHANNELS}, D ≤ {ORACLE_MAX_RANK}, h·w ≤ {ORACLE_MAX_PIXELS})"
        )
    factors = [(conv.weights[:, :, 0, 0].tolist(), conv.bias.tolist()) for conv in convs]
    pixels = x.tolist()
    out = np.zeros((batch, rank, height, width), dtype=np.float64)
    for n in range(batch):
        for d in range(rank):
            for i in range(height):
                for j in range(width):
                    value = 1.0
                    for weights, bias in factors:
                        inner = bias[d]
                        for k in range(channels):
                            inner += weights[d][k] * pixels[n][k][i][j]
                        value *= inner
                    out[n, d, i, j] = value
    return out

def _explicit_tensor(factors: Sequence[np.ndarray], weights: np.ndarray) -> Dict[Tuple[int, ...], float]:
    """W^r = Σ_d a^{r,d} u_1^{r,d} ⊗ … ⊗ u_r^{r,d}, stored entry by entry."""
    rank, channels = factors[0].shape
    tensor = {}
    for index in itertools.product(range(channels), repeat=len(factors)):
        entry = 0.0
        for d in range(rank):
            term = float(weights[d])
            for slot, k in enumerate(index):
                term *= float(factors[slot][d, k])
            entry += term
        tensor[index] = entry
    return tensor

def predictor_oracle(x: np.ndarray, first_order: np.ndarray,
                     orders: Dict[int, Tuple[List[np.ndarray], np.ndarray]]) -> PredictorComparison:
    """
    Evaluates the polynomial predictor ⟨w¹, x⟩ + Σ_r ⟨W^r, x ⊗ … ⊗ x⟩ twice:
    once through the explicit c^r tensors and once through the rank-1 factors
    ⟨w¹, x⟩ + Σ_r Σ_d a^{r,d} ∏_s ⟨u_s^{r,d}, x⟩. `orders` maps r to
    ([u_1, …, u_r] each (D, c), a of shape (D,)).
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    channels = x.size
    if channels > PREDICTOR_MAX_CHANNELS:
        raise OracleSizeError(f"Predictor oracle supports c ≤ {PREDICTOR_MAX_CHANNELS}, got {channels}")
    linear = float(np.dot(first_order, x))

    explicit = linear
    factored = linear
    for order, (factors, weights) in sorted(orders.items()):
        if not 1 <= order <= MAX_SUPPORTED_ORDER or len(factors) != order:
            raise OracleSizeError(f"Order {order} needs {order} factor matrices and order ≤ {MAX_SUPPORTED_ORDER}")
        for index, entry in _explicit_tensor(factors, weights).items():
            monomial = entry
            for k in index:
                monomial *= x[k]
            explicit += monomial
        for d in range(len(weights)):
            product = float(weights[d])
            for factor in factors:
                product *= float(np.dot(factor[d], x))
            factored += product
    return PredictorComparison(explicit=float(explicit), factored=float(factored))

def max_relative_error(actual: np.ndarray, expected: np.ndarray) -> float:
    """Largest |a − b| / max(1, |a|, |b|) over all entries."""
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    if actual.shape != expected.shape:
        raise ValueError(f"Shapes differ: {actual.shape} vs {expected.shape}")
    if actual.size == 0:
        return 0.0
    scale = np.maximum(1.0, np.maximum(np.abs(actual), np.abs(expected)))
    return float(np.max(np.abs(actual - expected) / scale))
