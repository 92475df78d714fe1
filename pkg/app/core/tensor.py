import numpy as np
from typing import Sequence, Union
from app.constants import Precision
from app.exceptions import ShapeMismatchError

# Dense (batch, channels, height, width) array of reals.
Tensor = np.ndarray

_DTYPES = {
    Precision.FLOAT64: np.float64,
    Precision.FLOAT32: np.float32,
}


def resolve_dtype(precision: Union[str, np.dtype, type]) -> np.dtype:
    if isinstance(precision, str):
        if precision not in _DTYPES:
            raise ValueError(f"Unsupported precision '{precision}'. Use one of {sorted(_DTYPES)}.")
        return np.dtype(_DTYPES[precision])
    return np.dtype(precision)

def describe(shape: Sequence[int]) -> str:
    return '×'.join(str(dim) for dim in shape)

def check_tensor(tensor: Tensor, name: str = 'tensor') -> Tensor:
    """
    Validates the rank-4 (n, c, h, w) contract without copying.
    """
    if not isinstance(tensor, np.ndarray):
        raise TypeError(f"{name} must be a numpy array, got {type(tensor).__name__}")
    if tensor.ndim != 4:
        raise ShapeMismatchError(f"{name} must be rank 4 (n, c, h, w), got shape {describe(tensor.shape)}")
    if min(tensor.shape) < 1:
        raise ShapeMismatchError(f"{name} has an empty dimension: {describe(tensor.shape)}")
    return tensor

def as_tensor(data, dtype=np.float64) -> Tensor:
    """
    Converts array-like data into a contiguous rank-4 tensor.
    """
    return check_tensor(np.ascontiguousarray(np.asarray(data, dtype=resolve_dtype(dtype))))

def same_spatial(a: Tensor, b: Tensor) -> bool:
    return a.shape[0] == b.shape[0] and a.shape[2:] == b.shape[2:]
