import numpy as np
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple
from numpy.lib.stride_tricks import sliding_window_view

from app.constants import PointwiseOp
from app.core.tensor import Tensor, check_tensor, describe, same_spatial
from app.core.trace import record_branch
from app.exceptions import BackwardBeforeForwardError, ShapeMismatchError


@dataclass
class ConvParams:
    """
    Weights are (c_out, c_in, k_h, k_w) for both convolution and deconvolution.
    """
    weights: np.ndarray
    bias: np.ndarray
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.weights.ndim != 4:
            raise ShapeMismatchError(f"Convolution weights must be rank 4, got {describe(self.weights.shape)}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeMismatchError(
                f"Bias of shape {describe(self.bias.shape)} does not match {self.weights.shape[0]} output channels"
            )
        if self.stride < 1:
            raise ValueError(f"Stride must be positive, got {self.stride}")
        if self.padding < 0:
            raise ValueError(f"Padding must be non-negative, got {self.padding}")

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel(self) -> Tuple[int, int]:
        return self.weights.shape[2], self.weights.shape[3]


@dataclass
class ConvGrads:
    input: Tensor
    weights: np.ndarray
    bias: np.ndarray


def _steps(start: int, count: int, stride: int) -> slice:
    return slice(start, start + stride * (count - 1) + 1, stride)

def _pad(x: Tensor, padding: int) -> Tensor:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))

def _crop(x: Tensor, padding: int) -> Tensor:
    if padding == 0:
        return x
    return x[:, :, padding:x.shape[2] - padding, padding:x.shape[3] - padding]

def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    span = size + 2 * padding - kernel
    if span < 0:
        raise ShapeMismatchError(
            f"Kernel {kernel} does not fit input extent {size} with padding {padding}"
        )
    return span // stride + 1

def deconv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    out = (size - 1) * stride - 2 * padding + kernel
    if out < 1:
        raise ShapeMismatchError(
            f"Deconvolution of extent {size} (k={kernel}, s={stride}, p={padding}) has no output"
        )
    return out

def _check_channels(x: Tensor, expected: int, what: str, params_shape) -> None:
    if x.shape[1] != expected:
        raise ShapeMismatchError(
            f"{what}: input {describe(x.shape)} has {x.shape[1]} channels, "
            f"weights {describe(params_shape)} expect {expected}"
        )


class Op:
    """
    A differentiable operation. forward caches what backward needs; backward
    returns the exact adjoint of the forward linearization.
    """
    name = 'op'

    def __init__(self):
        self._cache = None

    def _cached(self):
        if self._cache is None:
            raise BackwardBeforeForwardError(f"{self.name}: backward called before forward")
        return self._cache

    def release(self) -> None:
        self._cache = None


class Conv2d(Op):
    """Cross-correlation (no kernel flip)."""
    name = 'conv2d'

    def forward(self, x: Tensor, p: ConvParams) -> Tensor:
        check_tensor(x, 'conv2d input')
        _check_channels(x, p.in_channels, self.name, p.weights.shape)
        kh, kw = p.kernel
        h_out = conv_output_size(x.shape[2], kh, p.stride, p.padding)
        w_out = conv_output_size(x.shape[3], kw, p.stride, p.padding)

        xpad = _pad(x, p.padding)
        windows = sliding_window_view(xpad, (kh, kw), axis=(2, 3))[:, :, ::p.stride, ::p.stride][:, :, :h_out, :w_out]
        out = np.tensordot(windows, p.weights, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        out = np.ascontiguousarray(out + p.bias[None, :, None, None])
        self._cache = (x.shape, xpad.shape, windows, p)
        return out

    def backward(self, grad_out: Tensor) -> ConvGrads:
        x_shape, xpad_shape, windows, p = self._cached()
        kh, kw = p.kernel
        h_out, w_out = grad_out.shape[2], grad_out.shape[3]

        grad_weights = np.tensordot(grad_out, windows, axes=([0, 2, 3], [0, 2, 3]))
        grad_bias = grad_out.sum(axis=(0, 2, 3))
        grad_xpad = np.zeros(xpad_shape, dtype=grad_out.dtype)
        for i in range(kh):
            for j in range(kw):
                contribution = np.tensordot(p.weights[:, :, i, j], grad_out, axes=([0], [1]))
                grad_xpad[:, :, _steps(i, h_out, p.stride), _steps(j, w_out, p.stride)] += contribution.transpose(1, 0, 2, 3)
        grad_x = np.ascontiguousarray(_crop(grad_xpad, p.padding))
        return ConvGrads(input=grad_x, weights=grad_weights, bias=grad_bias)


class Deconv2d(Op):
    """Transposed convolution: the input-adjoint of Conv2d with the same geometry."""
    name = 'deconv2d'

    def forward(self, x: Tensor, p: ConvParams) -> Tensor:
        check_tensor(x, 'deconv2d input')
        _check_channels(x, p.in_channels, self.name, p.weights.shape)
        kh, kw = p.kernel
        n, _, h, w = x.shape
        deconv_output_size(h, kh, p.stride, p.padding)
        deconv_output_size(w, kw, p.stride, p.padding)

        full = np.zeros((n, p.out_channels, (h - 1) * p.stride + kh, (w - 1) * p.stride + kw), dtype=x.dtype)
        for i in range(kh):
            for j in range(kw):
                contribution = np.tensordot(p.weights[:, :, i, j], x, axes=([1], [1]))
                full[:, :, _steps(i, h, p.stride), _steps(j, w, p.stride)] += contribution.transpose(1, 0, 2, 3)
        out = np.ascontiguousarray(_crop(full, p.padding) + p.bias[None, :, None, None])
        self._cache = (x, full.shape, p)
        return out

    def backward(self, grad_out: Tensor) -> ConvGrads:
        x, full_shape, p = self._cached()
        kh, kw = p.kernel
        h, w = x.shape[2], x.shape[3]

        grad_full = _pad(grad_out, p.padding)
        grad_x = np.zeros_like(x)
        grad_weights = np.zeros_like(p.weights)
        for i in range(kh):
            for j in range(kw):
                patch = grad_full[:, :, _steps(i, h, p.stride), _steps(j, w, p.stride)]
                grad_x += np.tensordot(p.weights[:, :, i, j], patch, axes=([0], [1])).transpose(1, 0, 2, 3)
                grad_weights[:, :, i, j] = np.tensordot(patch, x, axes=([0, 2, 3], [0, 2, 3]))
        grad_bias = grad_out.sum(axis=(0, 2, 3))
        return ConvGrads(input=grad_x, weights=grad_weights, bias=grad_bias)


class Pointwise(Op):
    """
    Element-wise product/sum of two tensors, or relu/sigmoid of one. For binary
    ops b may have a single channel, which is broadcast along a's channels.
    """
    name = 'pointwise'

    def __init__(self, op: str):
        super().__init__()
        if op not in PointwiseOp.BINARY + PointwiseOp.UNARY:
            raise ValueError(f"Unsupported pointwise op '{op}'")
        self.op = op
        self.name = f"pointwise[{op}]"

    def forward(self, a: Tensor, b: Optional[Tensor] = None) -> Tensor:
        check_tensor(a, f"{self.name} input")
        if self.op in PointwiseOp.UNARY:
            if b is not None:
                raise ValueError(f"{self.name} takes a single operand")
            return self._unary(a)

        if b is None:
            raise ValueError(f"{self.name} needs two operands")
        check_tensor(b, f"{self.name} second input")
        broadcast = _broadcasts(a, b)
        out = a * b if self.op == PointwiseOp.PRODUCT else a + b
        self._cache = (a, b, broadcast)
        return out

    def _unary(self, a: Tensor) -> Tensor:
        if self.op == PointwiseOp.RELU:
            mask = a > 0
            record_branch(mask)
            self._cache = mask
            return np.where(mask, a, np.zeros((), dtype=a.dtype))
        out = np.exp(-np.logaddexp(0.0, -a)).astype(a.dtype, copy=False)
        self._cache = out
        return out

    def backward(self, grad_out: Tensor) -> Tuple[Tensor, Optional[Tensor]]:
        cache = self._cached()
        if self.op == PointwiseOp.RELU:
            return np.where(cache, grad_out, np.zeros((), dtype=grad_out.dtype)), None
        if self.op == PointwiseOp.SIGMOID:
            return grad_out * cache * (1.0 - cache), None

        a, b, broadcast = cache
        if self.op == PointwiseOp.PRODUCT:
            grad_a, grad_b = grad_out * b, grad_out * a
        else:
            grad_a, grad_b = grad_out.copy(), grad_out.copy()
        if broadcast:
            grad_b = grad_b.sum(axis=1, keepdims=True)
        return grad_a, grad_b


def _broadcasts(a: Tensor, b: Tensor) -> bool:
    if a.shape == b.shape:
        return False
    if b.shape[1] == 1 and same_spatial(a, b):
        return True
    raise ShapeMismatchError(f"Incompatible pointwise operands {describe(a.shape)} and {describe(b.shape)}")


class Concat(Op):
    name = 'concat_channels'

    def forward(self, parts: Sequence[Tensor]) -> Tensor:
        if not parts:
            raise ValueError("concat_channels needs at least one part")
        first = check_tensor(parts[0], 'concat part 0')
        for index, part in enumerate(parts[1:], start=1):
            check_tensor(part, f"concat part {index}")
            if not same_spatial(first, part):
                raise ShapeMismatchError(
                    f"concat part {index} {describe(part.shape)} does not match part 0 {describe(first.shape)}"
                )
        self._cache = [part.shape[1] for part in parts]
        return np.concatenate(parts, axis=1)

    def backward(self, grad_out: Tensor) -> List[Tensor]:
        sizes = self._cached()
        return slice_channels(grad_out, sizes)


def slice_channels(tensor: Tensor, sizes: Sequence[int]) -> List[Tensor]:
    if sum(sizes) != tensor.shape[1]:
        raise ShapeMismatchError(f"Channel sizes {list(sizes)} do not add up to {describe(tensor.shape)}")
    bounds = np.cumsum([0, *sizes])
    return [tensor[:, start:stop] for start, stop in zip(bounds[:-1], bounds[1:])]

def materialize_channels(m: Tensor, channels: int) -> Tensor:
    """Explicit 1⊗m remap: copies a single-channel map along the channel axis."""
    check_tensor(m, 'remap input')
    if m.shape[1] != 1:
        raise ShapeMismatchError(f"Channel remap expects a single-channel map, got {describe(m.shape)}")
    return np.repeat(m, channels, axis=1)


def conv2d(x: Tensor, p: ConvParams) -> Tensor:
    return Conv2d().forward(x, p)

def deconv2d(x: Tensor, p: ConvParams) -> Tensor:
    return Deconv2d().forward(x, p)

def pointwise(op: str, a: Tensor, b: Optional[Tensor] = None) -> Tensor:
    return Pointwise(op).forward(a, b)

def concat_channels(parts: Sequence[Tensor]) -> Tensor:
    return Concat().forward(parts)

def backward_of(op: Op, grad_out: Tensor):
    return op.backward(grad_out)
