import numpy as np
from typing import Dict, Optional, Sequence, Tuple

from app.constants import PointwiseOp
from app.core import ConvLayer, ConvParams, ParamStore, Pointwise, Tensor, check_tensor, conv2d, pointwise
from app.core.tensor import describe
from app.exceptions import ShapeMismatchError

LOCATION_LAYERS = ('reduce', 'hidden', 'project')


def _check_location_params(x: Tensor, theta: Sequence[ConvParams]) -> None:
    if len(theta) != len(LOCATION_LAYERS):
        raise ValueError(f"Location weight network needs {len(LOCATION_LAYERS)} layers, got {len(theta)}")
    if theta[-1].out_channels != 1:
        raise ShapeMismatchError(f"Location weight output must have one channel, got {theta[-1].out_channels}")
    if x.shape[1] != theta[0].in_channels:
        raise ShapeMismatchError(
            f"Location weight input {describe(x.shape)} does not match first layer {describe(theta[0].weights.shape)}"
        )

def location_weight_forward(x: Tensor, theta: Sequence[ConvParams]) -> Tensor:
    """
    m(X, Θ_m): 1×1 reduce → relu → 3×3 → relu → 1×1 to one channel → sigmoid.
    Returns an (n, 1, h, w) map with values in (0, 1).
    """
    check_tensor(x, 'location weight input')
    _check_location_params(x, theta)
    reduce, hidden, project = theta
    out = pointwise(PointwiseOp.RELU, conv2d(x, reduce))
    out = pointwise(PointwiseOp.RELU, conv2d(out, hidden))
    return pointwise(PointwiseOp.SIGMOID, conv2d(out, project))


class LocationWeightNet:
    """The learnable location-weight block, bound to a parameter store."""

    def __init__(self, store: ParamStore, prefix: str, in_channels: int, hidden_channels: int,
                 rng: Optional[np.random.Generator] = None):
        self.reduce = ConvLayer(store, f"{prefix}.reduce", in_channels, hidden_channels, 1, rng=rng)
        self.hidden = ConvLayer(store, f"{prefix}.hidden", hidden_channels, hidden_channels, 3, padding=1, rng=rng)
        self.project = ConvLayer(store, f"{prefix}.project", hidden_channels, 1, 1, rng=rng)
        self._activations = [Pointwise(PointwiseOp.RELU), Pointwise(PointwiseOp.RELU), Pointwise(PointwiseOp.SIGMOID)]

    @property
    def layers(self) -> Tuple[ConvLayer, ConvLayer, ConvLayer]:
        return self.reduce, self.hidden, self.project

    @property
    def params(self) -> Tuple[ConvParams, ConvParams, ConvParams]:
        return tuple(layer.params for layer in self.layers)

    def forward(self, x: Tensor) -> Tensor:
        _check_location_params(x, self.params)
        out = x
        for layer, activation in zip(self.layers, self._activations):
            out = activation.forward(layer.forward(out))
        return out

    def backward(self, grad_m: Tensor) -> Tuple[Tensor, Dict[str, np.ndarray]]:
        grads: Dict[str, np.ndarray] = {}
        grad = grad_m
        for layer, activation in reversed(list(zip(self.layers, self._activations))):
            grad, _ = activation.backward(grad)
            conv_grads = layer.backward(grad)
            grads[layer.weight_name] = conv_grads.weights
            grads[layer.bias_name] = conv_grads.bias
            grad = conv_grads.input
        return grad, grads

    def release(self) -> None:
        for layer, activation in zip(self.layers, self._activations):
            layer.release()
            activation.release()
