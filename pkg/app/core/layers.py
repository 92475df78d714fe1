import numpy as np
from typing import Optional

from app.core.ops import Conv2d, ConvGrads, ConvParams, Deconv2d
from app.core.param_store import ParamStore
from app.core.tensor import Tensor


def xavier_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class ConvLayer:
    """
    A convolution (or deconvolution) whose weights live in a ParamStore under
    '<name>.weight' and '<name>.bias'. Missing parameters are created with
    Xavier-uniform weights and zero biases.
    """
    def __init__(self, store: ParamStore, name: str, in_channels: int, out_channels: int,
                 kernel_size: int = 1, stride: int = 1, padding: int = 0,
                 transposed: bool = False, rng: Optional[np.random.Generator] = None):
        self.store = store
        self.name = name
        self.stride = stride
        self.padding = padding
        self.transposed = transposed
        self.weight_name = f"{name}.weight"
        self.bias_name = f"{name}.bias"
        shape = (out_channels, in_channels, kernel_size, kernel_size)

        if self.weight_name not in store:
            if rng is None:
                raise ValueError(f"Layer '{name}' has no parameters in the store and no generator to create them")
            receptive = kernel_size * kernel_size
            store.add(self.weight_name, xavier_uniform(rng, shape, in_channels * receptive, out_channels * receptive))
            store.add(self.bias_name, np.zeros(out_channels))
        elif store[self.weight_name].shape != shape:
            raise ValueError(
                f"Layer '{name}' expects weights {shape}, store holds {store[self.weight_name].shape}"
            )
        self._op = None

    @property
    def params(self) -> ConvParams:
        return ConvParams(self.store[self.weight_name], self.store[self.bias_name], self.stride, self.padding)

    def forward(self, x: Tensor) -> Tensor:
        self._op = Deconv2d() if self.transposed else Conv2d()
        return self._op.forward(x, self.params)

    def backward(self, grad_out: Tensor) -> ConvGrads:
        """Accumulates parameter gradients into the store and returns all three."""
        if self._op is None:
            # let the op raise the uniform error
            self._op = Deconv2d() if self.transposed else Conv2d()
        grads = self._op.backward(grad_out)
        self.store.accumulate(self.weight_name, grads.weights)
        self.store.accumulate(self.bias_name, grads.bias)
        return grads

    def release(self) -> None:
        self._op = None
