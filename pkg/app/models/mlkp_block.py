import numpy as np
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from app.constants import PointwiseOp
from app.context import context
from app.core import (
    Concat, ConvLayer, ConvParams, ParamStore, Pointwise, Tensor, check_tensor, concat_channels, conv2d, pointwise,
    slice_channels,
)
from app.core.tensor import describe, same_spatial
from app.dto.config_dto import MLKPConfig
from app.exceptions import BackwardBeforeForwardError, ShapeMismatchError
from app.models.location_weight import LocationWeightNet, location_weight_forward
from app.utils.utils import create_logger

mlkp_log = create_logger(__name__, entity_name='MLKP_BLOCK', level=context.log_level)


@dataclass
class MLKPParams:
    """
    factor_convs[r][s-1] is the 1×1 convolution u^{r,s} (c_in → D^r) of slot s;
    location_params holds Θ_m as (reduce, hidden, project), or None when the
    location weight is disabled.
    """
    factor_convs: Dict[int, List[ConvParams]] = field(default_factory=dict)
    location_params: Optional[Sequence[ConvParams]] = None


@dataclass
class MLKPGradients:
    input: Tensor
    params: Dict[str, np.ndarray] = field(default_factory=dict)


def compute_order_maps(x: Tensor, params: MLKPParams, order: int) -> Tensor:
    """Z^r = conv^{r,1}(X) ⊙ … ⊙ conv^{r,r}(X)."""
    if order < 2:
        raise ValueError(f"Order maps are defined for r >= 2, got {order}")
    check_tensor(x, 'MLKP input')
    convs = params.factor_convs.get(order, [])
    for slot in range(1, order + 1):
        if slot > len(convs):
            raise ValueError(f"Missing factor convolution for order {order}, slot {slot}")
    z = conv2d(x, convs[0])
    for conv in convs[1:order]:
        z = pointwise(PointwiseOp.PRODUCT, z, conv2d(x, conv))
    return z

def apply_location_weight(z: Tensor, m: Optional[Tensor], enabled: bool = True) -> Tensor:
    """g^r = Z^r ⊙ (1 ⊗ m)."""
    if not enabled or m is None:
        return z
    if m.shape[1] != 1 or not same_spatial(z, m):
        raise ShapeMismatchError(f"Location weight {describe(m.shape)} does not match kernel map {describe(z.shape)}")
    return pointwise(PointwiseOp.PRODUCT, z, m)

def mlkp_forward(x: Tensor, cfg: MLKPConfig, params: MLKPParams) -> Tensor:
    """G(X) = [X, g_2(X), …, g_R(X)] with one location weight shared by all orders."""
    check_tensor(x, 'MLKP input')
    if cfg.max_order == 1:
        return x.copy()
    m = None
    if cfg.location_weight_enabled:
        if params.location_params is None:
            raise ValueError("Location weighting is enabled but no location parameters were given")
        m = location_weight_forward(x, params.location_params)
    parts = [x]
    for order in cfg.orders:
        parts.append(apply_location_weight(compute_order_maps(x, params, order), m, cfg.location_weight_enabled))
    return concat_channels(parts)


class MLKPBlock:
    """
    The location-aware kernel representation bound to a parameter store.
    Forward caches the per-slot activations and the location weight; backward
    computes the input and parameter gradients in closed form.
    """
    def __init__(self, store: ParamStore, cfg: MLKPConfig, in_channels: int, prefix: str = 'mlkp',
                 rng: Optional[np.random.Generator] = None):
        self.cfg = cfg
        self.in_channels = in_channels
        self.prefix = prefix
        self.factor_layers: Dict[int, List[ConvLayer]] = {
            order: [
                ConvLayer(store, f"{prefix}.order{order}.slot{slot}", in_channels, cfg.rank(order), 1, rng=rng)
                for slot in range(1, order + 1)
            ]
            for order in cfg.orders
        }
        self.location: Optional[LocationWeightNet] = None
        if cfg.location_weight_enabled and cfg.max_order > 1:
            self.location = LocationWeightNet(
                store, f"{prefix}.location", in_channels, cfg.hidden_channels(in_channels), rng=rng
            )
        self._cache = None
        mlkp_log.debug(
            f"MLKP block '{prefix}': {in_channels} -> {self.out_channels} channels, orders {cfg.orders}, "
            f"location weight {'on' if self.location else 'off'}"
        )

    @property
    def out_channels(self) -> int:
        return self.cfg.output_channels(self.in_channels)

    @property
    def params(self) -> MLKPParams:
        return MLKPParams(
            factor_convs={order: [layer.params for layer in layers] for order, layers in self.factor_layers.items()},
            location_params=self.location.params if self.location else None,
        )

    def forward(self, x: Tensor, cache: bool = True) -> Tensor:
        if not cache:
            return mlkp_forward(x, self.cfg, self.params)
        check_tensor(x, 'MLKP input')
        if x.shape[1] != self.in_channels:
            raise ShapeMismatchError(f"MLKP input {describe(x.shape)} does not have {self.in_channels} channels")
        if self.cfg.max_order == 1:
            self._cache = {'orders': {}}
            return x.copy()

        m = self.location.forward(x) if self.location else None
        orders = {}
        parts = [x]
        for order, layers in self.factor_layers.items():
            slots = [layer.forward(x) for layer in layers]
            z = slots[0]
            for slot in slots[1:]:
                z = z * slot
            weighting = Pointwise(PointwiseOp.PRODUCT)
            parts.append(weighting.forward(z, m) if m is not None else z)
            orders[order] = {'slots': slots, 'z': z, 'weighting': weighting}
        concat = Concat()
        out = concat.forward(parts)
        self._cache = {'orders': orders, 'm': m, 'concat': concat}
        return out

    def backward(self, grad_g: Tensor) -> MLKPGradients:
        if self._cache is None:
            raise BackwardBeforeForwardError(f"MLKP block '{self.prefix}': backward called before forward")
        cache = self._cache
        if self.cfg.max_order == 1:
            return MLKPGradients(input=grad_g.copy())

        grad_parts = cache['concat'].backward(grad_g)
        grad_x = np.array(grad_parts[0], copy=True)
        grads: Dict[str, np.ndarray] = {}
        m = cache['m']
        grad_m = np.zeros_like(m) if m is not None else None

        for order, grad_order in zip(self.factor_layers, grad_parts[1:]):
            state = cache['orders'][order]
            if m is not None:
                grad_z, grad_m_order = state['weighting'].backward(grad_order)
                grad_m += grad_m_order
            else:
                grad_z = grad_order
            slots = state['slots']
            for slot_index, layer in enumerate(self.factor_layers[order]):
                # ∂Z^r/∂Z^r_s is the product of the other slots
                others = np.ones_like(grad_z)
                for other_index, other in enumerate(slots):
                    if other_index != slot_index:
                        others = others * other
                conv_grads = layer.backward(grad_z * others)
                grad_x += conv_grads.input
                grads[layer.weight_name] = conv_grads.weights
                grads[layer.bias_name] = conv_grads.bias

        if self.location is not None:
            grad_x_location, location_grads = self.location.backward(grad_m)
            grad_x += grad_x_location
            grads.update(location_grads)
        return MLKPGradients(input=grad_x, params=grads)

    def release(self) -> None:
        self._cache = None
