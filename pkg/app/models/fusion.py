import numpy as np
from typing import Dict, List, Optional, Sequence

from app.constants import PointwiseOp
from app.context import context
from app.core import (
    Concat, ConvLayer, ConvParams, ParamStore, Pointwise, Tensor, check_tensor, concat_channels, conv2d, deconv2d,
    pointwise,
)
from app.core.tensor import describe
from app.dto.config_dto import FusionConfig
from app.exceptions import BackwardBeforeForwardError, ShapeMismatchError
from app.utils.utils import create_logger

fusion_log = create_logger(__name__, entity_name='FUSION', level=context.log_level)


def intra_block_concat(layers: Sequence[Tensor], adapter: ConvParams) -> Tensor:
    """Concatenates the layers of one block along channels, then adapts them to the fusion width."""
    return conv2d(concat_channels(layers), adapter)

def _check_halved(earlier: Tensor, later: Tensor) -> None:
    check_tensor(earlier, 'earlier block')
    check_tensor(later, 'later block')
    if earlier.shape[1] != later.shape[1]:
        raise ShapeMismatchError(
            f"Fused blocks must share a channel count: {describe(earlier.shape)} vs {describe(later.shape)}"
        )
    if earlier.shape[0] != later.shape[0] or earlier.shape[2:] != (2 * later.shape[2], 2 * later.shape[3]):
        raise ShapeMismatchError(
            f"Later block {describe(later.shape)} must be exactly half of earlier block {describe(earlier.shape)}"
        )

def _check_fusion_params(upsample: ConvParams, recover: ConvParams) -> None:
    if upsample.kernel != (2, 2) or upsample.stride != 2 or upsample.padding != 0:
        raise ValueError("Upsampling deconvolution must be k=2, stride 2, padding 0")
    if recover.kernel != (1, 1) or recover.stride != 2 or recover.padding != 0:
        raise ValueError("Recovery convolution must be 1×1 with stride 2")

def cross_block_fuse(earlier: Tensor, later: Tensor, upsample: ConvParams, recover: ConvParams) -> Tensor:
    """deconv(later) + earlier, then a stride-2 1×1 convolution back to the later block's resolution."""
    _check_halved(earlier, later)
    _check_fusion_params(upsample, recover)
    return conv2d(pointwise(PointwiseOp.SUM, earlier, deconv2d(later, upsample)), recover)


class MultiScaleFusion:
    """
    Fuses two backbone blocks: layers within a block are concatenated and
    adapted to the fusion width; the later block is upsampled, added to the
    earlier one and brought back to its own resolution. With fusion disabled
    only the adapted later block is produced.
    """
    def __init__(self, store: ParamStore, cfg: FusionConfig, block_channels: Dict[str, List[int]],
                 prefix: str = 'fusion', rng: Optional[np.random.Generator] = None):
        self.cfg = cfg
        self.blocks = cfg.blocks if cfg.enabled else [cfg.later]
        self.adapters: Dict[str, ConvLayer] = {}
        for block in self.blocks:
            if block.block_id not in block_channels:
                raise ValueError(f"Unknown block '{block.block_id}'; available: {sorted(block_channels)}")
            channels = block_channels[block.block_id]
            for layer_id in block.layer_ids:
                if not 1 <= layer_id <= len(channels):
                    raise ValueError(f"Block '{block.block_id}' has no layer {layer_id}")
            in_channels = sum(channels[layer_id - 1] for layer_id in block.layer_ids)
            self.adapters[block.block_id] = ConvLayer(
                store, f"{prefix}.{block.block_id}.adapter", in_channels, cfg.fusion_width, 1, rng=rng
            )
        self.upsample = self.recover = None
        if cfg.enabled:
            width = cfg.fusion_width
            self.upsample = ConvLayer(store, f"{prefix}.upsample", width, width, 2, stride=2, transposed=True, rng=rng)
            self.recover = ConvLayer(store, f"{prefix}.recover", width, width, 1, stride=2, rng=rng)
        self._cache = None

    @property
    def out_channels(self) -> int:
        return self.cfg.fusion_width

    def forward(self, features: Dict[str, List[Tensor]]) -> Tensor:
        concats: Dict[str, Concat] = {}
        adapted: Dict[str, Tensor] = {}
        for block in self.blocks:
            layers = [features[block.block_id][layer_id - 1] for layer_id in block.layer_ids]
            concats[block.block_id] = Concat()
            adapted[block.block_id] = self.adapters[block.block_id].forward(concats[block.block_id].forward(layers))

        total = None
        if self.cfg.enabled:
            earlier, later = adapted[self.cfg.earlier.block_id], adapted[self.cfg.later.block_id]
            _check_halved(earlier, later)
            total = Pointwise(PointwiseOp.SUM)
            out = self.recover.forward(total.forward(earlier, self.upsample.forward(later)))
        else:
            out = adapted[self.cfg.later.block_id]
        self._cache = {'concats': concats, 'sum': total, 'layer_counts': {
            block_id: len(layers) for block_id, layers in features.items()
        }}
        fusion_log.debug(f"Fused feature map {describe(out.shape)}")
        return out

    def backward(self, grad_out: Tensor) -> Dict[str, List[Optional[Tensor]]]:
        """Returns the gradient of every backbone layer output, None for layers that were not fused."""
        if self._cache is None:
            raise BackwardBeforeForwardError("fusion: backward called before forward")
        grad_adapted: Dict[str, Tensor] = {}
        if self.cfg.enabled:
            grad_sum = self.recover.backward(grad_out).input
            grad_earlier, grad_up = self._cache['sum'].backward(grad_sum)
            grad_adapted[self.cfg.earlier.block_id] = grad_earlier
            grad_adapted[self.cfg.later.block_id] = self.upsample.backward(grad_up).input
        else:
            grad_adapted[self.cfg.later.block_id] = grad_out

        grads: Dict[str, List[Optional[Tensor]]] = {
            block_id: [None] * count for block_id, count in self._cache['layer_counts'].items()
        }
        for block in self.blocks:
            grad_concat = self.adapters[block.block_id].backward(grad_adapted[block.block_id]).input
            parts = self._cache['concats'][block.block_id].backward(grad_concat)
            for layer_id, part in zip(block.layer_ids, parts):
                current = grads[block.block_id][layer_id - 1]
                grads[block.block_id][layer_id - 1] = part.copy() if current is None else current + part
        return grads

    def release(self) -> None:
        self._cache = None
