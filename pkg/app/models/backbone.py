import numpy as np
from typing import Dict, List, Optional

from app.constants import BACKBONE_BLOCKS, PointwiseOp
from app.core import ConvLayer, ParamStore, Pointwise, Tensor, check_tensor
from app.dto.config_dto import BackboneConfig
from app.exceptions import BackwardBeforeForwardError


class TinyBackbone:
    """
    A stride-2 stem followed by two blocks. Each block opens with a stride-2
    3×3 convolution and continues with stride-1 3×3 convolutions; every layer
    is followed by relu and every layer output is exposed for fusion.
    """
    def __init__(self, store: ParamStore, cfg: BackboneConfig, in_channels: int = 3, prefix: str = 'backbone',
                 rng: Optional[np.random.Generator] = None):
        stem_width, *block_widths = cfg.widths
        self.stem = ConvLayer(store, f"{prefix}.stem", in_channels, stem_width, 3, stride=2, padding=1, rng=rng)
        self.blocks: Dict[str, List[ConvLayer]] = {}
        previous = stem_width
        for block_id, width in zip(BACKBONE_BLOCKS, block_widths):
            layers = []
            for depth in range(1, cfg.block_depth + 1):
                layers.append(ConvLayer(
                    store, f"{prefix}.{block_id}.layer{depth}", previous if depth == 1 else width, width, 3,
                    stride=2 if depth == 1 else 1, padding=1, rng=rng,
                ))
            self.blocks[block_id] = layers
            previous = width
        self._activations: Dict[str, List[Pointwise]] = {}
        self._stem_activation: Optional[Pointwise] = None

    def layer_channels(self, block_id: str) -> List[int]:
        return [layer.params.out_channels for layer in self.blocks[block_id]]

    def forward(self, image: Tensor) -> Dict[str, List[Tensor]]:
        check_tensor(image, 'backbone input')
        self._stem_activation = Pointwise(PointwiseOp.RELU)
        out = self._stem_activation.forward(self.stem.forward(image))
        features: Dict[str, List[Tensor]] = {}
        self._activations = {}
        for block_id, layers in self.blocks.items():
            activations = [Pointwise(PointwiseOp.RELU) for _ in layers]
            outputs = []
            for layer, activation in zip(layers, activations):
                out = activation.forward(layer.forward(out))
                outputs.append(out)
            features[block_id] = outputs
            self._activations[block_id] = activations
        return features

    def backward(self, grads: Dict[str, List[Optional[Tensor]]]) -> Tensor:
        """Takes the gradient of every exposed layer output (None where unused) and returns the image gradient."""
        if self._stem_activation is None:
            raise BackwardBeforeForwardError("backbone: backward called before forward")
        carried: Optional[Tensor] = None
        for block_id in reversed(list(self.blocks)):
            layers = self.blocks[block_id]
            block_grads = grads.get(block_id, [None] * len(layers))
            for layer, activation, external in reversed(list(zip(layers, self._activations[block_id], block_grads))):
                grad = _add(carried, external)
                if grad is None:
                    carried = None
                    continue
                grad, _ = activation.backward(grad)
                carried = layer.backward(grad).input
        if carried is None:
            return None
        grad, _ = self._stem_activation.backward(carried)
        return self.stem.backward(grad).input


def _add(a: Optional[Tensor], b: Optional[Tensor]) -> Optional[Tensor]:
    if a is None:
        return b
    if b is None:
        return a
    return a + b
