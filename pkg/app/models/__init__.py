from .mlkp_block import MLKPBlock, MLKPGradients, MLKPParams, apply_location_weight, compute_order_maps, mlkp_forward
from .location_weight import LocationWeightNet, location_weight_forward
from .fusion import MultiScaleFusion, cross_block_fuse, intra_block_concat
from .backbone import TinyBackbone
from .roi_head import DetectionHead, HeadParams, RoI, RoIPool, head_forward, max_roi_pool, roi_bins
from .losses import LossResult, RoITargets, detection_loss
from .detector import MLKPDetector

__all__ = [
    'DetectionHead',
    'HeadParams',
    'LocationWeightNet',
    'LossResult',
    'MLKPBlock',
    'MLKPDetector',
    'MLKPGradients',
    'MLKPParams',
    'MultiScaleFusion',
    'RoI',
    'RoIPool',
    'RoITargets',
    'TinyBackbone',
    'apply_location_weight',
    'compute_order_maps',
    'cross_block_fuse',
    'detection_loss',
    'head_forward',
    'intra_block_concat',
    'location_weight_forward',
    'max_roi_pool',
    'mlkp_forward',
    'roi_bins',
]
