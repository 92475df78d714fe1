from .tensor import Tensor, as_tensor, check_tensor, resolve_dtype
from .ops import (
    ConvParams, ConvGrads, Op, Conv2d, Deconv2d, Pointwise, Concat,
    conv2d, deconv2d, pointwise, concat_channels, slice_channels, materialize_channels, backward_of,
)
from .param_store import ParamStore
from .layers import ConvLayer, xavier_uniform
from .trace import BranchTrace, branch_trace, record_branch

__all__ = [
    'BranchTrace',
    'Concat',
    'Conv2d',
    'ConvGrads',
    'ConvLayer',
    'ConvParams',
    'Deconv2d',
    'Op',
    'ParamStore',
    'Pointwise',
    'Tensor',
    'as_tensor',
    'backward_of',
    'branch_trace',
    'check_tensor',
    'concat_channels',
    'conv2d',
    'deconv2d',
    'materialize_channels',
    'pointwise',
    'record_branch',
    'resolve_dtype',
    'slice_channels',
    'xavier_uniform',
]
