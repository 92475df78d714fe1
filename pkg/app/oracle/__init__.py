from .kernel_oracle import PredictorComparison, kernel_oracle, max_relative_error, predictor_oracle
from .gradcheck import finite_diff_check, relative_error
from .reference import direct_conv2d, direct_deconv2d, exhaustive_roi_max, reference_nms

__all__ = [
    'PredictorComparison',
    'direct_conv2d',
    'direct_deconv2d',
    'exhaustive_roi_max',
    'finite_diff_check',
    'kernel_oracle',
    'max_relative_error',
    'predictor_oracle',
    'reference_nms',
    'relative_error',
]
