from .boxes import (
    Box, Detection, GroundTruth, box_area, box_iou, clip_boxes, decode_deltas, encode_deltas, iou_matrix,
)
from .nms import nms, batched_nms
from .evaluation import average_precision, evaluate_map, voc_ap
from .export import format_detection, format_detections, parse_detection, write_detections

__all__ = [
    'Box',
    'Detection',
    'GroundTruth',
    'average_precision',
    'batched_nms',
    'box_area',
    'box_iou',
    'clip_boxes',
    'decode_deltas',
    'encode_deltas',
    'evaluate_map',
    'format_detection',
    'format_detections',
    'iou_matrix',
    'nms',
    'parse_detection',
    'voc_ap',
    'write_detections',
]
