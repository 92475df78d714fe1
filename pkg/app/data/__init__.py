from .scenes import Scene, generate_scene, pattern_mask
from .proposals import ProposalSet, generate_proposals, jitter_box
from .export import annotation_lines, export_scenes, scene_to_image

__all__ = [
    'ProposalSet',
    'Scene',
    'annotation_lines',
    'export_scenes',
    'generate_proposals',
    'generate_scene',
    'jitter_box',
    'pattern_mask',
    'scene_to_image',
]
