import os
import numpy as np
from PIL import Image
from typing import List

from app.constants import ANNOTATIONS_FILE, SCENE_FILE_TEMPLATE
from app.context import context
from app.data.scenes import Scene, generate_scene
from app.dto.config_dto import SceneSpec
from app.utils.utils import create_logger, save_lines

export_log = create_logger(__name__, entity_name='SCENE_EXPORT', level=context.log_level)


def scene_to_image(scene: Scene) -> Image.Image:
    pixels = np.clip(np.round(scene.image[0].transpose(1, 2, 0) * 255.0), 0, 255).astype(np.uint8)
    return Image.fromarray(pixels)

def annotation_lines(scene: Scene) -> List[str]:
    """`index class x0 y0 x1 y1` per object."""
    return [
        f"{scene.index} {int(label)} " + ' '.join(str(int(round(value))) for value in box)
        for box, label in zip(scene.gt_boxes, scene.gt_labels)
    ]

def export_scenes(spec: SceneSpec, count: int, out_dir: str, first_index: int = 0) -> List[str]:
    """Writes one PNG per scene plus a shared annotation file; returns the image paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths, lines = [], []
    for index in range(first_index, first_index + count):
        scene = generate_scene(spec, index)
        path = os.path.join(out_dir, SCENE_FILE_TEMPLATE.format(index=index))
        scene_to_image(scene).save(path)
        paths.append(path)
        lines.extend(annotation_lines(scene))
    save_lines(lines, os.path.join(out_dir, ANNOTATIONS_FILE))
    export_log.info(f"Exported {count} scenes to {out_dir}")
    return paths
