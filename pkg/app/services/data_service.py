import os
from typing import Dict, List

from app.context import context
from app.data.export import export_scenes
from app.dto.config_dto import RunConfig
from app.services.eval_service import eval_indices
from app.utils.utils import create_logger

data_service_log = create_logger(__name__, entity_name='DATA_SERVICE', level=context.log_level)

TRAIN_FOLDER = 'train'
EVAL_FOLDER = 'eval'


def generate_dataset(cfg: RunConfig, out_dir: str) -> Dict[str, List[str]]:
    """Exports the training scenes and the held-out scenes into two sibling folders."""
    held_out = eval_indices(cfg)
    exported = {
        TRAIN_FOLDER: export_scenes(cfg.data.scene, cfg.data.train_scenes, os.path.join(out_dir, TRAIN_FOLDER)),
        EVAL_FOLDER: export_scenes(cfg.data.scene, len(held_out), os.path.join(out_dir, EVAL_FOLDER), held_out.start),
    }
    data_service_log.info(
        f"Generated {len(exported[TRAIN_FOLDER])} training and {len(exported[EVAL_FOLDER])} evaluation scenes in {out_dir}"
    )
    return exported
