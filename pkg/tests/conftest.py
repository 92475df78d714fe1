import os
import numpy as np
import pytest

from app.dto.config_dto import (
    BackboneConfig, ChecksConfig, DataConfig, EvalConfig, FusionConfig, MLKPConfig, ModelConfig, PathsConfig,
    RunConfig, SceneSpec, TrainConfig,
)

SLOW_ENV_VAR = 'MLKP_RUN_SLOW'


def pytest_configure(config):
    config.addinivalue_line('markers', f"slow: long-running acceptance runs, enabled by {SLOW_ENV_VAR}=1")

def pytest_collection_modifyitems(config, items):
    if os.getenv(SLOW_ENV_VAR) == '1':
        return
    skip_slow = pytest.mark.skip(reason=f"set {SLOW_ENV_VAR}=1 to run")
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)

@pytest.fixture
def rng():
    return np.random.default_rng(1234)

@pytest.fixture
def checks():
    return ChecksConfig()

@pytest.fixture
def small_mlkp():
    return MLKPConfig(max_order=3, ranks={2: 4, 3: 5}, location_weight_enabled=True)

@pytest.fixture
def tiny_run(tmp_path):
    """A run small enough to train and evaluate in a few seconds."""
    return RunConfig(
        model=ModelConfig(
            backbone=BackboneConfig(widths=[4, 6, 8], block_depth=2),
            fusion=FusionConfig(fusion_width=6),
            mlkp=MLKPConfig(max_order=3, ranks={2: 4, 3: 4}),
            pool_size=2,
            num_classes=2,
        ),
        train=TrainConfig(iterations=3, eval_interval=2, rois_per_image=8, precision='float64', seed=3),
        data=DataConfig(
            scene=SceneSpec(height=32, width=32, num_classes=2, min_size=8, max_size=16, seed=5),
            train_scenes=4,
            eval_scenes=2,
        ),
        eval=EvalConfig(proposals_per_image=8),
        paths=PathsConfig(
            weights_out=str(tmp_path / 'weights.mlkp'),
            report=str(tmp_path / 'report.txt'),
            metrics_log=str(tmp_path / 'metrics.log'),
            detections=str(tmp_path / 'detections.txt'),
            data_dir=str(tmp_path / 'scenes'),
        ),
    )
