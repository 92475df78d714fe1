import math
from typing import Dict, List, Optional
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.constants import (
    DEFAULT_POOL_SIZE, FILL_PATTERNS, MAX_SUPPORTED_ORDER, MIN_BOX_AREA, FULL_SCALE_ORDER, FULL_SCALE_RANK, FULL_SCALE_SWEEP,
    PLACEMENT_ATTEMPTS, Precision,
)

# --- Model sections ---

class MLKPConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    max_order: int = Field(3, ge=1, le=MAX_SUPPORTED_ORDER)
    ranks: Dict[int, int] = Field(default_factory=lambda: {2: 64, 3: 64})
    location_weight_enabled: bool = True
    location_hidden_channels: Optional[int] = Field(None, ge=1)

    @model_validator(mode='after')
    def check_ranks(self) -> 'MLKPConfig':
        for order, rank in self.ranks.items():
            if order < 2:
                raise ValueError(f"ranks are defined for orders 2..{MAX_SUPPORTED_ORDER}, got order {order}")
            if rank < 1:
                raise ValueError(f"rank for order {order} must be positive, got {rank}")
        missing = [order for order in range(2, self.max_order + 1) if order not in self.ranks]
        if missing:
            raise ValueError(f"ranks missing for orders {missing}")
        # ranks of orders above max_order are unused
        self.ranks = {order: self.ranks[order] for order in range(2, self.max_order + 1)}
        return self

    @property
    def orders(self) -> List[int]:
        return list(range(2, self.max_order + 1))

    def rank(self, order: int) -> int:
        return self.ranks[order]

    def output_channels(self, in_channels: int) -> int:
        return in_channels + sum(self.ranks[order] for order in self.orders)

    def hidden_channels(self, in_channels: int) -> int:
        if self.location_hidden_channels is not None:
            return self.location_hidden_channels
        return max(1, math.ceil(in_channels / 4))

    @classmethod
    def full_scale(cls) -> 'MLKPConfig':
        return cls(max_order=FULL_SCALE_ORDER, ranks={order: FULL_SCALE_RANK for order in range(2, FULL_SCALE_ORDER + 1)})

    @classmethod
    def full_scale_sweep(cls) -> List['MLKPConfig']:
        return [
            cls(max_order=order, ranks={r: rank for r in range(2, order + 1)} if rank else {})
            for order, rank in FULL_SCALE_SWEEP
        ]


class FusionBlockConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    block_id: str
    layer_ids: List[int] = Field(..., min_length=1)


def _default_fusion_blocks() -> List[FusionBlockConfig]:
    return [
        FusionBlockConfig(block_id='block4', layer_ids=[2, 1]),
        FusionBlockConfig(block_id='block5', layer_ids=[2, 1]),
    ]


class FusionConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    enabled: bool = True
    fusion_width: int = Field(128, ge=1)
    blocks: List[FusionBlockConfig] = Field(default_factory=_default_fusion_blocks)

    @field_validator('blocks')
    @classmethod
    def two_blocks(cls, blocks: List[FusionBlockConfig]) -> List[FusionBlockConfig]:
        if len(blocks) != 2:
            raise ValueError(f"exactly two blocks are fused, got {len(blocks)}")
        if blocks[0].block_id == blocks[1].block_id:
            raise ValueError(f"fused blocks must differ, got '{blocks[0].block_id}' twice")
        return blocks

    @property
    def earlier(self) -> FusionBlockConfig:
        return self.blocks[0]

    @property
    def later(self) -> FusionBlockConfig:
        return self.blocks[1]


class BackboneConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    widths: List[int] = Field(default_factory=lambda: [16, 32, 64], min_length=3, max_length=3)
    block_depth: int = Field(2, ge=1)

    @field_validator('widths')
    @classmethod
    def positive_widths(cls, widths: List[int]) -> List[int]:
        if any(width < 1 for width in widths):
            raise ValueError(f"backbone widths must be positive, got {widths}")
        return widths


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    backbone: BackboneConfig = Field(default_factory=BackboneConfig)
    fusion: FusionConfig = Field(default_factory=FusionConfig)
    mlkp: MLKPConfig = Field(default_factory=MLKPConfig)
    pool_size: int = Field(DEFAULT_POOL_SIZE, ge=1)
    num_classes: int = Field(3, ge=1, le=len(FILL_PATTERNS))

# --- Data sections ---

class SceneSpec(BaseModel):
    model_config = ConfigDict(extra='forbid')

    height: int = Field(128, ge=8)
    width: int = Field(128, ge=8)
    num_classes: int = Field(3, ge=1, le=len(FILL_PATTERNS))
    min_objects: int = Field(1, ge=0)
    max_objects: int = Field(3, ge=0)
    min_size: int = Field(16, ge=1)
    max_size: int = Field(48, ge=1)
    noise: float = Field(0.1, ge=0.0, le=1.0)
    seed: int = 42

    @model_validator(mode='after')
    def check_ranges(self) -> 'SceneSpec':
        if self.min_objects > self.max_objects:
            raise ValueError(f"min_objects {self.min_objects} exceeds max_objects {self.max_objects}")
        if self.min_size > self.max_size:
            raise ValueError(f"min_size {self.min_size} exceeds max_size {self.max_size}")
        if self.min_size * self.min_size < MIN_BOX_AREA:
            raise ValueError(f"min_size {self.min_size} gives boxes below {MIN_BOX_AREA} pixels")
        if self.max_size > min(self.height, self.width):
            raise ValueError(f"max_size {self.max_size} does not fit a {self.height}x{self.width} image")
        return self


class ProposalSpec(BaseModel):
    model_config = ConfigDict(extra='forbid')

    jitter: float = Field(0.2, ge=0.0, lt=1.0)
    positive_iou: float = Field(0.5, gt=0.0, le=1.0)
    negative_iou: float = Field(0.3, gt=0.0, le=1.0)
    min_size: int = Field(8, ge=1)
    max_size: int = Field(64, ge=1)
    max_attempts: int = Field(PLACEMENT_ATTEMPTS, ge=1)


class DataConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    scene: SceneSpec = Field(default_factory=SceneSpec)
    train_scenes: int = Field(500, ge=1)
    eval_scenes: int = Field(100, ge=1)

# --- Run sections ---

class TrainConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    iterations: int = Field(2000, ge=0)
    base_lr: float = Field(0.005, gt=0.0)
    lr_decay_step: int = Field(1500, ge=1)
    lr_decay_factor: float = Field(0.1, gt=0.0, le=1.0)
    momentum: float = Field(0.9, ge=0.0, lt=1.0)
    weight_decay: float = Field(0.0005, ge=0.0)
    seed: int = 42
    rois_per_image: int = Field(32, ge=1)
    fg_fraction: float = Field(0.25, ge=0.0, le=1.0)
    eval_interval: int = Field(500, ge=1)
    clip_grad_norm: Optional[float] = Field(10.0, gt=0.0)
    precision: str = Precision.FLOAT32

    @field_validator('precision')
    @classmethod
    def known_precision(cls, precision: str) -> str:
        if precision not in (Precision.FLOAT32, Precision.FLOAT64):
            raise ValueError(f"precision must be '{Precision.FLOAT32}' or '{Precision.FLOAT64}', got '{precision}'")
        return precision

    def learning_rate(self, iteration: int) -> float:
        return self.base_lr * self.lr_decay_factor ** (iteration // self.lr_decay_step)


class EvalConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    score_threshold: float = Field(0.05, ge=0.0, le=1.0)
    nms_iou: float = Field(0.3, gt=0.0, lt=1.0)
    map_iou: float = Field(0.5, gt=0.0, le=1.0)
    proposals_per_image: int = Field(64, ge=1)
    min_map: float = Field(0.0, ge=0.0, le=1.0)


class ChecksConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    epsilon: float = Field(1e-4, gt=0.0)
    tolerance: float = Field(1e-5, gt=0.0)
    oracle_tolerance: float = Field(1e-10, gt=0.0)
    oracle_trials: int = Field(50, ge=1)
    predictor_trials: int = Field(100, ge=1)
    seed: int = 0
    max_skip_fraction: float = Field(0.05, ge=0.0, le=1.0)
    max_reruns: int = Field(3, ge=0)


class PathsConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    weights_in: Optional[str] = None
    weights_out: str = 'weights.mlkp'
    report: str = 'report.txt'
    metrics_log: str = 'metrics.log'
    detections: str = 'detections.txt'
    data_dir: str = 'scenes'


class RunConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    proposals: ProposalSpec = Field(default_factory=ProposalSpec)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    checks: ChecksConfig = Field(default_factory=ChecksConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)

    @model_validator(mode='after')
    def consistent_classes(self) -> 'RunConfig':
        if self.model.num_classes != self.data.scene.num_classes:
            raise ValueError(
                f"model.num_classes ({self.model.num_classes}) differs from "
                f"data.scene.num_classes ({self.data.scene.num_classes})"
            )
        return self

    def with_mlkp(self, mlkp: MLKPConfig, fusion_enabled: Optional[bool] = None) -> 'RunConfig':
        """Copy of this run with another kernel configuration (used by ablations)."""
        fusion = self.model.fusion if fusion_enabled is None else self.model.fusion.model_copy(update={'enabled': fusion_enabled})
        model = self.model.model_copy(update={'mlkp': mlkp, 'fusion': fusion})
        return self.model_copy(update={'model': model})
