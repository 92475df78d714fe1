from .config_dto import (
    BackboneConfig, ChecksConfig, DataConfig, EvalConfig, FusionBlockConfig, FusionConfig, MLKPConfig, ModelConfig,
    PathsConfig, ProposalSpec, RunConfig, SceneSpec, TrainConfig,
)
from .report_dto import (
    AblationResult, GradReport, MapReport, OracleCheck, OracleReport, ParamGradReport, TrainSummary,
)

__all__ = [
    # Config DTOs
    'BackboneConfig', 'ChecksConfig', 'DataConfig', 'EvalConfig', 'FusionBlockConfig', 'FusionConfig',
    'MLKPConfig', 'ModelConfig', 'PathsConfig', 'ProposalSpec', 'RunConfig', 'SceneSpec', 'TrainConfig',
    # Report DTOs
    'AblationResult', 'GradReport', 'MapReport', 'OracleCheck', 'OracleReport', 'ParamGradReport', 'TrainSummary',
]
