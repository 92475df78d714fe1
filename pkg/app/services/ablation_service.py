from typing import List, Optional, Tuple

from app.constants import ABLATION_BASELINE, ABLATION_TARGET, ABLATION_VARIANTS
from app.context import context
from app.dto.config_dto import MLKPConfig, RunConfig
from app.dto.report_dto import AblationResult
from app.exceptions import ConfigError
from app.services.eval_service import evaluate_detector
from app.services.train_service import train_detector
from app.utils.utils import create_logger

ablation_service_log = create_logger(__name__, entity_name='ABLATION_SERVICE', level=context.log_level)


def ablation_variants(cfg: RunConfig) -> List[Tuple[str, RunConfig]]:
    """
    The run configuration rewritten for every variant. Ranks come from the
    configured kernel where it defines them, from the kernel defaults otherwise.
    """
    defaults = MLKPConfig().ranks
    variants = []
    for name, order, location, multi_scale in ABLATION_VARIANTS:
        ranks = {r: cfg.model.mlkp.ranks.get(r, defaults[r]) for r in range(2, order + 1)}
        mlkp = MLKPConfig(
            max_order=order,
            ranks=ranks,
            location_weight_enabled=location,
            location_hidden_channels=cfg.model.mlkp.location_hidden_channels,
        )
        variant = cfg.with_mlkp(mlkp, fusion_enabled=multi_scale)
        # every variant trains from scratch
        variant = variant.model_copy(update={'paths': variant.paths.model_copy(update={'weights_in': None})})
        variants.append((name, variant))
    return variants

def run_ablation(cfg: RunConfig, variants: Optional[List[str]] = None) -> List[AblationResult]:
    """Trains and evaluates identical copies of the run, one per kernel variant."""
    known = [name for name, *_ in ABLATION_VARIANTS]
    unknown = sorted(set(variants or []) - set(known))
    if unknown:
        raise ConfigError([f"unknown ablation variant '{name}'; available: {known}" for name in unknown])
    results = []
    for name, variant_cfg in ablation_variants(cfg):
        if variants is not None and name not in variants:
            continue
        ablation_service_log.info(f"Ablation variant '{name}'")
        detector, _ = train_detector(variant_cfg, evaluate=False)
        report = evaluate_detector(detector, variant_cfg)
        result = AblationResult(
            variant=name,
            order=variant_cfg.model.mlkp.max_order,
            location_weight=variant_cfg.model.mlkp.location_weight_enabled,
            multi_scale=variant_cfg.model.fusion.enabled,
            mean_ap=report.mean_ap,
        )
        ablation_service_log.info(result.render())
        results.append(result)
    return results

def high_order_wins(results: List[AblationResult]) -> bool:
    """True when the third-order variant strictly beats the first-order baseline."""
    by_name = {result.variant: result for result in results}
    if ABLATION_BASELINE not in by_name or ABLATION_TARGET not in by_name:
        return False
    return by_name[ABLATION_TARGET].mean_ap > by_name[ABLATION_BASELINE].mean_ap
