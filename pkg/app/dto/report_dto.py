from typing import Dict, List, Optional
from pydantic import BaseModel, Field

from app.constants import FLOAT_FORMAT

# --- Gradient checks ---

class ParamGradReport(BaseModel):
    name: str
    max_rel_error: float = 0.0
    mean_rel_error: float = 0.0
    worst_index: List[int] = Field(default_factory=list)
    checked: int = 0
    skipped: int = 0
    passed: bool = True


class GradReport(BaseModel):
    title: str
    tolerance: float
    epsilon: float
    params: List[ParamGradReport] = Field(default_factory=list)
    failures: List[str] = Field(default_factory=list)
    reruns: int = 0

    @property
    def passed(self) -> bool:
        return not self.failures and all(param.passed for param in self.params)

    @property
    def checked(self) -> int:
        return sum(param.checked for param in self.params)

    @property
    def skipped(self) -> int:
        return sum(param.skipped for param in self.params)

    @property
    def skip_fraction(self) -> float:
        total = self.checked + self.skipped
        return self.skipped / total if total else 0.0

    def param(self, name: str) -> ParamGradReport:
        for param in self.params:
            if param.name == name:
                return param
        raise KeyError(f"No gradient report for '{name}'")

    def render(self) -> str:
        """Text table, one row per parameter tensor."""
        width = max([len(param.name) for param in self.params] + [9])
        lines = [
            f"== {self.title} (eps={self.epsilon:g}, tolerance={self.tolerance:g}, reruns={self.reruns})",
            f"{'parameter':<{width}}  {'max_rel':>12}  {'mean_rel':>12}  {'checked':>7}  {'skipped':>7}  worst  status",
        ]
        for param in self.params:
            lines.append(
                f"{param.name:<{width}}  {param.max_rel_error:>12.3e}  {param.mean_rel_error:>12.3e}  "
                f"{param.checked:>7}  {param.skipped:>7}  {tuple(param.worst_index)}  "
                f"{'PASS' if param.passed else 'FAIL'}"
            )
        lines.extend(f"failure: {failure}" for failure in self.failures)
        lines.append(f"result: {'PASS' if self.passed else 'FAIL'}")
        return '\n'.join(lines)

# --- Oracles ---

class OracleCheck(BaseModel):
    name: str
    trials: int
    max_rel_error: float
    passed: bool


class OracleReport(BaseModel):
    tolerance: float
    checks: List[OracleCheck] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(check.passed for check in self.checks)

    def render(self) -> str:
        lines = [f"== oracles (tolerance={self.tolerance:g})"]
        for check in self.checks:
            lines.append(
                f"{check.name:<24} trials={check.trials:<5} max_rel={check.max_rel_error:.3e} "
                f"{'PASS' if check.passed else 'FAIL'}"
            )
        lines.append(f"result: {'PASS' if self.passed else 'FAIL'}")
        return '\n'.join(lines)

# --- Detection metrics ---

class MapReport(BaseModel):
    per_class_ap: Dict[int, float] = Field(default_factory=dict)
    mean_ap: float = 0.0
    iou: float = 0.5
    num_detections: int = 0
    num_ground_truth: int = 0

    def render(self) -> str:
        lines = [f"class={class_id} ap={FLOAT_FORMAT.format(ap)}" for class_id, ap in sorted(self.per_class_ap.items())]
        lines.append(
            f"map{round(self.iou * 100)}={FLOAT_FORMAT.format(self.mean_ap)} "
            f"detections={self.num_detections} ground_truth={self.num_ground_truth}"
        )
        return '\n'.join(lines)


class TrainSummary(BaseModel):
    iterations: int
    loss_history: List[float] = Field(default_factory=list)
    metric_lines: List[str] = Field(default_factory=list)
    final_map: Optional[float] = None
    weights_path: Optional[str] = None


class AblationResult(BaseModel):
    variant: str
    order: int
    location_weight: bool
    multi_scale: bool
    mean_ap: float

    def render(self) -> str:
        return f"variant={self.variant} order={self.order} map50={FLOAT_FORMAT.format(self.mean_ap)}"
