"""
Central finite-difference gradient checking.

`f` re-evaluates a scalar loss from the current contents of the parameter
arrays, which are perturbed in place one coordinate at a time and restored
afterwards. Every evaluation runs under a branch trace; a probe whose +ε and
−ε evaluations took different relu/argmax branches crossed a kink and is
skipped rather than compared.
"""
import math
import numpy as np
from typing import Callable, Dict, Iterable, Optional, Tuple

from app.context import context
from app.core import branch_trace
from app.dto.report_dto import GradReport, ParamGradReport
from app.utils.utils import create_logger

gradcheck_log = create_logger(__name__, entity_name='GRADCHECK', level=context.log_level)


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))

def _probe(f: Callable[[], float], array: np.ndarray, index: Tuple[int, ...], delta: float) -> Tuple[float, bytes]:
    original = array[index]
    array[index] = original + delta
    try:
        with branch_trace() as trace:
            value = float(f())
    finally:
        array[index] = original
    return value, trace.signature()

def _indices(array: np.ndarray, max_probes: Optional[int], rng: Optional[np.random.Generator]) -> Iterable[Tuple[int, ...]]:
    if max_probes is None or array.size <= max_probes:
        return np.ndindex(array.shape)
    rng = rng if rng is not None else np.random.default_rng(0)
    flat = np.sort(rng.choice(array.size, size=max_probes, replace=False))
    return (np.unravel_index(position, array.shape) for position in flat)

def finite_diff_check(f: Callable[[], float], params: Dict[str, np.ndarray], analytic: Dict[str, np.ndarray],
                      epsilon: float = 1e-4, tolerance: float = 1e-5, title: str = 'gradcheck',
                      max_probes: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> GradReport:
    """
    Compares `analytic[name]` against (f(θ+ε) − f(θ−ε)) / 2ε for every
    coordinate of `params[name]` (or `max_probes` sampled coordinates per
    tensor). Parameters must be double precision.
    """
    report = GradReport(title=title, tolerance=tolerance, epsilon=epsilon)
    for name, array in params.items():
        if array.dtype != np.float64:
            raise ValueError(f"Gradient checks need float64 parameters, '{name}' is {array.dtype}")
        if name not in analytic:
            raise KeyError(f"No analytic gradient for '{name}'")
        gradient = np.asarray(analytic[name], dtype=np.float64)
        if gradient.shape != array.shape:
            raise ValueError(f"Analytic gradient for '{name}' has shape {gradient.shape}, parameter has {array.shape}")

        entry = ParamGradReport(name=name)
        errors = []
        for index in _indices(array, max_probes, rng):
            index = tuple(int(i) for i in index)
            plus, plus_signature = _probe(f, array, index, epsilon)
            minus, minus_signature = _probe(f, array, index, -epsilon)
            if not (math.isfinite(plus) and math.isfinite(minus)):
                report.failures.append(f"{name}{list(index)}: non-finite loss (f+={plus}, f-={minus})")
                entry.passed = False
                continue
            if plus_signature != minus_signature:
                entry.skipped += 1
                continue
            numeric = (plus - minus) / (2.0 * epsilon)
            error = relative_error(float(gradient[index]), numeric)
            errors.append(error)
            entry.checked += 1
            if error > entry.max_rel_error or not entry.worst_index:
                entry.max_rel_error = max(entry.max_rel_error, error)
                entry.worst_index = list(index)
        if errors:
            entry.mean_rel_error = float(np.mean(errors))
        entry.passed = entry.passed and entry.max_rel_error <= tolerance
        report.params.append(entry)
        gradcheck_log.debug(
            f"{title}: {name} max_rel={entry.max_rel_error:.3e} checked={entry.checked} skipped={entry.skipped}"
        )
    return report
