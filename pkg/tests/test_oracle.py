import numpy as np
import pytest

from app.constants import PointwiseOp
from app.core import ConvParams, pointwise
from app.dto.config_dto import ChecksConfig
from app.exceptions import OracleSizeError
from app.models.mlkp_block import MLKPParams
from app.oracle import finite_diff_check, kernel_oracle, max_relative_error, predictor_oracle, relative_error
from app.services.oracle_service import failed_checks, predictor_trial, run_oracles


def _factor(rows):
    weights = np.asarray(rows, dtype=np.float64)
    return ConvParams(weights.reshape(weights.shape[0], -1, 1, 1), np.zeros(weights.shape[0]))

def test_kernel_oracle_hand_example():
    params = MLKPParams(factor_convs={2: [_factor([[1.0, 2.0]]), _factor([[-2.0, -2.0]])]})
    out = kernel_oracle(np.ones((1, 2, 1, 1)), params, 2)
    assert out.shape == (1, 1, 1, 1)
    assert out[0, 0, 0, 0] == -12.0

def test_kernel_oracle_applies_biases():
    first, second = _factor([[1.0]]), _factor([[1.0]])
    first.bias[0] = 1.0
    out = kernel_oracle(np.full((1, 1, 1, 2), 3.0), MLKPParams(factor_convs={2: [first, second]}), 2)
    np.testing.assert_array_equal(out.ravel(), [12.0, 12.0])

def test_kernel_oracle_size_limits():
    params = MLKPParams(factor_convs={2: [_factor(np.ones((1, 40)))] * 2})
    with pytest.raises(OracleSizeError):
        kernel_oracle(np.ones((1, 40, 1, 1)), params, 2)
    params = MLKPParams(factor_convs={2: [_factor([[1.0]])] * 2})
    with pytest.raises(OracleSizeError):
        kernel_oracle(np.ones((1, 1, 9, 9)), params, 2)
    with pytest.raises(OracleSizeError):
        kernel_oracle(np.ones((1, 1, 1, 1)), params, 4)

def test_predictor_with_one_channel():
    orders = {2: ([np.array([[3.0]]), np.array([[4.0]])], np.array([1.0]))}
    comparison = predictor_oracle(np.array([2.0]), np.array([0.5]), orders)
    assert comparison.explicit == 49.0
    assert comparison.factored == 49.0
    assert comparison.rel_gap == 0.0

def test_predictor_with_zero_weights_is_linear(rng):
    x, w1 = rng.standard_normal(4), rng.standard_normal(4)
    orders = {r: ([rng.standard_normal((3, 4)) for _ in range(r)], np.zeros(3)) for r in (2, 3)}
    comparison = predictor_oracle(x, w1, orders)
    assert comparison.explicit == pytest.approx(float(np.dot(w1, x)), abs=1e-14)
    assert comparison.factored == pytest.approx(float(np.dot(w1, x)), abs=1e-14)

def test_predictor_rejects_wide_inputs(rng):
    with pytest.raises(OracleSizeError):
        predictor_oracle(rng.standard_normal(9), rng.standard_normal(9), {})

def test_predictor_factorization_agrees(rng):
    assert predictor_trial(rng) <= 1e-10

def test_relative_error_scale():
    assert relative_error(1e-3, 2e-3) == pytest.approx(1e-3)
    assert relative_error(100.0, 101.0) == pytest.approx(1.0 / 101.0)
    assert max_relative_error(np.array([1.0, 200.0]), np.array([1.0, 202.0])) == pytest.approx(2.0 / 202.0)
    with pytest.raises(ValueError):
        max_relative_error(np.zeros(2), np.zeros(3))

def test_finite_differences_of_a_square():
    x = np.array([3.0, -1.5])
    report = finite_diff_check(lambda: float(np.sum(x ** 2)), {'x': x}, {'x': 2.0 * x.copy()})
    assert report.passed
    assert report.param('x').checked == 2
    assert report.param('x').max_rel_error < 1e-8
    np.testing.assert_array_equal(x, [3.0, -1.5])

def test_wrong_gradient_fails():
    x = np.array([3.0])
    report = finite_diff_check(lambda: float(x[0] ** 2), {'x': x}, {'x': np.array([5.0])})
    assert not report.passed
    assert report.param('x').worst_index == [0]
    assert 'FAIL' in report.render()

def test_probes_across_a_relu_kink_are_skipped():
    x = np.array([5e-5, 1.0, -2.0]).reshape(1, 3, 1, 1)

    def loss():
        return float(np.sum(pointwise(PointwiseOp.RELU, x)))

    report = finite_diff_check(loss, {'x': x}, {'x': np.array([1.0, 1.0, 0.0]).reshape(1, 3, 1, 1)})
    assert report.passed
    assert report.param('x').skipped == 1
    assert report.param('x').checked == 2
    assert report.skip_fraction == pytest.approx(1.0 / 3.0)

def test_non_finite_loss_is_a_failure():
    x = np.array([0.0])
    report = finite_diff_check(lambda: float(np.inf) if x[0] > 0 else 0.0, {'x': x}, {'x': np.zeros(1)})
    assert not report.passed
    assert report.failures

def test_single_precision_is_refused():
    x = np.zeros(2, dtype=np.float32)
    with pytest.raises(ValueError):
        finite_diff_check(lambda: 0.0, {'x': x}, {'x': np.zeros(2)})

def test_sampled_probes(rng):
    x = rng.standard_normal(100)
    report = finite_diff_check(lambda: float(np.sum(x ** 3)), {'x': x}, {'x': 3.0 * x ** 2}, max_probes=10, rng=rng)
    assert report.param('x').checked == 10
    assert report.passed

def test_negated_loss_gives_a_mirrored_report(rng):
    x = rng.standard_normal(6)
    positive = finite_diff_check(lambda: float(np.sum(x ** 3)), {'x': x}, {'x': 3.0 * x ** 2})
    negative = finite_diff_check(lambda: -float(np.sum(x ** 3)), {'x': x}, {'x': -3.0 * x ** 2})
    assert positive.passed and negative.passed
    assert positive.param('x').max_rel_error == negative.param('x').max_rel_error
    assert positive.param('x').checked == negative.param('x').checked == 6

def test_all_oracles_agree():
    report = run_oracles(ChecksConfig(predictor_trials=5), trials=2)
    assert report.passed, report.render()
    assert failed_checks(report) == []
    assert {check.name for check in report.checks} >= {'kernel_order3', 'roi_pool_exhaustive', 'nms_reference'}
