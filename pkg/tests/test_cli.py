import math
import os
import re
import numpy as np

from app import cli
from app.cli import main
from app.constants import ExitStatus
from app.detection.export import parse_detection
from app.exceptions import ShapeMismatchError
from app.models.detector import MLKPDetector
from app.models.losses import LossResult
from app.services import train_service
from app.utils.config_file import save_config
from app.utils.utils import load_text, save_text
from app.utils.weights import load_weights

METRIC_LINE = re.compile(r'^iter=\d+ loss=-?\d+\.\d{6} map50=\d\.\d{6}$')


def _config(cfg, tmp_path, **train):
    if train:
        cfg = cfg.model_copy(update={'train': cfg.train.model_copy(update=train)})
    path = str(tmp_path / 'run.cfg')
    save_config(cfg, path)
    return cfg, path

def test_zero_iterations_writes_initial_weights(tiny_run, tmp_path):
    cfg, path = _config(tiny_run, tmp_path, iterations=0)
    assert main(['train', '--config', path]) == ExitStatus.OK
    loaded = load_weights(cfg.paths.weights_out)
    initial = MLKPDetector(cfg.model, seed=cfg.train.seed).store
    assert loaded.names() == initial.names()
    for name in initial:
        np.testing.assert_array_equal(loaded[name], initial[name])

def test_train_logs_metrics_and_evaluates(tiny_run, tmp_path):
    cfg, path = _config(tiny_run, tmp_path)
    assert main(['train', '--config', path]) == ExitStatus.OK
    lines = load_text(cfg.paths.metrics_log).splitlines()
    assert [line.split()[0] for line in lines] == ['iter=2', 'iter=3']
    assert all(METRIC_LINE.match(line) for line in lines)

    report = str(tmp_path / 'eval.txt')
    assert main(['eval', '--config', path, '--report', report]) == ExitStatus.OK
    assert re.search(r'^map50=\d\.\d{6} ', load_text(report), re.MULTILINE)

    out = str(tmp_path / 'dets.txt')
    assert main(['export-detections', '--config', path, '--out', out]) == ExitStatus.OK
    for line in load_text(out).splitlines():
        det = parse_detection(line)
        assert det.image_id in (4, 5)
        assert 1 <= det.class_id <= 2
        assert 0.0 <= det.score <= 1.0

def test_eval_threshold_fails_the_command(tiny_run, tmp_path):
    cfg, path = _config(tiny_run, tmp_path, iterations=0)
    assert main(['train', '--config', path]) == ExitStatus.OK
    strict = cfg.model_copy(update={'eval': cfg.eval.model_copy(update={'min_map': 1.0})})
    save_config(strict, path)
    assert main(['eval', '--config', path]) == ExitStatus.CHECK_FAILED

def test_gradcheck_selected_suites(tiny_run, tmp_path):
    _, path = _config(tiny_run, tmp_path)
    report = str(tmp_path / 'grad.txt')
    assert main(['gradcheck', '--config', path, '--suite', 'conv2d', '--suite', 'pointwise_relu', '--report', report]) == 0
    text = load_text(report)
    assert '== conv2d' in text and '== pointwise_relu' in text
    assert text.rstrip().endswith('overall: PASS')

def test_gradcheck_unknown_suite(tiny_run, tmp_path):
    _, path = _config(tiny_run, tmp_path)
    assert main(['gradcheck', '--config', path, '--suite', 'nope']) == ExitStatus.INVALID_INPUT

def test_oracle_command(tiny_run, tmp_path):
    cfg, path = _config(tiny_run, tmp_path)
    assert main(['oracle', '--config', path, '--trials', '1']) == ExitStatus.OK
    assert load_text(cfg.paths.report).rstrip().endswith('result: PASS')

def test_invalid_config_exits_2(tmp_path):
    path = str(tmp_path / 'bad.cfg')
    save_text("model.mlkp.max_order = 7\nmystery = 1\n", path)
    assert main(['train', '--config', path]) == ExitStatus.INVALID_INPUT
    assert main(['oracle', '--config', str(tmp_path / 'absent.cfg')]) == ExitStatus.INVALID_INPUT

def test_missing_weights_exit_2(tiny_run, tmp_path):
    _, path = _config(tiny_run, tmp_path)
    assert main(['eval', '--config', path, '--weights', str(tmp_path / 'absent.mlkp')]) == ExitStatus.INVALID_INPUT

def test_numeric_blow_up_exits_3(tiny_run, tmp_path, monkeypatch):
    _, path = _config(tiny_run, tmp_path)

    def diverged(logits, deltas, targets):
        return LossResult(math.nan, math.nan, 0.0, np.zeros_like(logits), np.zeros_like(deltas))

    monkeypatch.setattr(train_service, 'detection_loss', diverged)
    assert main(['train', '--config', path]) == ExitStatus.NUMERIC_BLOW_UP

def test_gen_data(tiny_run, tmp_path):
    _, path = _config(tiny_run, tmp_path)
    out = tmp_path / 'generated'
    assert main(['gen-data', '--config', path, '--out-dir', str(out)]) == ExitStatus.OK
    assert len([name for name in os.listdir(out / 'train') if name.endswith('.png')]) == 4
    assert len([name for name in os.listdir(out / 'eval') if name.endswith('.png')]) == 2

def test_ablate_single_variant(tiny_run, tmp_path):
    cfg, path = _config(tiny_run, tmp_path, iterations=1)
    assert main(['ablate', '--config', path, '--variant', 'order2']) == ExitStatus.OK
    assert re.match(r'^variant=order2 order=2 map50=\d\.\d{6}$', load_text(cfg.paths.report).strip())

def test_ablate_unknown_variant(tiny_run, tmp_path):
    _, path = _config(tiny_run, tmp_path)
    assert main(['ablate', '--config', path, '--variant', 'order9']) == ExitStatus.INVALID_INPUT

def test_unwritable_report_exits_2(tiny_run, tmp_path):
    _, path = _config(tiny_run, tmp_path)
    folder = tmp_path / 'reports'
    folder.mkdir()
    assert main(['gradcheck', '--config', path, '--suite', 'conv2d', '--report', str(folder)]) == ExitStatus.INVALID_INPUT

def test_library_errors_exit_2(tiny_run, tmp_path, monkeypatch):
    _, path = _config(tiny_run, tmp_path)

    def mismatched(checks, trials=None):
        raise ShapeMismatchError("conv weights (4, 8, 3, 3) do not match input (1, 5, 4, 4)")

    monkeypatch.setattr(cli, 'run_oracles', mismatched)
    assert main(['oracle', '--config', path]) == ExitStatus.INVALID_INPUT
