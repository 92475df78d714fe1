import os
import pytest

from app.dto.config_dto import RunConfig
from app.exceptions import ConfigError
from app.utils.config_file import load_config, parse_config, save_config, serialize_config

DEFAULT_CONFIG = os.path.join(os.path.dirname(__file__), '..', 'defaults', 'run.cfg')


def _problems(text):
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    return e.value.problems

def test_serialized_config_reads_back(tiny_run):
    assert parse_config(serialize_config(tiny_run)) == tiny_run

def test_saved_config_loads(tiny_run, tmp_path):
    path = str(tmp_path / 'cfg' / 'run.cfg')
    save_config(tiny_run, path)
    assert load_config(path) == tiny_run

def test_shipped_defaults_are_the_model_defaults():
    assert load_config(DEFAULT_CONFIG) == RunConfig()

def test_empty_text_gives_defaults():
    assert parse_config('# nothing set\n\n') == RunConfig()

def test_sections_override_defaults():
    cfg = parse_config("model.mlkp.max_order = 2\nmodel.mlkp.ranks = {\"2\": 16}\ntrain.iterations = 5\n")
    assert cfg.model.mlkp.max_order == 2
    assert cfg.model.mlkp.ranks == {2: 16}
    assert cfg.train.iterations == 5
    assert cfg.eval == RunConfig().eval

def test_bare_text_is_a_string():
    cfg = parse_config("train.precision = float64\npaths.report = out/report.txt\n")
    assert cfg.train.precision == 'float64'
    assert cfg.paths.report == 'out/report.txt'

def test_unknown_key():
    assert _problems("model.mlkp.colour = 1\n") == ["unknown key 'model.mlkp.colour'"]

def test_duplicate_key():
    problems = _problems("train.seed = 1\ntrain.seed = 2\n")
    assert problems == ["line 2: duplicate key 'train.seed'"]

def test_section_given_a_value():
    problems = _problems("model = 1\nmodel.pool_size = 3\n")
    assert problems == ["line 2: 'model' already has a value"]

def test_line_without_assignment():
    assert _problems("train.seed 4\n") == ["line 1: expected 'key = value', got 'train.seed 4'"]
    assert _problems("train..seed = 4\n") == ["line 1: malformed key 'train..seed'"]

def test_invalid_values_name_their_field():
    problems = _problems("train.iterations = -1\ntrain.precision = \"float16\"\n")
    assert len(problems) == 2
    assert problems[0].startswith('train.iterations:')
    assert problems[1].startswith('train.precision:')

def test_inconsistent_class_counts():
    problems = _problems("model.num_classes = 2\n")
    assert any('num_classes' in problem for problem in problems)

def test_missing_file(tmp_path):
    with pytest.raises(ConfigError) as e:
        load_config(str(tmp_path / 'absent.cfg'))
    assert 'absent.cfg' in e.value.problems[0]
