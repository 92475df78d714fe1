import json
from typing import Any, Dict, List
from pydantic import BaseModel, ValidationError

from app.context import context
from app.dto.config_dto import RunConfig
from app.exceptions import ConfigError
from app.utils.utils import create_logger, load_text, save_text

config_log = create_logger(__name__, entity_name='CONFIG', level=context.log_level)

COMMENT_PREFIX = '#'


def _parse_value(raw: str) -> Any:
    """JSON literal when it parses as one, the raw text otherwise."""
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw

def _assign(tree: Dict[str, Any], dotted: str, value: Any, line_number: int, problems: List[str]) -> None:
    parts = dotted.split('.')
    if any(not part for part in parts):
        problems.append(f"line {line_number}: malformed key '{dotted}'")
        return
    node = tree
    for depth, part in enumerate(parts[:-1]):
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            problems.append(f"line {line_number}: '{'.'.join(parts[:depth + 1])}' already has a value")
            return
        node = child
    if parts[-1] in node:
        problems.append(f"line {line_number}: duplicate key '{dotted}'")
        return
    node[parts[-1]] = value

def _describe_errors(error: ValidationError) -> List[str]:
    problems = []
    for item in error.errors():
        dotted = '.'.join(str(part) for part in item['loc'])
        if item['type'] == 'extra_forbidden':
            problems.append(f"unknown key '{dotted}'")
        elif dotted:
            problems.append(f"{dotted}: {item['msg']}")
        else:
            problems.append(item['msg'])
    return problems

def parse_config(text: str) -> RunConfig:
    """
    Parses `section.key = value` lines. Values are JSON literals, with bare
    text accepted for string fields; lines starting with '#' are comments.
    """
    tree: Dict[str, Any] = {}
    problems: List[str] = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(COMMENT_PREFIX):
            continue
        if '=' not in stripped:
            problems.append(f"line {line_number}: expected 'key = value', got '{stripped}'")
            continue
        key, raw = stripped.split('=', 1)
        _assign(tree, key.strip(), _parse_value(raw.strip()), line_number, problems)
    if problems:
        raise ConfigError(problems)
    try:
        return RunConfig.model_validate(tree)
    except ValidationError as e:
        raise ConfigError(_describe_errors(e)) from e

def _lines(model: BaseModel, prefix: str) -> List[str]:
    dumped = model.model_dump(mode='json')
    lines = []
    for name in type(model).model_fields:
        value = getattr(model, name)
        dotted = f"{prefix}{name}"
        if isinstance(value, BaseModel):
            lines.extend(_lines(value, f"{dotted}."))
        else:
            lines.append(f"{dotted} = {json.dumps(dumped[name])}")
    return lines

def serialize_config(cfg: RunConfig) -> str:
    """Every field in declaration order; parse_config reads it back unchanged."""
    return '\n'.join(_lines(cfg, '')) + '\n'

def load_config(path: str) -> RunConfig:
    try:
        text = load_text(path)
    except OSError as e:
        raise ConfigError([f"cannot read config '{path}': {e.strerror or e}"]) from e
    cfg = parse_config(text)
    config_log.debug(f"Loaded config from {path}")
    return cfg

def save_config(cfg: RunConfig, path: str) -> None:
    save_text(serialize_config(cfg), path)
