import logging
from dataclasses import dataclass, field
from typing import Dict


@dataclass
class Context:
    loggers: Dict[str, logging.Logger] = field(default_factory=dict)
    log_level: int = logging.INFO

context = Context()
