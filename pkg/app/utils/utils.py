import logging
import coloredlogs
import os
from typing import Iterable

from app.context import context
from app.extensions import log


def save_text(text: str, file_path: str) -> None:
    """
    Saves a text document, creating parent folders as needed.
    """
    folder = os.path.dirname(file_path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    with open(file_path, 'w', encoding='utf-8') as file:
        file.write(text)

def load_text(file_path: str) -> str:
    """
    Loads a text document.
    """
    with open(file_path, 'r', encoding='utf-8') as file:
        return file.read()

def save_lines(lines: Iterable[str], file_path: str) -> None:
    save_text(''.join(f"{line}\n" for line in lines), file_path)

def create_logger(name: str, entity_name: str, level=logging.INFO):
    """Creates and configures a logger with colored output."""
    if level == logging.DEBUG:
        fmt=f'[%(asctime)s.%(msecs)03d][%(levelname)s][{entity_name}]: %(message)s'
    else:
        fmt=f'[%(asctime)s][%(levelname)s][{entity_name}]: %(message)s'
    logger = logging.getLogger(name)
    logger.setLevel(level)
    logger.propagate = False

    if not logger.handlers:
        coloredlogs.install(level=level, logger=logger, fmt=fmt)
    context.loggers[name] = logger
    log.debug(f"Logger '{name}' created for {entity_name}.")
    return logger
