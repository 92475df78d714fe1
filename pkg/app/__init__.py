import os
import logging
from dotenv import load_dotenv
from app.context import context
from app.extensions import log

def init_app(env_file: str = None):
    """Loads the environment and applies log levels before any command runs."""
    load_dotenv(env_file, override=True)

    app_log_level_str = os.getenv("APP_LOG_LEVEL", "INFO").upper()
    # getLevelNamesMapping() is 3.11+; older interpreters expose the same table privately.
    log_level_map = (logging.getLevelNamesMapping() if hasattr(logging, "getLevelNamesMapping")
                     else dict(logging._nameToLevel))

    context.log_level = log_level_map.get(app_log_level_str, logging.INFO)
    log.setLevel(context.log_level)
    for logger in context.loggers.values():
        logger.setLevel(context.log_level)
    return context
