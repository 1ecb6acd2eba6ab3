"""
Logging configuration shared by the entry points.

Library modules log through the root logger and never configure it. Entry
points call ``configure_logging()`` once; the level comes from
``CITRINET_LOG_LEVEL`` (default INFO).
"""

import logging
import os
import sys


LOG_LEVEL_ENV = "CITRINET_LOG_LEVEL"
NOISY_LOGGERS = ["dotenv", "soundfile"]


class NewlineLoggingHandler(logging.StreamHandler):
    """Stream handler on stderr that leaves a blank line after each entry."""

    def __init__(self):
        super().__init__(sys.stderr)

    def emit(self, record):
        super().emit(record)
        self.stream.write("\n")
        self.flush()


def _level_from_env(env=None):
    env = env if env is not None else os.environ
    name = str(env.get(LOG_LEVEL_ENV, "INFO")).strip().upper()
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.INFO


def configure_logging(env=None):
    """
    Configure the root logger with NewlineLoggingHandler.

    Does nothing when the root logger already has handlers.
    """
    if not logging.getLogger().handlers:
        logging.basicConfig(
            level=_level_from_env(env),
            format="%(levelname)s: %(message)s",
            handlers=[NewlineLoggingHandler()],
        )

        for logger_name in NOISY_LOGGERS:
            logging.getLogger(logger_name).setLevel(logging.WARNING)
