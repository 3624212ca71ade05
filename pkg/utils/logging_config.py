"""
Logging configuration for SAGE
File: utils/logging_config.py
"""

import logging
import logging.config
from pathlib import Path
from typing import Optional, Union

ROOT_LOGGER = "sage"


def setup_logging(level: str = "INFO", log_file: Optional[Union[str, Path]] = None):
    """
    Setup logging configuration. Console output goes to stderr so stdout stays
    free for structured command output; the file handler only exists when a
    run directory provides a log path.
    """

    handlers = {
        'console': {
            'class': 'logging.StreamHandler',
            'level': level.upper(),
            'formatter': 'standard',
            'stream': 'ext://sys.stderr'
        },
    }
    if log_file is not None:
        handlers['file'] = {
            'class': 'logging.FileHandler',
            'level': 'DEBUG',
            'formatter': 'detailed',
            'filename': str(log_file),
            'mode': 'a',
            'encoding': 'utf-8'
        }

    logging_config = {
        'version': 1,
        'disable_existing_loggers': False,
        'formatters': {
            'standard': {
                'format': '%(asctime)s [%(levelname)s] %(name)s: %(message)s',
                'datefmt': '%Y-%m-%d %H:%M:%S'
            },
            'detailed': {
                'format': '%(asctime)s [%(levelname)s] %(name)s:%(lineno)d: %(message)s',
                'datefmt': '%Y-%m-%d %H:%M:%S'
            },
        },
        'handlers': handlers,
        'loggers': {
            ROOT_LOGGER: {
                'handlers': list(handlers),
                'level': 'DEBUG',
                'propagate': False
            },
        }
    }

    logging.config.dictConfig(logging_config)

    logger = logging.getLogger(ROOT_LOGGER)
    logger.debug("Logging system initialized")

    return logger


def attach_run_log(log_file: Union[str, Path]) -> logging.Handler:
    """Add a DEBUG file handler for one run directory; returns it for detach_run_log"""
    handler = logging.FileHandler(str(log_file), mode='a', encoding='utf-8')
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(logging.Formatter(
        '%(asctime)s [%(levelname)s] %(name)s:%(lineno)d: %(message)s', '%Y-%m-%d %H:%M:%S'))
    logger = logging.getLogger(ROOT_LOGGER)
    logger.addHandler(handler)
    if logger.level == logging.NOTSET or logger.level > logging.DEBUG:
        logger.setLevel(logging.DEBUG)
    return handler


def detach_run_log(handler: logging.Handler):
    logging.getLogger(ROOT_LOGGER).removeHandler(handler)
    handler.close()


def get_logger(name):
    """Get a logger with the given name"""
    return logging.getLogger(f'{ROOT_LOGGER}.{name}')
