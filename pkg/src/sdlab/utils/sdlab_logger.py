# -*- coding: utf-8 -*-
"""Loggers for the sdlab CLI and pipeline stages, driven by the `logging:` config block."""

import logging
import os
from typing import Any, Dict

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'


def get_sdlab_logger(name: str, config: Dict[str, Any]) -> logging.Logger:
    """
    Logger `name` with handlers from config['logging']: log_file_path (its
    directory is created on demand), log_to_terminal and log_level. A name is
    configured once; later calls return it untouched.
    """
    logger = logging.getLogger(name)
    if logger.handlers:
        return logger

    settings = config.get('logging', {}) or {}
    logger.setLevel(getattr(logging, str(settings.get('log_level', 'INFO')).upper(), logging.INFO))
    # Stage messages would otherwise print twice under a configured root.
    logger.propagate = False
    formatter = logging.Formatter(LOG_FORMAT)

    log_file_path = settings.get('log_file_path')
    if log_file_path:
        try:
            log_dir = os.path.dirname(log_file_path)
            if log_dir:
                os.makedirs(log_dir, exist_ok=True)
            file_handler = logging.FileHandler(log_file_path, encoding='utf-8')
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)
        except OSError as e:
            print(f"Could not open log file {log_file_path}: {e}")

    if settings.get('log_to_terminal', True):
        stream_handler = logging.StreamHandler()
        stream_handler.setFormatter(formatter)
        logger.addHandler(stream_handler)

    if not logger.handlers:
        logger.addHandler(logging.NullHandler())
    return logger
