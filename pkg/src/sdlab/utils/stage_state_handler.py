# -*- coding: utf-8 -*-
"""
Centralized utility for the pipeline's stage state.
Records, per stage, the fingerprint of its inputs and the hashes of its
outputs so that an unchanged rerun can skip the stage.
"""

import json
import os
from typing import Any, Dict, Iterable, Optional

from sdlab.utils.file_utils import sha256_file

def get_file_fingerprint(file_path: str) -> Dict[str, Any]:
    """Returns size and content hash of a file, or {} if it does not exist."""
    try:
        stat = os.stat(file_path)
    except FileNotFoundError:
        return {}
    return {'size': stat.st_size, 'sha256': sha256_file(file_path)}

def load_state(state_file_path: str, logger, default_state: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Loads the pipeline state from a JSON file. A missing or unreadable file
    yields the default state.

    Args:
        state_file_path: The full path to the state file.
        logger: The lab logger instance.
        default_state: The state to return if the file is not found or invalid.

    Returns:
        The loaded state as a dictionary.
    """
    if default_state is None:
        default_state = {}
    try:
        with open(state_file_path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except FileNotFoundError:
        logger.info(f"State file not found at {state_file_path}. Starting from an empty state.")
        return dict(default_state)
    except (json.JSONDecodeError, TypeError):
        logger.warning(f"State file at {state_file_path} is invalid. Using default state.")
        return dict(default_state)

def save_state(state: Dict[str, Any], state_file_path: str, logger) -> None:
    """Saves the pipeline state to a JSON file using an atomic write operation."""
    temp_file_path = state_file_path + ".tmp"
    try:
        os.makedirs(os.path.dirname(state_file_path), exist_ok=True)
        with open(temp_file_path, 'w', encoding='utf-8') as f:
            json.dump(state, f, indent=4, sort_keys=True)
        os.replace(temp_file_path, state_file_path)
    except IOError as e:
        logger.error(f"Failed to save state to {state_file_path}: {e}")
    finally:
        if os.path.exists(temp_file_path):
            os.remove(temp_file_path)

def stage_is_current(state: Dict[str, Any], stage_key: str, input_fingerprint: str) -> bool:
    """
    True when the stage last ran with the same input fingerprint and every
    output it recorded still exists with the same content hash.
    """
    entry = state.get(stage_key)
    if not entry or entry.get('input_fingerprint') != input_fingerprint:
        return False
    outputs = entry.get('outputs', {})
    if not outputs:
        return False
    for path, recorded in outputs.items():
        if get_file_fingerprint(path) != recorded:
            return False
    return True

def record_stage(state: Dict[str, Any], stage_key: str, input_fingerprint: str, output_paths: Iterable[str]) -> Dict[str, Any]:
    """Stores the stage's input fingerprint and current output hashes in the state dict."""
    state[stage_key] = {
        'input_fingerprint': input_fingerprint,
        'outputs': {path: get_file_fingerprint(path) for path in output_paths},
    }
    return state[stage_key]
