# -*- coding: utf-8 -*-
"""
Utility for loading and parsing the lab's configuration file.
"""

import os
from typing import Any, Dict, List, Optional, Union

import yaml

from sdlab.utils.exceptions import ConfigError

_cached_config: Optional[Dict[str, Any]] = None

def load_yaml_config(path: str) -> Dict[str, Any]:
    """Loads and parses a YAML config file, returning {} for an empty file."""
    with open(path, 'r', encoding='utf-8') as f:
        return yaml.safe_load(f) or {}

def _substitute(value: str, templates: Dict[str, Any]) -> str:
    new_value = value
    for placeholder, replacement in templates.items():
        token = f"{{{{{placeholder}}}}}"
        if token in new_value and isinstance(replacement, str):
            new_value = new_value.replace(token, replacement)
    return new_value

def resolve_placeholders(obj: Union[Dict, List], templates: Dict[str, Any]) -> bool:
    """
    Recursively replaces `{{name}}` placeholders in strings of a config tree
    with the matching template values. Returns True if anything changed.
    """
    made_replacement = False

    if isinstance(obj, dict):
        for key, value in obj.items():
            if isinstance(value, str):
                new_value = _substitute(value, templates)
                if new_value != value:
                    made_replacement = True
                    if 'folder' in key or 'path' in key:
                        obj[key] = os.path.normpath(new_value)
                    else:
                        obj[key] = new_value
            elif isinstance(value, (dict, list)):
                if resolve_placeholders(value, templates):
                    made_replacement = True

    elif isinstance(obj, list):
        for i, item in enumerate(obj):
            if isinstance(item, str):
                new_item = _substitute(item, templates)
                if new_item != item:
                    obj[i] = new_item
                    made_replacement = True
            elif isinstance(item, (dict, list)):
                if resolve_placeholders(item, templates):
                    made_replacement = True

    return made_replacement

def resolve_project_paths(project_root: str, project_paths: Dict[str, Any]) -> Dict[str, Any]:
    """
    Seeds `project_paths` with `project_root` and resolves `{{...}}`
    placeholders within it in place (multi-pass, since some paths reference
    other paths, e.g. datasets_folder references data_folder).
    """
    project_paths['project_root'] = project_root
    for _ in range(5):  # Limit iterations to prevent infinite loops
        if not resolve_placeholders(project_paths, project_paths):
            break
    return project_paths

def _find_project_root() -> Optional[str]:
    """Walks up from this file looking for a directory that holds config/."""
    current_dir = os.path.dirname(os.path.abspath(__file__))
    for _ in range(6):
        if (os.path.isfile(os.path.join(current_dir, 'config', 'config.yaml'))
                or os.path.isfile(os.path.join(current_dir, 'config', 'sampleconfig.yaml'))):
            return current_dir
        parent_dir = os.path.dirname(current_dir)
        if parent_dir == current_dir:
            break
        current_dir = parent_dir
    return None

def _project_root_for(config_path: str) -> str:
    config_dir = os.path.dirname(os.path.abspath(config_path))
    if os.path.basename(config_dir) == 'config':
        return os.path.dirname(config_dir)
    return config_dir

def build_config(raw_config: Dict[str, Any], project_root: str) -> Dict[str, Any]:
    """Resolves placeholders and applies environment overrides to a raw config tree."""
    config = raw_config
    templates = resolve_project_paths(project_root, config.get('project_paths', {}) or {})
    config['project_paths'] = templates
    for _ in range(5):
        if not resolve_placeholders(config, templates):
            break

    # --- Environment variable overrides ---
    log_level = os.getenv('SDLAB_LOG_LEVEL')
    if log_level:
        config.setdefault('logging', {})['log_level'] = log_level

    workers = os.getenv('SDLAB_WORKERS')
    if workers:
        try:
            config.setdefault('processing_defaults', {})['workers'] = int(workers)
        except ValueError:
            raise ConfigError(f"SDLAB_WORKERS must be an integer, got '{workers}'.")

    return config

def load_config(config_path: Optional[str] = None) -> Dict[str, Any]:
    """
    Public function to get the application configuration.

    With no argument, the project's config/config.yaml (falling back to
    config/sampleconfig.yaml) is loaded once and cached. An explicit path is
    always loaded fresh.
    """
    global _cached_config

    if config_path is None and _cached_config is not None:
        return _cached_config

    if config_path is None:
        project_root = _find_project_root()
        if not project_root:
            raise ConfigError("Could not find project root. Searched for 'config/config.yaml' or 'config/sampleconfig.yaml'.")
        path = os.path.join(project_root, 'config', 'config.yaml')
        if not os.path.exists(path):
            path = os.path.join(project_root, 'config', 'sampleconfig.yaml')
    else:
        path = config_path
        project_root = _project_root_for(path)

    if not os.path.exists(path):
        raise ConfigError(f"Config file not found at {path}")

    try:
        raw_config = load_yaml_config(path)
    except yaml.YAMLError as e:
        raise ConfigError(f"Could not parse {path}: {e}")

    if not isinstance(raw_config, dict):
        raise ConfigError(f"Config file {path} must contain a mapping at the top level.")

    config = build_config(raw_config, project_root)
    config['config_file_path'] = os.path.abspath(path)

    if config_path is None:
        _cached_config = config
    return config

def get_config_value(config: Dict[str, Any], key_path: str, default: Any = None) -> Any:
    """
    Safely retrieves a nested value from a dictionary using a dot-separated path.

    Args:
        config: The configuration dictionary to search.
        key_path: A dot-separated string representing the nested key (e.g., 'parent.child.key').
        default: The value to return if the key is not found.

    Returns:
        The value found at the specified path, or the default value.
    """
    keys = key_path.split('.')
    value = config
    for key in keys:
        if isinstance(value, dict) and key in value:
            value = value[key]
        else:
            return default
    return value
