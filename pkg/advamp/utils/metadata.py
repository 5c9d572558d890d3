"""
Run metadata for advamp JSON outputs.

Policies and verification reports carry a ``_metadata`` block naming the
command, config file, master seed and package version that produced them.
CSV outputs carry none.
"""

import datetime
from typing import Any, Dict, Optional

from advamp import __version__

METADATA_KEY = "_metadata"


def generate_metadata(
    command: str,
    config_file: Optional[str] = None,
    seed: Optional[int] = None,
    version: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Describe the run that is about to write an output.

    Args:
        command: CLI command name (train, verify, ...)
        config_file: Configuration file the run was built from
        seed: Master seed of the run
        version: Package version; the installed one by default

    Returns:
        dict: ``{"generation_info": {...}}``
    """
    return {
        "generation_info": {
            "command": command,
            "config_file": config_file,
            "seed": seed,
            "start_time": datetime.datetime.now().isoformat(),
            "version": __version__ if version is None else version,
        }
    }


def inject_metadata_into_json(
    data: Dict[str, Any], metadata: Dict[str, Any]
) -> Dict[str, Any]:
    """Return a shallow copy of ``data`` with ``metadata`` under ``_metadata``."""
    return {**data, METADATA_KEY: metadata}


def extract_metadata_from_json(data: Dict[str, Any]) -> Dict[str, Any]:
    """The ``_metadata`` block of ``data``, or ``{}``."""
    return data.get(METADATA_KEY, {})
