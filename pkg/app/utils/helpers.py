"""
Utility helper functions for writing run outputs.
These functions are imported by the command-line front end.
"""

import json
import logging
import os
import subprocess
from importlib import metadata

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"
PACKAGE_NAME = "mjds-certify"
FALLBACK_VERSION = "0.1.0"


def _jsonable(value):
    """json.dump default hook for numpy scalars and arrays"""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def write_csv(frame: pd.DataFrame, path):
    """
    Write a table with round-trippable doubles

    Args:
        frame: The table
        path: Destination file; parent directories are created

    Returns:
        The path written
    """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def write_json(payload: dict, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w') as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=_jsonable)
        f.write("\n")
    logger.debug(f"Wrote {path}")
    return path


def version_string():
    """
    `git describe --tags --always --dirty` of the source checkout, falling
    back to the installed package version
    """
    source_dir = os.path.dirname(os.path.abspath(__file__))
    try:
        result = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=source_dir, capture_output=True, text=True, timeout=5,
        )
        if result.returncode == 0 and result.stdout.strip():
            return result.stdout.strip()
    except (OSError, subprocess.SubprocessError) as e:
        logger.debug(f"git describe unavailable: {e}")
    try:
        return metadata.version(PACKAGE_NAME)
    except metadata.PackageNotFoundError:
        return FALLBACK_VERSION
