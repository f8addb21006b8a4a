"""
Environment backed defaults.

Values are read from the process environment, optionally populated from a ``.env``
file in the project root, and may be overridden on the command line.
"""

import logging
import os
from typing import Any
from typing import Dict
from typing import Optional

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load_env_variables(root_dir: Optional[str] = None) -> bool:
    """
    Load a ``.env`` file from the project root if one exists.

    :param root_dir: directory holding the ``.env`` file; defaults to the project root.
    :return: True when a file was loaded.
    """
    env_path = os.path.join(root_dir or PROJECT_ROOT, ".env")
    if os.path.exists(env_path):
        load_dotenv(env_path)
        logger.debug("Loaded environment variables from %s", env_path)
        return True
    return False


def default_settings() -> Dict[str, Any]:
    """Resolved defaults for the command line, environment first."""
    return {
        "threads": int(os.getenv("REPGRAPH_THREADS", str(os.cpu_count() or 1))),
        "out_dir": os.getenv("REPGRAPH_OUT_DIR", "out"),
        "log_config": os.getenv("REPGRAPH_LOG_CONFIG", os.path.join(PROJECT_ROOT, "deploy", "logging.json")),
        "log_level": os.getenv("REPGRAPH_LOG_LEVEL", ""),
    }
