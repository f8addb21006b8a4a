import json
import logging
import logging.config
import os
from typing import Optional


def configure_logging(config_path: Optional[str] = None, level: Optional[str] = None) -> None:
    """
    Configure logging from a dictConfig JSON file.

    Falls back to ``logging.basicConfig`` when the file does not exist.

    :param config_path: path of the JSON configuration.
    :param level: optional root level override such as ``"DEBUG"``.
    """
    if config_path and os.path.exists(config_path):
        with open(config_path, "r", encoding="utf-8") as config_file:
            config = json.load(config_file)
        if level:
            config.setdefault("root", {})["level"] = level.upper()
            for name, logger_config in config.get("loggers", {}).items():
                if name.startswith("repgraph"):
                    logger_config["level"] = level.upper()
        logging.config.dictConfig(config)
    else:
        logging.basicConfig(level=(level or "INFO").upper())
