"""
Logging setup
=============
setup_logging() runs once in main.py before any command. Modules log through
logging.getLogger(__name__) and inherit the root configuration; messages use
the `Event | key=value` shape so run logs grep cleanly.

DEBUG=true in the environment (or `.env`) switches to per-step debug output.
"""

import logging
import os
import sys

LOG_FORMAT = "%(asctime)s %(levelname)-8s %(module)s %(message)s"
DATE_FORMAT = "%Y-%m-%dT%H:%M:%S"


def _debug_from_env() -> bool:
    return os.environ.get("DEBUG", "").strip().lower() == "true"


def setup_logging(debug: bool | None = None) -> None:
    """Point the root logger at stdout; repeated calls replace the handler."""
    level = logging.DEBUG if (_debug_from_env() if debug is None else debug) else logging.INFO

    handler = logging.StreamHandler(sys.stdout)
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT))

    root = logging.getLogger()
    root.setLevel(level)
    root.handlers.clear()
    root.addHandler(handler)

    logging.getLogger(__name__).debug("Logging ready | level=%s", logging.getLevelName(level))
