# app/utils.py

import logging
import os
from dotenv import load_dotenv

load_dotenv()

DEFAULT_EXPLORATION_CAP = 1_000_000
DEFAULT_SUPPORT_CAP = 16
DEFAULT_GAME_NODE_CAP = 10_000
DEFAULT_GRID_SIDE = 6


def get_setting(name, default, cast=str):
    """
    Read a setting from the environment (or .env), falling back to default.
    Malformed values fall back to the default as well.
    """
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(raw.strip())
    except ValueError:
        logging.getLogger(__name__).warning(f"Ignoring malformed {name}={raw!r}, using {default}")
        return default


def get_exploration_cap():
    return get_setting("BISIM_EXPLORATION_CAP", DEFAULT_EXPLORATION_CAP, int)


def get_support_cap():
    return get_setting("BISIM_SUPPORT_CAP", DEFAULT_SUPPORT_CAP, int)


def get_game_node_cap():
    return get_setting("BISIM_GAME_NODE_CAP", DEFAULT_GAME_NODE_CAP, int)


def get_grid_side():
    return get_setting("BISIM_GRID_SIDE", DEFAULT_GRID_SIDE, int)


def configure_logging(level=None):
    """
    Configure root logging once for command-line use.
    Reports go to stdout, so log records are kept on stderr.
    """
    level = level or get_setting("BISIM_LOG_LEVEL", "INFO")
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
