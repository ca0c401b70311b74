import logging
import os

LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def setup_logging(verbosity: int = 0) -> None:
    """
    Configure the root logger once for the command line.

    The default level comes from LOG_LEVEL (WARNING when unset); each -v on
    the command line lowers it one step.
    """
    level_name = os.getenv("LOG_LEVEL", "WARNING").upper()
    level = logging.getLevelName(level_name)
    if not isinstance(level, int):
        level = logging.WARNING
    level = max(logging.DEBUG, level - 10 * verbosity)
    logging.basicConfig(level=level, format=LOG_FORMAT)


def thread_limit() -> int:
    """Worker cap from FAIRTREE_THREADS; 1 when unset or invalid."""
    raw = os.getenv("FAIRTREE_THREADS", "")
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(1, value)
