import logging
import os
import time
from contextlib import contextmanager
from typing import Dict, Iterator, Optional

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def get_logger(logger_name: str, level: Optional[str] = None):
    """
    Configures and returns a logger with the given name.
    If the logger already has handlers, it's returned as is.
    Otherwise a stream handler is added at `level`, falling back to LOG_LEVEL (default INFO).
    """
    logger = logging.getLogger(logger_name)
    if not logger.handlers:
        stream_handler = logging.StreamHandler()
        stream_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(stream_handler)
        logger.setLevel((level or os.getenv("LOG_LEVEL", "INFO")).upper())
    return logger


@contextmanager
def stage_timer(logger: logging.Logger, stage: str, timings: Optional[Dict[str, float]] = None) -> Iterator[None]:
    """
    Time one solve stage (mesh, assembly, factorization, errors) and log it at DEBUG.

    The elapsed seconds are stored under `stage` in `timings` when given,
    also when the stage raises.
    """
    start = time.perf_counter()
    try:
        yield
    finally:
        elapsed = time.perf_counter() - start
        if timings is not None:
            timings[stage] = elapsed
        logger.debug(f"{stage} took {elapsed:.3f}s")
