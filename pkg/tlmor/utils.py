import os

from simple_logger.logger import get_logger

from tlmor.constants import TLMOR_LOG_FILE_ENV, TLMOR_LOG_LEVEL_ENV, TLMOR_THREADS_ENV


def get_tlmor_logger(name):
    """
    Module logger honoring TLMOR_LOG_LEVEL and TLMOR_LOG_FILE.

    Args:
        name (str): Logger name, usually __name__.

    Returns:
        logging.Logger: Configured logger.
    """
    return get_logger(
        name=name,
        level=os.environ.get(TLMOR_LOG_LEVEL_ENV, "INFO"),
        filename=os.environ.get(TLMOR_LOG_FILE_ENV, ""),
    )


def get_thread_cap(default=None):
    """
    Concurrency cap for method runs, read from TLMOR_THREADS.

    Args:
        default (int): Value used when the env var is unset, None means one worker per CPU.

    Returns:
        int: Number of workers, at least 1.
    """
    value = os.environ.get(TLMOR_THREADS_ENV)
    if not value:
        return max(1, default or os.cpu_count() or 1)

    try:
        return max(1, int(value))
    except ValueError:
        return 1
