"""
Logging configuration and setup.
"""
import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional, Union

from config.settings import get_settings

TRAINING_LOGGER = "training"


def _rotating_handler(path: Path, level: int, formatter: logging.Formatter) -> RotatingFileHandler:
    settings = get_settings()
    handler = RotatingFileHandler(
        path,
        maxBytes=settings.LOG_FILE_MAX_BYTES,
        backupCount=settings.LOG_FILE_BACKUP_COUNT,
        encoding="utf-8",
    )
    handler.setLevel(level)
    handler.setFormatter(formatter)
    return handler


def setup_logging(log_dir: Optional[Union[str, Path]] = None) -> Path:
    """
    Setup application-wide logging configuration.

    Args:
        log_dir: Directory for log files. If None, uses settings LOG_DIR.

    Returns:
        The directory log files are written to
    """
    settings = get_settings()
    log_directory = Path(log_dir or settings.LOG_DIR)

    # Create logs directory if it doesn't exist
    log_directory.mkdir(parents=True, exist_ok=True)

    # Configure root logger
    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO))

    # Clear existing handlers
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)
        handler.close()

    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.DEBUG if settings.DEBUG else logging.INFO)
    console_format = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
    console_handler.setFormatter(console_format)
    root_logger.addHandler(console_handler)

    file_format = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
    root_logger.addHandler(_rotating_handler(log_directory / "app.log", logging.DEBUG, file_format))
    root_logger.addHandler(_rotating_handler(log_directory / "errors.log", logging.ERROR, file_format))

    # Training loops log step summaries to their own file as well as the root handlers
    training_logger = logging.getLogger(TRAINING_LOGGER)
    for handler in training_logger.handlers[:]:
        training_logger.removeHandler(handler)
        handler.close()
    training_logger.addHandler(
        _rotating_handler(log_directory / "training.log", logging.DEBUG, file_format)
    )
    training_logger.setLevel(logging.DEBUG)

    logging.info(f"✅ Logging configured. Logs directory: {log_directory.absolute()}")
    return log_directory


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger instance for a specific module.

    Args:
        name: Logger name (usually __name__)

    Returns:
        Logger instance
    """
    return logging.getLogger(name)


def get_training_logger() -> logging.Logger:
    """Logger whose records also land in training.log."""
    return logging.getLogger(TRAINING_LOGGER)
