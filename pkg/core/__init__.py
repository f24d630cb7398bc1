"""
Core application components.
"""
from .logging_config import get_logger, get_training_logger, setup_logging

__all__ = ["setup_logging", "get_logger", "get_training_logger"]
