"""
Configuration: process settings from the environment. Per-run configuration
lives in config.run_config.
"""
from .settings import Settings, get_settings

__all__ = ["Settings", "get_settings"]
