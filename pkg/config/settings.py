"""
Process-level settings loaded from the environment.
"""
import os
from typing import Optional
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Settings:
    """Application settings loaded from environment variables."""

    def __init__(self) -> None:
        # Worker cap for data loading and torch intra-op threads
        self.SEGALM_THREADS: int = int(os.getenv("SEGALM_THREADS", "1"))

        # Logging Configuration
        self.LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
        self.LOG_DIR: str = os.getenv("LOG_DIR", "logs")
        self.LOG_FILE_MAX_BYTES: int = int(os.getenv("LOG_FILE_MAX_BYTES", "10485760"))  # 10MB
        self.LOG_FILE_BACKUP_COUNT: int = int(os.getenv("LOG_FILE_BACKUP_COUNT", "5"))

        # Application Configuration
        self.DEBUG: bool = os.getenv("DEBUG", "False").lower() == "true"

    def validate(self) -> None:
        """
        Validate that all settings hold usable values.

        Raises:
            ValueError: If any setting is out of range
        """
        problems = []
        if self.SEGALM_THREADS < 1:
            problems.append(f"SEGALM_THREADS must be >= 1, got {self.SEGALM_THREADS}")
        if self.LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            problems.append(f"LOG_LEVEL is not a logging level: {self.LOG_LEVEL}")
        if self.LOG_FILE_MAX_BYTES <= 0:
            problems.append("LOG_FILE_MAX_BYTES must be positive")
        if self.LOG_FILE_BACKUP_COUNT < 0:
            problems.append("LOG_FILE_BACKUP_COUNT must be >= 0")

        if problems:
            raise ValueError(f"Invalid environment settings: {'; '.join(problems)}")


# Global settings instance
_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """
    Get or create global settings instance.

    Returns:
        Settings instance
    """
    global _settings
    if _settings is None:
        _settings = Settings()
        _settings.validate()
    return _settings


def reset_settings() -> None:
    """Drop the cached instance so the next call re-reads the environment."""
    global _settings
    _settings = None
