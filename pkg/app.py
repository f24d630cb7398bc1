"""
SegaLM - Main Application
"""

import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from config.settings import get_settings
from core.cli import cli
from core.logging_config import setup_logging
from utils.seeding import configure_threads


def main():
    """Main application entry point."""
    settings = get_settings()
    setup_logging()
    configure_threads(settings.SEGALM_THREADS, deterministic=False)
    cli(prog_name="segalm")


if __name__ == "__main__":
    main()
