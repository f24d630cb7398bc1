"""
Run directories: every command that produces artifacts writes them under one
directory holding the config snapshot and the logs.
"""
from pathlib import Path
from typing import Union

from config.run_config import RunConfig
from core.logging_config import get_logger, setup_logging

logger = get_logger(__name__)

LOGS_DIR = "logs"


def prepare_run_dir(config: RunConfig, out_dir: Union[str, Path, None] = None) -> Path:
    """
    Create the run directory, write config.json and route logs into it.

    Args:
        config: Validated run configuration
        out_dir: Directory; defaults to config.out_dir

    Returns:
        The run directory
    """
    run_dir = Path(out_dir or config.out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    setup_logging(run_dir / LOGS_DIR)
    snapshot = config.write_snapshot(run_dir)
    logger.info(f"📁 Run directory {run_dir} (config snapshot {snapshot.name})")
    return run_dir
