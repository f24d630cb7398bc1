"""
Seeding and deterministic-mode helpers.
"""

import random

import numpy as np
import torch

from core.logging_config import get_logger

logger = get_logger(__name__)


def seed_everything(seed: int) -> None:
    """
    Seed Python, numpy and torch generators.

    Args:
        seed: Seed value
    """
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)


def configure_threads(threads: int, deterministic: bool = False) -> int:
    """
    Apply the thread cap and, when requested, torch's deterministic algorithms.

    Args:
        threads: Worker cap (SEGALM_THREADS)
        deterministic: Force single-threaded, deterministic kernels

    Returns:
        Number of intra-op threads in use
    """
    if deterministic:
        torch.use_deterministic_algorithms(True)
        threads = 1
    torch.set_num_threads(max(1, threads))
    logger.debug(f"torch threads: {torch.get_num_threads()} (deterministic={deterministic})")
    return torch.get_num_threads()
