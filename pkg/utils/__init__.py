"""
Utility helpers.
"""
from .jsonl import append_jsonl, read_jsonl, write_json
from .seeding import configure_threads, seed_everything

__all__ = ["append_jsonl", "read_jsonl", "write_json", "configure_threads", "seed_everything"]
