"""
JSON and JSON-lines file helpers.
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, Union

from core.logging_config import get_logger

logger = get_logger(__name__)


def read_jsonl(path: Union[str, Path]) -> Iterator[Dict[str, Any]]:
    """
    Read a JSON-lines file, skipping blank lines.

    Args:
        path: File path

    Yields:
        One object per line

    Raises:
        ValueError: If a line is not valid JSON (message carries file and line)
    """
    with open(path, "r", encoding="utf-8") as reader:
        for number, line in enumerate(reader, start=1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{number}: invalid JSON: {e}") from e


def append_jsonl(path: Union[str, Path], records: Iterable[Dict[str, Any]]) -> None:
    """Append records to a JSON-lines file and flush."""
    with open(path, "a", encoding="utf-8") as writer:
        for record in records:
            writer.write(json.dumps(record, sort_keys=True) + "\n")
        writer.flush()


def write_json(path: Union[str, Path], data: Any) -> Path:
    """Write pretty-printed JSON, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
