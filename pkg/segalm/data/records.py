"""
Fixed-width binary example files.

Layout: magic b"SEGA", u16 little-endian version, one JSON header line
(max_len, vocab_hash, count), then `count` fixed-width records. Ids and labels
are 32-bit little-endian, indices 16-bit, masks and type ids 8-bit.
"""
import json
import os
import struct
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from core.logging_config import get_logger
from segalm.data.builder import Example, ExampleKind
from segalm.errors import CorruptRecord, VocabMismatch

logger = get_logger(__name__)

MAGIC = b"SEGA"
VERSION = 1
_PREFIX = struct.Struct("<4sH")


def record_dtype(max_len: int) -> np.dtype:
    """Packed record layout for a given example capacity."""
    return np.dtype(
        [
            ("kind", "u1"),
            ("class_label", "<i4"),
            ("score", "<f8"),
            ("start", "<i4"),
            ("end", "<i4"),
            ("ids", "<i4", (max_len,)),
            ("p", "<u2", (max_len,)),
            ("s", "<u2", (max_len,)),
            ("t", "<u2", (max_len,)),
            ("type_ids", "u1", (max_len,)),
            ("attn_mask", "u1", (max_len,)),
            ("mlm_labels", "<i4", (max_len,)),
        ]
    )


def to_records(examples: List[Example], max_len: int) -> np.ndarray:
    """Pack examples into a structured array."""
    records = np.zeros(len(examples), dtype=record_dtype(max_len))
    for i, example in enumerate(examples):
        if example.max_len != max_len:
            raise ValueError(f"Example {i} has max_len {example.max_len}, file uses {max_len}")
        records[i]["kind"] = int(example.kind)
        records[i]["class_label"] = example.class_label
        records[i]["score"] = example.score
        records[i]["start"] = example.start
        records[i]["end"] = example.end
        for name in ("ids", "p", "s", "t", "type_ids", "attn_mask", "mlm_labels"):
            records[i][name] = getattr(example, name)
    return records


def from_record(record: np.void) -> Example:
    """Unpack one structured record into an Example (native-endian arrays)."""
    return Example(
        ids=np.asarray(record["ids"], dtype=np.int32),
        p=np.asarray(record["p"], dtype=np.uint16),
        s=np.asarray(record["s"], dtype=np.uint16),
        t=np.asarray(record["t"], dtype=np.uint16),
        type_ids=np.asarray(record["type_ids"], dtype=np.uint8),
        attn_mask=np.asarray(record["attn_mask"], dtype=np.uint8),
        kind=ExampleKind(int(record["kind"])),
        mlm_labels=np.asarray(record["mlm_labels"], dtype=np.int32),
        class_label=int(record["class_label"]),
        score=float(record["score"]),
        start=int(record["start"]),
        end=int(record["end"]),
    )


def write_examples(
    examples: Iterable[Example],
    path: Union[str, Path],
    vocab_hash: str,
    max_len: Optional[int] = None,
    metadata: Optional[Dict[str, Any]] = None,
) -> int:
    """
    Write examples to an example file.

    The file is written to a temporary sibling and renamed into place, so
    readers never see a partial file.

    Args:
        examples: Examples sharing one max_len
        path: Destination file
        vocab_hash: Fingerprint of the vocab the examples were built with
        max_len: Capacity; inferred from the first example when omitted
        metadata: Extra JSON-serializable header fields

    Returns:
        Number of records written
    """
    examples = list(examples)
    if max_len is None:
        if not examples:
            raise ValueError("max_len is required when writing an empty example file")
        max_len = examples[0].max_len
    records = to_records(examples, max_len)
    header = {"max_len": max_len, "vocab_hash": vocab_hash, "count": len(examples)}
    if metadata:
        header["metadata"] = metadata

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(path.name + ".tmp")
    with open(tmp_path, "wb") as writer:
        writer.write(_PREFIX.pack(MAGIC, VERSION))
        writer.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        writer.write(records.tobytes())
    os.replace(tmp_path, path)
    logger.info(f"💾 Wrote {len(examples)} examples to {path}")
    return len(examples)


def read_header(path: Union[str, Path]) -> Tuple[Dict[str, Any], int]:
    """
    Read and validate the file header.

    Returns:
        (header dict, byte offset of the first record)

    Raises:
        CorruptRecord: If the magic, version or header line is invalid
    """
    with open(path, "rb") as reader:
        prefix = reader.read(_PREFIX.size)
        if len(prefix) < _PREFIX.size:
            raise CorruptRecord(0, "file shorter than the magic prefix")
        magic, version = _PREFIX.unpack(prefix)
        if magic != MAGIC:
            raise CorruptRecord(0, f"bad magic {magic!r}")
        if version != VERSION:
            raise CorruptRecord(4, f"unsupported version {version}")
        line = reader.readline()
        if not line.endswith(b"\n"):
            raise CorruptRecord(_PREFIX.size, "unterminated header line")
        try:
            header = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CorruptRecord(_PREFIX.size, f"unreadable header: {e}") from e
    for key in ("max_len", "vocab_hash", "count"):
        if key not in header:
            raise CorruptRecord(_PREFIX.size, f"header lacks {key}")
    return header, _PREFIX.size + len(line)


def read_records(
    path: Union[str, Path], vocab_hash: Optional[str] = None
) -> Tuple[Dict[str, Any], np.ndarray]:
    """
    Read the raw structured records of an example file.

    Args:
        path: Example file
        vocab_hash: Expected vocab fingerprint; skipped when None

    Returns:
        (header, structured array of records)

    Raises:
        VocabMismatch: If the header hash differs from vocab_hash
        CorruptRecord: If the file is truncated or holds an invalid record
    """
    header, offset = read_header(path)
    if vocab_hash is not None and header["vocab_hash"] != vocab_hash:
        raise VocabMismatch(vocab_hash, header["vocab_hash"])

    dtype = record_dtype(int(header["max_len"]))
    count = int(header["count"])
    payload = Path(path).read_bytes()[offset:]
    expected = count * dtype.itemsize
    if len(payload) < expected:
        whole = len(payload) // dtype.itemsize
        raise CorruptRecord(offset + whole * dtype.itemsize, f"expected {count} records, found {whole} complete")
    if len(payload) > expected:
        raise CorruptRecord(offset + expected, "trailing bytes after the last record")

    records = np.frombuffer(payload, dtype=dtype, count=count)
    bad = np.nonzero(records["kind"] > max(ExampleKind))[0]
    if len(bad):
        raise CorruptRecord(offset + int(bad[0]) * dtype.itemsize, f"invalid kind {records['kind'][bad[0]]}")
    return header, records


def read_examples(path: Union[str, Path], vocab_hash: Optional[str] = None) -> List[Example]:
    """
    Read every example of an example file.

    Args:
        path: Example file
        vocab_hash: Expected vocab fingerprint; skipped when None

    Returns:
        Examples in file order
    """
    _, records = read_records(path, vocab_hash)
    return [from_record(record) for record in records]
