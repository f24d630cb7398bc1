"""
Example building, example files and task data.
"""
from .builder import Example, ExampleKind, build_pair, build_single, build_span, pack_pretraining
from .records import read_examples, read_records, write_examples

__all__ = [
    "Example",
    "ExampleKind",
    "build_pair",
    "build_single",
    "build_span",
    "pack_pretraining",
    "read_examples",
    "read_records",
    "write_examples",
]
