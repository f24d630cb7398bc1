"""
Text processing: WordPiece tokenization and document segmentation.
"""
from .segmenter import Document, IndexedToken, SegmentCaps, assign_indices, read_corpus, segment_document
from .tokenizer import SubToken, Vocab, load_vocab, tokenize, tokenize_with_offsets

__all__ = [
    "Document",
    "IndexedToken",
    "SegmentCaps",
    "assign_indices",
    "read_corpus",
    "segment_document",
    "SubToken",
    "Vocab",
    "load_vocab",
    "tokenize",
    "tokenize_with_offsets",
]
