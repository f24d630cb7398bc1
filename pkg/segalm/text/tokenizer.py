"""
WordPiece tokenization: basic pre-split, lowercasing, greedy longest-match-first subwords.
"""
import hashlib
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, NamedTuple, Sequence, Tuple, Union

from core.logging_config import get_logger
from segalm.errors import DuplicateToken, EmptyVocab, MissingSpecialToken, UnknownSurface

logger = get_logger(__name__)

PAD_TOKEN = "[PAD]"
UNK_TOKEN = "[UNK]"
CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
MASK_TOKEN = "[MASK]"
SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN, MASK_TOKEN)

CONTINUATION_PREFIX = "##"
MAX_WORD_CHARS = 100


@dataclass(frozen=True)
class Vocab:
    """Immutable subword vocabulary; ids are zero-based line numbers of the vocab file."""

    entries: Tuple[str, ...]
    id_of: Dict[str, int] = field(repr=False)
    pad_id: int
    unk_id: int
    cls_id: int
    sep_id: int
    mask_id: int
    lowercase: bool = True

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def special_ids(self) -> Tuple[int, ...]:
        return (self.pad_id, self.unk_id, self.cls_id, self.sep_id, self.mask_id)

    @property
    def fingerprint(self) -> str:
        """SHA-256 of the entries, stored in example file headers."""
        digest = hashlib.sha256()
        for entry in self.entries:
            digest.update(entry.encode("utf-8"))
            digest.update(b"\n")
        return digest.hexdigest()

    @classmethod
    def from_entries(cls, entries: Sequence[str], lowercase: bool = True) -> "Vocab":
        """
        Build a vocab from an ordered list of entries.

        Args:
            entries: Subword strings; position is the id
            lowercase: Whether text is lowercased and accent-stripped before lookup

        Returns:
            Vocab instance

        Raises:
            EmptyVocab: If entries is empty
            DuplicateToken: If an entry repeats (line is the 1-based line of the repeat)
            MissingSpecialToken: If a special token is absent
        """
        if not entries:
            raise EmptyVocab("Vocab has no entries")

        id_of: Dict[str, int] = {}
        for index, entry in enumerate(entries):
            if entry in id_of:
                raise DuplicateToken(index + 1, entry)
            id_of[entry] = index

        for name in SPECIAL_TOKENS:
            if name not in id_of:
                raise MissingSpecialToken(name)

        # Pieces that greedy matching can never produce
        unreachable = [
            entry for entry in entries if entry == CONTINUATION_PREFIX or any(c.isspace() for c in entry)
        ]
        if unreachable:
            logger.debug(f"⚠️ {len(unreachable)} vocab entries can never match: {unreachable[:5]}")

        return cls(
            entries=tuple(entries),
            id_of=id_of,
            pad_id=id_of[PAD_TOKEN],
            unk_id=id_of[UNK_TOKEN],
            cls_id=id_of[CLS_TOKEN],
            sep_id=id_of[SEP_TOKEN],
            mask_id=id_of[MASK_TOKEN],
            lowercase=lowercase,
        )


class SubToken(NamedTuple):
    """One WordPiece piece."""

    id: int
    surface: str

    @property
    def is_continuation(self) -> bool:
        return self.surface.startswith(CONTINUATION_PREFIX)


class Word(NamedTuple):
    """A pre-split word with its character span in the original text and its pieces."""

    text: str
    start: int
    end: int
    pieces: List[SubToken]


def load_vocab(path: Union[str, Path], lowercase: bool = True) -> Vocab:
    """
    Load a BERT-style vocab file: UTF-8, one token per line, id = line number.

    Args:
        path: Vocab file path
        lowercase: Uncased preprocessing flag

    Returns:
        Vocab instance
    """
    with open(path, "r", encoding="utf-8") as reader:
        entries = [line.rstrip("\n").rstrip("\r") for line in reader]
    # A trailing newline at end of file does not add an entry
    while entries and entries[-1] == "":
        entries.pop()
    vocab = Vocab.from_entries(entries, lowercase=lowercase)
    logger.debug(f"Loaded vocab of {len(vocab)} entries from {path}")
    return vocab


def _is_whitespace(char: str) -> bool:
    if char in (" ", "\t", "\n", "\r"):
        return True
    return unicodedata.category(char) == "Zs"


def _is_control(char: str) -> bool:
    if char in ("\t", "\n", "\r"):
        return False
    return unicodedata.category(char).startswith("C")


def _is_punctuation(char: str) -> bool:
    cp = ord(char)
    # All non-letter/number ASCII counts as punctuation, e.g. "^", "$" and "`"
    if 33 <= cp <= 47 or 58 <= cp <= 64 or 91 <= cp <= 96 or 123 <= cp <= 126:
        return True
    return unicodedata.category(char).startswith("P")


def _is_cjk(char: str) -> bool:
    cp = ord(char)
    return (
        0x4E00 <= cp <= 0x9FFF
        or 0x3400 <= cp <= 0x4DBF
        or 0x20000 <= cp <= 0x2A6DF
        or 0x2A700 <= cp <= 0x2B81F
        or 0xF900 <= cp <= 0xFAFF
        or 0x2F800 <= cp <= 0x2FA1F
    )


def normalize_word(word: str, lowercase: bool = True) -> str:
    """Lowercase and strip combining accents, the uncased BERT convention."""
    if not lowercase:
        return word
    word = unicodedata.normalize("NFD", word.lower())
    return "".join(ch for ch in word if unicodedata.category(ch) != "Mn")


def split_words(text: str) -> List[Tuple[str, int, int]]:
    """
    Split text on whitespace, making each punctuation and CJK character its own word.

    Args:
        text: Raw text

    Returns:
        List of (word, start, end) with character offsets into text
    """
    words: List[Tuple[str, int, int]] = []
    start = -1
    for index, char in enumerate(text):
        if char == "\ufffd" or ord(char) == 0 or _is_whitespace(char) or _is_control(char):
            if start >= 0:
                words.append((text[start:index], start, index))
                start = -1
            continue
        if _is_punctuation(char) or _is_cjk(char):
            if start >= 0:
                words.append((text[start:index], start, index))
                start = -1
            words.append((char, index, index + 1))
            continue
        if start < 0:
            start = index
    if start >= 0:
        words.append((text[start:], start, len(text)))
    return words


def wordpiece(word: str, vocab: Vocab) -> List[SubToken]:
    """
    Greedy longest-match-first segmentation of one normalized word.

    Args:
        word: Normalized word
        vocab: Vocab to match against

    Returns:
        Pieces, or a single [UNK] piece when any part of the word fails to match
    """
    unk = [SubToken(vocab.unk_id, UNK_TOKEN)]
    if len(word) > MAX_WORD_CHARS:
        return unk

    pieces: List[SubToken] = []
    start = 0
    while start < len(word):
        end = len(word)
        match = None
        while start < end:
            candidate = word[start:end]
            if start > 0:
                candidate = CONTINUATION_PREFIX + candidate
            if candidate in vocab.id_of:
                match = SubToken(vocab.id_of[candidate], candidate)
                break
            end -= 1
        if match is None:
            return unk
        pieces.append(match)
        start = end
    return pieces


def tokenize_with_offsets(text: str, vocab: Vocab) -> List[Word]:
    """
    Tokenize text, keeping each word's character span in the original string.

    Args:
        text: Raw text
        vocab: Vocab to match against

    Returns:
        Words in text order; words that normalize to nothing are dropped
    """
    words: List[Word] = []
    for raw, start, end in split_words(text):
        normalized = normalize_word(raw, vocab.lowercase)
        if not normalized:
            continue
        words.append(Word(raw, start, end, wordpiece(normalized, vocab)))
    return words


def tokenize(text: str, vocab: Vocab) -> List[SubToken]:
    """
    Tokenize text into WordPiece subtokens.

    Args:
        text: Raw text
        vocab: Vocab to match against

    Returns:
        Subtokens in text order; unknown material becomes [UNK]
    """
    return [piece for word in tokenize_with_offsets(text, vocab) for piece in word.pieces]


def ids_of(tokens: Sequence[SubToken], vocab: Vocab) -> List[int]:
    """
    Look up the vocab id of every subtoken.

    Args:
        tokens: Subtokens produced by tokenize with the same vocab
        vocab: Vocab in use

    Returns:
        Ids, one per token

    Raises:
        UnknownSurface: If a token's surface is not in vocab or its id disagrees
    """
    ids = []
    for token in tokens:
        found = vocab.id_of.get(token.surface)
        if found is None or found != token.id:
            raise UnknownSurface(token.surface)
        ids.append(found)
    return ids


def surfaces_of(ids: Sequence[int], vocab: Vocab) -> List[SubToken]:
    """Inverse of ids_of."""
    return [SubToken(int(i), vocab.entries[int(i)]) for i in ids]


def detokenize(tokens: Sequence[SubToken]) -> str:
    """Join pieces back into space-separated words."""
    out: List[str] = []
    for token in tokens:
        if token.is_continuation and out:
            out[-1] += token.surface[len(CONTINUATION_PREFIX):]
        else:
            out.append(token.surface)
    return " ".join(out)
