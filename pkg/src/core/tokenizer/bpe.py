# src/core/tokenizer/bpe.py
"""Character-level byte-pair-encoding wordpiece tokenizer.

Every word is split into its characters followed by a word-boundary marker
symbol, so pieces ending in the marker close a word. Merges are learned by
repeatedly joining the most frequent adjacent pair, ties broken by the
lexicographically smallest (left, right) pair.
"""

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

from ...storage.file_io import atomic_write_text
from ...utils.errors import StorageError, TokenIndexError, TokenizerError, TrainingError
from ...utils.logging import logger

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
UNK_ID = 3
SPECIAL_TOKENS = ("<pad>", "<s>", "</s>", "<unk>")
NUM_SPECIAL = len(SPECIAL_TOKENS)
WORD_MARKER = "\u2581"

FORMAT_HEADER = "desk-trocr-bpe"
FORMAT_VERSION = "v1"

Pair = Tuple[str, str]


@dataclass
class Vocabulary:
    """Dense id <-> piece bijection with the four specials at ids 0-3."""
    id_to_piece: List[str]
    piece_to_id: Dict[str, int] = field(init=False)

    def __post_init__(self):
        if tuple(self.id_to_piece[:4]) != SPECIAL_TOKENS:
            raise TokenizerError("vocabulary must start with the special tokens")
        self.piece_to_id = {piece: i for i, piece in enumerate(self.id_to_piece)}
        if len(self.piece_to_id) != len(self.id_to_piece):
            raise TokenizerError("vocabulary contains duplicate pieces")

    def __len__(self) -> int:
        return len(self.id_to_piece)

    def __contains__(self, piece: str) -> bool:
        return piece in self.piece_to_id


def _split_words(text: str) -> List[str]:
    return text.split(" ")


def _word_symbols(word: str) -> Tuple[str, ...]:
    # a literal marker in the text becomes "", which no piece matches, so it encodes as UNK
    return tuple("" if char == WORD_MARKER else char for char in word) + (WORD_MARKER,)


def _merge_pair(symbols: Tuple[str, ...], pair: Pair) -> Tuple[str, ...]:
    """Replace non-overlapping occurrences of pair, scanning left to right."""
    left, right = pair
    merged: List[str] = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and symbols[i] == left and symbols[i + 1] == right:
            merged.append(left + right)
            i += 2
        else:
            merged.append(symbols[i])
            i += 1
    return tuple(merged)


def train_bpe(corpus: Iterable[str], target_vocab: int) -> Tuple[Vocabulary, List[Pair]]:
    """
    Learn a vocabulary and merge table from a corpus.

    Args:
        corpus: Training strings; words are separated by single spaces
        target_vocab: Upper bound on the vocabulary size including specials

    Returns:
        Tuple of (Vocabulary, ordered merge list)
    """
    lines = [line for line in corpus if line]
    if not lines:
        raise TrainingError("cannot train a tokenizer on an empty corpus")

    word_counts: Counter = Counter()
    for line in lines:
        for word in _split_words(line):
            word_counts[_word_symbols(word.replace(WORD_MARKER, ""))] += 1

    alphabet = sorted({symbol for word in word_counts for symbol in word})
    minimum = len(alphabet) + len(SPECIAL_TOKENS)
    if target_vocab < minimum:
        raise TokenizerError(
            f"target vocabulary {target_vocab} is smaller than alphabet plus specials ({minimum})",
            target_vocab=target_vocab, minimum=minimum,
        )

    pieces = list(SPECIAL_TOKENS) + alphabet
    known = set(pieces)
    specials = set(SPECIAL_TOKENS)
    merges: List[Pair] = []
    words = dict(word_counts)

    while len(pieces) < target_vocab:
        pair_counts: Counter = Counter()
        for symbols, count in words.items():
            for pair in zip(symbols, symbols[1:]):
                pair_counts[pair] += count
        candidates = [(pair, c) for pair, c in pair_counts.items() if pair[0] + pair[1] not in specials]
        if not candidates:
            break
        best_count = max(c for _, c in candidates)
        best = min(pair for pair, c in candidates if c == best_count)
        merges.append(best)
        product = best[0] + best[1]
        if product not in known:
            known.add(product)
            pieces.append(product)
        words = {_merge_pair(symbols, best): count for symbols, count in words.items()}

    logger.info(f"Trained BPE: {len(pieces)} pieces, {len(merges)} merges from {len(lines)} lines")
    return Vocabulary(pieces), merges


def _escape(piece: str) -> str:
    return (piece.replace("\\", "\\\\").replace("\t", "\\t")
            .replace("\n", "\\n").replace("\r", "\\r"))


def _unescape(text: str) -> str:
    out: List[str] = []
    i = 0
    mapping = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}
    while i < len(text):
        char = text[i]
        if char == "\\" and i + 1 < len(text) and text[i + 1] in mapping:
            out.append(mapping[text[i + 1]])
            i += 2
        else:
            out.append(char)
            i += 1
    return "".join(out)


class BpeTokenizer:
    """Trained tokenizer; immutable and safe to share across threads."""

    def __init__(self, vocabulary: Vocabulary, merges: Sequence[Pair]):
        self.vocabulary = vocabulary
        self.merges: List[Pair] = [tuple(m) for m in merges]
        for left, right in self.merges:
            if left + right not in vocabulary:
                raise TokenizerError(f"merge product {left + right!r} missing from vocabulary")
        self._ranks: Dict[Pair, int] = {}
        for rank, pair in enumerate(self.merges):
            self._ranks.setdefault(pair, rank)
        self._encode_word = lru_cache(maxsize=65536)(self._encode_word_uncached)

    @classmethod
    def train(cls, corpus: Iterable[str], target_vocab: int = 512) -> "BpeTokenizer":
        vocabulary, merges = train_bpe(corpus, target_vocab)
        return cls(vocabulary, merges)

    @property
    def vocab_size(self) -> int:
        return len(self.vocabulary)

    @property
    def alphabet(self) -> List[str]:
        """Single-character pieces, the marker included."""
        return [p for p in self.vocabulary.id_to_piece[len(SPECIAL_TOKENS):] if len(p) == 1]

    def _encode_word_uncached(self, word: str) -> Tuple[int, ...]:
        symbols = _word_symbols(word)
        while len(symbols) > 1:
            ranked = [
                (self._ranks[pair], pair)
                for pair in zip(symbols, symbols[1:])
                if pair in self._ranks
            ]
            if not ranked:
                break
            symbols = _merge_pair(symbols, min(ranked)[1])
        lookup = self.vocabulary.piece_to_id
        return tuple(lookup.get(symbol, UNK_ID) for symbol in symbols)

    def encode(self, text: str) -> List[int]:
        """Text to ids; no BOS/EOS. Characters outside the alphabet, and literal markers, map to UNK."""
        if text == "":
            return []
        ids: List[int] = []
        for word in _split_words(text):
            ids.extend(self._encode_word(word))
        return ids

    def decode(self, ids: Iterable[int]) -> str:
        """Ids to text with specials stripped and markers turned into spaces."""
        pieces = self.vocabulary.id_to_piece
        size = len(pieces)
        parts: List[str] = []
        for token in ids:
            token = int(token)
            if token < 0 or token >= size:
                raise TokenIndexError(f"token id {token} out of range [0, {size})", token_id=token)
            if token < len(SPECIAL_TOKENS):
                continue
            parts.append(pieces[token])
        text = "".join(parts).replace(WORD_MARKER, " ")
        return text[:-1] if text.endswith(" ") else text

    def pieces(self, ids: Iterable[int]) -> List[str]:
        return [self.vocabulary.id_to_piece[int(i)] for i in ids]

    # --- serialization ---------------------------------------------------
    def to_text(self) -> str:
        lines = [f"{FORMAT_HEADER} {FORMAT_VERSION} {self.vocab_size}"]
        lines.extend(_escape(piece) for piece in self.vocabulary.id_to_piece)
        lines.extend(f"{_escape(left)}\t{_escape(right)}" for left, right in self.merges)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "BpeTokenizer":
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        header = lines[0].split(" ") if lines else []
        if len(header) != 3 or header[0] != FORMAT_HEADER:
            raise TokenizerError("not a tokenizer file: bad header line")
        if header[1] != FORMAT_VERSION:
            raise TokenizerError(f"unsupported tokenizer format version {header[1]!r}")
        try:
            size = int(header[2])
        except ValueError as e:
            raise TokenizerError(f"bad vocabulary size in header: {header[2]!r}") from e
        if len(lines) < 1 + size:
            raise TokenizerError(f"tokenizer file lists {len(lines) - 1} pieces, header says {size}")
        pieces = [_unescape(line) for line in lines[1:1 + size]]
        merges: List[Pair] = []
        for line in lines[1 + size:]:
            parts = line.split("\t")
            if len(parts) != 2:
                raise TokenizerError(f"malformed merge line: {line!r}")
            merges.append((_unescape(parts[0]), _unescape(parts[1])))
        return cls(Vocabulary(pieces), merges)

    def sha256(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def save(self, path: Union[str, Path]) -> Path:
        path = atomic_write_text(path, self.to_text())
        logger.info(f"Saved tokenizer ({self.vocab_size} pieces) to {path}")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "BpeTokenizer":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise StorageError(f"cannot read tokenizer {path}: {e}", path=str(path)) from e
        return cls.from_text(text)
