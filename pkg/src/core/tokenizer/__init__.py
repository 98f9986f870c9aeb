"""BPE wordpiece tokenizer."""

from .bpe import (
    BOS_ID,
    EOS_ID,
    PAD_ID,
    SPECIAL_TOKENS,
    UNK_ID,
    WORD_MARKER,
    BpeTokenizer,
    Vocabulary,
    train_bpe,
)

__all__ = [
    "BpeTokenizer",
    "Vocabulary",
    "train_bpe",
    "PAD_ID",
    "BOS_ID",
    "EOS_ID",
    "UNK_ID",
    "SPECIAL_TOKENS",
    "WORD_MARKER",
]
