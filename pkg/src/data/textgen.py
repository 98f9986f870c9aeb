# src/data/textgen.py
"""Synthetic textline rendering and corpus building."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..storage.dataset_storage import ManifestEntry, write_image, write_manifest
from ..storage.file_io import read_text
from ..utils.errors import ConfigError, GenerationError
from ..utils.logging import logger
from ..utils.seeding import make_rng
from ..utils.validators import find_unsupported_chars, validate_positive_int, validate_range
from .glyphs import CHARSET, GLYPH_HEIGHT, glyph_bitmap
from .images import ImageTensor

STYLES = ("printed", "sheared")
SHEARED_DEGREES = 12.0

DEFAULT_WORDLIST = (
    "the", "of", "and", "to", "in", "is", "for", "on", "with", "as",
    "total", "amount", "date", "invoice", "receipt", "paid", "cash", "change", "tax", "price",
    "item", "qty", "order", "store", "thank", "you", "please", "come", "again", "card",
    "letter", "note", "page", "line", "text", "word", "paper", "desk", "pen", "ink",
    "hello", "world", "open", "close", "read", "write", "print", "copy", "file", "name",
    "first", "last", "new", "old", "small", "large", "long", "short", "good", "best",
    "day", "week", "month", "year", "time", "hour", "today", "morning", "evening", "night",
    "north", "south", "east", "west", "city", "street", "road", "house", "office", "school",
    "red", "green", "blue", "black", "white", "light", "dark", "water", "coffee", "tea",
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
)


@dataclass(frozen=True)
class GlyphFont:
    """Bitmap font settings: pixel scale, horizontal advance in font pixels, italic shear."""
    scale: int = 1
    shear_degrees: float = 0.0
    advance: int = 6

    @classmethod
    def for_style(cls, style: str, scale: int = 1) -> "GlyphFont":
        if style not in STYLES:
            raise ConfigError(f"unknown textline style {style!r}; expected one of {STYLES}")
        return cls(scale=scale, shear_degrees=SHEARED_DEGREES if style == "sheared" else 0.0)

    @property
    def charset(self) -> str:
        return CHARSET

    @property
    def glyph_height(self) -> int:
        return GLYPH_HEIGHT * self.scale

    def shear_offset(self, row: int) -> int:
        """Right shift of a glyph row; the bottom row stays put."""
        if self.shear_degrees == 0.0:
            return 0
        return int(round((self.glyph_height - 1 - row) * math.tan(math.radians(self.shear_degrees))))

    def shear_extra(self) -> int:
        return self.shear_offset(0)


@dataclass
class TextlineSample:
    image: ImageTensor
    text: str
    id: str
    style: str = "printed"


def render(text: str, font: GlyphFont = GlyphFont(), pad: int = 2) -> ImageTensor:
    """Dark glyphs on white, left to right on one baseline, with a pad-pixel margin.

    Width is 2*pad + len(text)*advance*scale (+ the shear overhang for
    non-empty text); height is 7*scale + 2*pad.
    """
    missing = find_unsupported_chars(text, CHARSET)
    if missing:
        raise GenerationError(f"cannot render characters {missing!r}", chars=missing)
    scale = font.scale
    step = font.advance * scale
    extra = font.shear_extra() if text else 0
    ink = np.zeros((font.glyph_height, len(text) * step + extra), dtype=bool)
    block = np.ones((scale, scale), dtype=bool)
    for i, char in enumerate(text):
        bitmap = np.kron(glyph_bitmap(char), block).astype(bool)
        ink[:, i * step:i * step + bitmap.shape[1]] |= bitmap

    if extra:
        sheared = np.zeros_like(ink)
        for row in range(ink.shape[0]):
            shift = font.shear_offset(row)
            sheared[row, shift:] = ink[row, :ink.shape[1] - shift]
        ink = sheared

    pixels = np.ones((font.glyph_height + 2 * pad, ink.shape[1] + 2 * pad))
    pixels[pad:pad + ink.shape[0], pad:pad + ink.shape[1]][ink] = 0.0
    return ImageTensor(pixels)


@dataclass
class TextgenConfig:
    num_lines: int = 100
    words_per_line: Tuple[int, int] = (1, 3)
    style: str = "printed"
    scale: int = 1
    pad: int = 2

    def validate(self) -> "TextgenConfig":
        checks = [
            validate_positive_int("textgen.num_lines", self.num_lines, minimum=0),
            validate_range("textgen.words_per_line", self.words_per_line),
            validate_positive_int("textgen.scale", self.scale),
            validate_positive_int("textgen.pad", self.pad, minimum=0),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        if self.words_per_line[0] < 1:
            raise ConfigError("textgen.words_per_line must start at 1 or more")
        if self.style not in STYLES:
            raise ConfigError(f"textgen.style must be one of {STYLES}, got {self.style!r}")
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["words_per_line"] = list(self.words_per_line)
        return data


def _check_wordlist(wordlist: Sequence[str]) -> List[str]:
    words = [w for w in wordlist if w]
    if not words:
        raise GenerationError("word list is empty")
    for word in words:
        missing = find_unsupported_chars(word, CHARSET.replace(" ", ""))
        if missing:
            raise GenerationError(f"word {word!r} contains unsupported characters {missing!r}", chars=missing)
    return words


def sample_line(words: Sequence[str], rng: np.random.Generator, words_per_line: Tuple[int, int]) -> str:
    count = int(rng.integers(words_per_line[0], words_per_line[1] + 1))
    picks = rng.integers(0, len(words), size=count)
    return " ".join(words[int(i)] for i in picks)


def generate_sample(index: int, words: Sequence[str], config: TextgenConfig, seed: int) -> TextlineSample:
    """Line `index` depends only on (seed, index), never on thread scheduling."""
    rng = make_rng(seed, index)
    text = sample_line(words, rng, tuple(config.words_per_line))
    font = GlyphFont.for_style(config.style, config.scale)
    return TextlineSample(render(text, font, config.pad), text, f"{index:06d}", config.style)


def generate_samples(wordlist: Sequence[str], config: TextgenConfig, seed: int,
                     threads: int = 1) -> List[TextlineSample]:
    """Render config.num_lines samples in memory, in index order."""
    config.validate()
    words = _check_wordlist(wordlist)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(lambda i: generate_sample(i, words, config, seed), range(config.num_lines)))


def build_corpus(wordlist: Sequence[str], config: TextgenConfig, seed: int, out_dir: Path,
                 threads: int = 1, manifest_name: str = "manifest.tsv") -> Path:
    """
    Write a synthetic corpus: one PGM per line under images/ and a TSV manifest.

    Args:
        wordlist: Words sampled uniformly with replacement
        config: Line count, words per line, style and geometry
        seed: Run seed; line i is rendered from (seed, i)
        out_dir: Target directory
        threads: Render and write workers

    Returns:
        Path of the written manifest
    """
    config.validate()
    words = _check_wordlist(wordlist)
    out_dir = Path(out_dir)
    manifest_path = out_dir / manifest_name

    def produce(index: int) -> ManifestEntry:
        sample = generate_sample(index, words, config, seed)
        relative = f"images/{sample.id}.pgm"
        write_image(out_dir / relative, sample.image)
        return ManifestEntry(relative, sample.text)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        entries = list(pool.map(produce, range(config.num_lines)))
    write_manifest(manifest_path, entries)
    logger.info(f"Generated {len(entries)} {config.style} textlines in {out_dir} (seed {seed})")
    return manifest_path


def load_wordlist(path: Optional[Path]) -> List[str]:
    """Whitespace-separated words from a file, or the built-in list when path is None."""
    if path is None:
        return list(DEFAULT_WORDLIST)
    return _check_wordlist(read_text(path).split())
