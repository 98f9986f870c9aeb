# src/storage/dataset_storage.py
"""Textline image files (PGM/PPM), TSV manifests and prediction files."""

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..data.images import ImageTensor
from ..utils.errors import InputError, StorageError
from ..utils.logging import logger
from .file_io import PathLike, atomic_write_bytes, atomic_write_text, read_text


@dataclass(frozen=True)
class ManifestEntry:
    """One textline: image path relative to the manifest, and its transcript."""
    path: str
    text: str


def encode_image(img: ImageTensor) -> bytes:
    """Binary PGM (P5) for grayscale, binary PPM (P6) for RGB, 8-bit."""
    buffer = io.BytesIO()
    Image.fromarray(img.to_uint8()).save(buffer, format="PPM")
    return buffer.getvalue()


def write_image(path: PathLike, img: ImageTensor) -> Path:
    return atomic_write_bytes(path, encode_image(img))


def read_image(path: PathLike) -> ImageTensor:
    """Load any Pillow-readable image; palettes and alpha are flattened to L or RGB."""
    path = Path(path)
    try:
        with Image.open(path) as handle:
            mode = "L" if handle.mode in ("1", "L", "I", "I;16", "F") else "RGB"
            array = np.asarray(handle.convert(mode))
    except FileNotFoundError as e:
        raise StorageError(f"image not found: {path}", path=str(path)) from e
    except UnidentifiedImageError as e:
        raise InputError(f"unreadable image {path}", path=str(path)) from e
    except OSError as e:
        raise StorageError(f"cannot read image {path}: {e}", path=str(path)) from e
    return ImageTensor.from_uint8(array)


def _check_field(value: str, what: str) -> None:
    if "\t" in value or "\n" in value or "\r" in value:
        raise InputError(f"{what} {value!r} contains a tab or newline")


def _parse_tsv(text: str, source: Path) -> List[Tuple[str, str]]:
    rows = []
    for number, line in enumerate(text.split("\n"), start=1):
        if line.endswith("\r"):
            line = line[:-1]
        if not line:
            continue
        key, sep, value = line.partition("\t")
        if not sep:
            raise InputError(f"{source}:{number}: expected '<key>\\t<text>'", path=str(source), line=number)
        rows.append((key, value))
    return rows


def read_manifest(path: PathLike) -> List[ManifestEntry]:
    path = Path(path)
    entries = [ManifestEntry(key, value) for key, value in _parse_tsv(read_text(path), path)]
    logger.debug(f"Read {len(entries)} manifest entries from {path}")
    return entries


def write_manifest(path: PathLike, entries: Sequence[ManifestEntry]) -> Path:
    for entry in entries:
        _check_field(entry.path, "image path")
        _check_field(entry.text, "transcript")
    return atomic_write_text(path, "".join(f"{e.path}\t{e.text}\n" for e in entries))


def resolve_image_path(manifest_path: PathLike, entry: ManifestEntry) -> Path:
    return Path(manifest_path).parent / entry.path


def load_samples(manifest_path: PathLike) -> List[Tuple[ImageTensor, str, str]]:
    """(image, transcript, id) per manifest row; the id is the manifest-relative path."""
    entries = read_manifest(manifest_path)
    return [(read_image(resolve_image_path(manifest_path, e)), e.text, e.path) for e in entries]


def read_predictions(path: PathLike) -> Dict[str, str]:
    path = Path(path)
    predictions: Dict[str, str] = {}
    for key, value in _parse_tsv(read_text(path), path):
        predictions[key] = value
    return predictions


def write_predictions(path: PathLike, rows: Sequence[Tuple[str, str]]) -> Path:
    """`<id>\\t<text>` per row, in the given order."""
    for key, text in rows:
        _check_field(key, "prediction id")
        _check_field(text, "prediction")
    return atomic_write_text(path, "".join(f"{key}\t{text}\n" for key, text in rows))
