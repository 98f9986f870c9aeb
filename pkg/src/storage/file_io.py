# src/storage/file_io.py
"""Atomic file writes shared by every artifact writer."""

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Union

from ..utils.errors import StorageError
from ..utils.logging import logger

PathLike = Union[str, Path]


def atomic_write_bytes(file_path: PathLike, data: bytes) -> Path:
    """Write data to a temp file in the target directory, then replace the target."""
    file_path = Path(file_path)
    temp_path = None
    try:
        file_path.parent.mkdir(parents=True, exist_ok=True)
        temp_fd, temp_path = tempfile.mkstemp(
            dir=file_path.parent,
            prefix=f"{file_path.stem}_",
            suffix=".tmp"
        )
        with os.fdopen(temp_fd, 'wb') as f:
            f.write(data)
        Path(temp_path).replace(file_path)
        logger.debug(f"Atomically wrote {len(data)} bytes to {file_path}")
        return file_path
    except OSError as e:
        logger.error(f"Failed to write {file_path}: {e}")
        if temp_path is not None and Path(temp_path).exists():
            Path(temp_path).unlink()
        raise StorageError(f"cannot write {file_path}: {e.strerror or e}", path=str(file_path)) from e


def atomic_write_text(file_path: PathLike, text: str) -> Path:
    return atomic_write_bytes(file_path, text.encode("utf-8"))


def dumps_json(data: Any) -> str:
    """Pretty JSON with sorted keys and a trailing newline."""
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(file_path: PathLike, data: Any) -> Path:
    return atomic_write_text(file_path, dumps_json(data))


def read_text(file_path: PathLike) -> str:
    file_path = Path(file_path)
    try:
        return file_path.read_text(encoding="utf-8")
    except OSError as e:
        raise StorageError(f"cannot read {file_path}: {e.strerror or e}", path=str(file_path)) from e
