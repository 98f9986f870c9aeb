# src/storage/checkpoint_storage.py
"""Single-file binary checkpoint container.

Layout, all integers little-endian:

    magic        8 bytes   b"DTOCRCKP"
    version      u32
    header_len   u32, then header_len bytes of compact sorted-key JSON
    blob_count   u32
    per blob:
      name_len   u16, then the UTF-8 dotted parameter name
      dtype      u8   (0 = float32, 1 = float64)
      ndim       u8, then ndim u32 dims
      payload    u64 byte length, then the little-endian IEEE-754 data
"""

import hashlib
import json
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..core.model.config import ModelConfig
from ..core.model.model import VisionEncoderDecoder
from ..core.tokenizer.bpe import BpeTokenizer
from ..utils.errors import (
    CheckpointShapeError,
    CheckpointVersionError,
    ConfigError,
    StorageError,
    TruncatedCheckpointError,
)
from ..utils.logging import logger
from .file_io import PathLike, atomic_write_bytes

MAGIC = b"DTOCRCKP"
FORMAT_VERSION = 1

DTYPE_TAGS = {np.dtype("<f4"): 0, np.dtype("<f8"): 1}
TAG_DTYPES = {tag: dtype for dtype, tag in DTYPE_TAGS.items()}
DTYPE_NAMES = {0: "float32", 1: "float64"}


@dataclass
class Checkpoint:
    """Model configuration, tokenizer and named parameters."""
    config: ModelConfig
    params: "OrderedDict[str, np.ndarray]"
    tokenizer_text: Optional[str] = None
    training_step: int = 0
    metadata: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: VisionEncoderDecoder, tokenizer: Optional[BpeTokenizer] = None,
                   training_step: int = 0, metadata: Optional[Dict[str, Any]] = None) -> "Checkpoint":
        params = OrderedDict((name, p.data.copy()) for name, p in model.named_parameters())
        return cls(
            config=model.config,
            params=params,
            tokenizer_text=None if tokenizer is None else tokenizer.to_text(),
            training_step=training_step,
            metadata=dict(metadata or {}),
        )

    @property
    def tokenizer_sha256(self) -> Optional[str]:
        if self.tokenizer_text is None:
            return None
        return hashlib.sha256(self.tokenizer_text.encode("utf-8")).hexdigest()

    def tokenizer(self) -> BpeTokenizer:
        if self.tokenizer_text is None:
            raise CheckpointShapeError("checkpoint carries no tokenizer")
        return BpeTokenizer.from_text(self.tokenizer_text)

    def build_model(self) -> VisionEncoderDecoder:
        model = VisionEncoderDecoder(ModelConfig.from_dict(self.config.to_dict()))
        model.load_state_dict(self.params)
        return model

    def parameter_count(self) -> int:
        return int(sum(value.size for value in self.params.values()))

    def parameter_table(self) -> List[Dict[str, Any]]:
        return [
            {"name": name, "dtype": DTYPE_NAMES[_dtype_tag(value, name)], "shape": list(value.shape)}
            for name, value in self.params.items()
        ]

    def header(self) -> Dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "model": self.config.to_dict(),
            "tokenizer": {"sha256": self.tokenizer_sha256, "text": self.tokenizer_text},
            "training_step": self.training_step,
            "metadata": self.metadata,
            "parameters": self.parameter_table(),
        }

    # --- encoding ----------------------------------------------------------
    def to_bytes(self) -> bytes:
        header = json.dumps(self.header(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        header_bytes = header.encode("utf-8")
        parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(header_bytes)), header_bytes,
                 struct.pack("<I", len(self.params))]
        for name, value in self.params.items():
            tag = _dtype_tag(value, name)
            name_bytes = name.encode("utf-8")
            payload = np.ascontiguousarray(value, dtype=TAG_DTYPES[tag]).tobytes()
            parts.append(struct.pack("<H", len(name_bytes)))
            parts.append(name_bytes)
            parts.append(struct.pack("<BB", tag, value.ndim))
            parts.append(struct.pack(f"<{value.ndim}I", *value.shape))
            parts.append(struct.pack("<Q", len(payload)))
            parts.append(payload)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes, source: str = "<bytes>") -> "Checkpoint":
        reader = _Reader(data, source)
        if reader.take(len(MAGIC), "magic") != MAGIC:
            raise CheckpointVersionError(f"{source} is not a checkpoint file (bad magic)")
        version, header_len = reader.unpack("<II", "version")
        if version != FORMAT_VERSION:
            raise CheckpointVersionError(
                f"{source} has checkpoint format version {version}, expected {FORMAT_VERSION}",
                found=version, expected=FORMAT_VERSION,
            )
        try:
            header = json.loads(reader.take(header_len, "header").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise TruncatedCheckpointError(f"{source}: checkpoint header is corrupt: {e}") from e
        _check_header(header, source)
        (count,) = reader.unpack("<I", "blob count")
        params: "OrderedDict[str, np.ndarray]" = OrderedDict()
        for _ in range(count):
            (name_len,) = reader.unpack("<H", "blob name length")
            name = reader.take(name_len, "blob name").decode("utf-8")
            tag, ndim = reader.unpack("<BB", f"{name} dtype")
            if tag not in TAG_DTYPES:
                raise CheckpointShapeError(f"{name} has unknown dtype tag {tag}", parameter=name)
            shape = reader.unpack(f"<{ndim}I", f"{name} shape")
            (payload_len,) = reader.unpack("<Q", f"{name} payload length")
            dtype = TAG_DTYPES[tag]
            expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            if payload_len != expected:
                raise TruncatedCheckpointError(
                    f"{source}: blob {name} declares {payload_len} bytes, shape {tuple(shape)} needs {expected}",
                    parameter=name,
                )
            payload = reader.take(payload_len, f"{name} payload")
            params[name] = np.frombuffer(payload, dtype=dtype).reshape(shape).copy()
        if reader.remaining:
            raise TruncatedCheckpointError(f"{source} has {reader.remaining} trailing bytes after the last blob")

        try:
            config = ModelConfig.from_dict(header["model"]).validate()
        except (ConfigError, KeyError, TypeError) as e:
            raise CheckpointShapeError(f"{source}: stored model config is invalid: {e}") from e
        checkpoint = cls(
            config=config,
            params=params,
            tokenizer_text=header["tokenizer"]["text"],
            training_step=int(header["training_step"]),
            metadata=header.get("metadata", {}),
        )
        _reconcile(header, checkpoint, source)
        return checkpoint


def _dtype_tag(value: np.ndarray, name: str) -> int:
    tag = DTYPE_TAGS.get(np.dtype(value.dtype).newbyteorder("<"))
    if tag is None:
        raise CheckpointShapeError(f"parameter {name} has unsupported dtype {value.dtype}", parameter=name)
    return tag


def _check_header(header: Any, source: str) -> None:
    """Every field read after the blobs must be present with the right type."""
    try:
        ok = (
            isinstance(header["model"], dict)
            and isinstance(header["tokenizer"]["text"], str)
            and isinstance(header["tokenizer"]["sha256"], str)
            and isinstance(header["training_step"], int)
            and all(isinstance(e["name"], str) and isinstance(e["shape"], list) for e in header["parameters"])
        )
    except (KeyError, TypeError):
        ok = False
    if not ok:
        raise TruncatedCheckpointError(f"{source}: checkpoint header is missing required fields")


def _reconcile(header: Dict[str, Any], checkpoint: Checkpoint, source: str) -> None:
    """Header parameter table, blob shapes and the model config must agree."""
    declared = {entry["name"]: tuple(entry["shape"]) for entry in header["parameters"]}
    actual = {name: tuple(value.shape) for name, value in checkpoint.params.items()}
    expected = dict(checkpoint.config.parameter_shapes())
    for label, table in (("header", declared), ("config", expected)):
        mismatched = sorted(
            name for name in set(table) | set(actual) if table.get(name) != actual.get(name)
        )
        if mismatched:
            raise CheckpointShapeError(
                f"{source}: {label} and blob shapes disagree for {', '.join(mismatched[:5])}",
                parameters=mismatched,
            )
    digest = header["tokenizer"]["sha256"]
    if digest != checkpoint.tokenizer_sha256:
        raise CheckpointShapeError(f"{source}: tokenizer hash does not match the stored tokenizer")


class _Reader:
    def __init__(self, data: bytes, source: str):
        self.data = data
        self.offset = 0
        self.source = source

    @property
    def remaining(self) -> int:
        return len(self.data) - self.offset

    def take(self, size: int, what: str) -> bytes:
        if size > self.remaining:
            raise TruncatedCheckpointError(
                f"{self.source} is truncated: needed {size} bytes for {what}, {self.remaining} left",
                offset=self.offset,
            )
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str, what: str) -> Tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def save_checkpoint(checkpoint: Checkpoint, path: PathLike) -> Path:
    data = checkpoint.to_bytes()
    path = atomic_write_bytes(path, data)
    logger.info(f"Saved checkpoint ({len(checkpoint.params)} tensors, {len(data)} bytes) to {path}")
    return path


def load_checkpoint(path: PathLike) -> Checkpoint:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise StorageError(f"cannot read checkpoint {path}: {e.strerror or e}", path=str(path)) from e
    checkpoint = Checkpoint.from_bytes(data, source=str(path))
    logger.info(f"Loaded checkpoint {path} (step {checkpoint.training_step})")
    return checkpoint
