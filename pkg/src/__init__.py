"""Desk-scale Transformer OCR: textline images in, wordpiece text out."""

from .utils import Logger, logger

__version__ = "1.0.0"
__all__ = ["Logger", "logger"]
