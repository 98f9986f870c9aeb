"""Shared utilities: logging, errors, validators and seeding."""

from .errors import DeskOcrError, ErrorHandler, ErrorType, error_handler
from .logging import Logger, logger
from .seeding import derive_seed, make_rng

__all__ = [
    "Logger",
    "logger",
    "DeskOcrError",
    "ErrorHandler",
    "ErrorType",
    "error_handler",
    "derive_seed",
    "make_rng",
]
