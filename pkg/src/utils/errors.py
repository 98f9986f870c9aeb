# src/utils/errors.py
import re
from enum import Enum
from typing import Any, Dict, Optional

from .logging import logger


class ErrorType(Enum):
    """Types of errors that can occur."""
    DIMENSION = "dimension"
    CONFIG = "config"
    INDEX = "index"
    SEQUENCE_LENGTH = "sequence_length"
    USAGE = "usage"
    NUMERICAL = "numerical"
    TOKENIZER = "tokenizer"
    TRAINING = "training"
    WEIGHT_IMPORT = "weight_import"
    CHECKPOINT_VERSION = "checkpoint_version"
    CHECKPOINT_SHAPE = "checkpoint_shape"
    CHECKPOINT_TRUNCATED = "checkpoint_truncated"
    INPUT = "input"
    GENERATION = "generation"
    EVALUATION = "evaluation"
    IO = "io"
    UNKNOWN = "unknown"


class DeskOcrError(Exception):
    """Base class for every error raised by the engine."""

    error_type: ErrorType = ErrorType.UNKNOWN

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details


class DimensionError(DeskOcrError, ValueError):
    error_type = ErrorType.DIMENSION


class ConfigError(DeskOcrError, ValueError):
    error_type = ErrorType.CONFIG


class TokenIndexError(DeskOcrError, IndexError):
    error_type = ErrorType.INDEX


class SequenceLengthError(DeskOcrError, ValueError):
    error_type = ErrorType.SEQUENCE_LENGTH


class UsageError(DeskOcrError, RuntimeError):
    error_type = ErrorType.USAGE


class NumericalError(DeskOcrError, FloatingPointError):
    error_type = ErrorType.NUMERICAL


class TokenizerError(DeskOcrError, ValueError):
    error_type = ErrorType.TOKENIZER


class TrainingError(DeskOcrError, RuntimeError):
    error_type = ErrorType.TRAINING


class WeightImportError(DeskOcrError, ValueError):
    error_type = ErrorType.WEIGHT_IMPORT


class CheckpointError(DeskOcrError):
    """Common parent of the checkpoint integrity errors."""


class CheckpointVersionError(CheckpointError):
    error_type = ErrorType.CHECKPOINT_VERSION


class CheckpointShapeError(CheckpointError):
    error_type = ErrorType.CHECKPOINT_SHAPE


class TruncatedCheckpointError(CheckpointError):
    error_type = ErrorType.CHECKPOINT_TRUNCATED


class InputError(DeskOcrError, ValueError):
    error_type = ErrorType.INPUT


class GenerationError(DeskOcrError, ValueError):
    error_type = ErrorType.GENERATION


class EvaluationError(DeskOcrError, ValueError):
    error_type = ErrorType.EVALUATION


class StorageError(DeskOcrError, OSError):
    error_type = ErrorType.IO


class ErrorHandler:
    """Classifies exceptions and renders them for logs and the CLI."""

    # Exit codes returned by the CLI
    EXIT_FAILURE = 1
    EXIT_USAGE = 2

    # Fallback messages for exceptions without a usable text
    DEFAULT_MESSAGES = {
        ErrorType.IO: "A file could not be read or written",
        ErrorType.UNKNOWN: "An unexpected error occurred",
    }

    _WARNING_TYPES = {ErrorType.CONFIG, ErrorType.INPUT, ErrorType.USAGE}

    def classify_error(self, error: BaseException) -> ErrorType:
        """
        Classify an exception into an ErrorType.

        Args:
            error: The exception to classify

        Returns:
            ErrorType enum value
        """
        if isinstance(error, DeskOcrError):
            return error.error_type
        if isinstance(error, (FileNotFoundError, PermissionError, IsADirectoryError)):
            return ErrorType.IO
        if isinstance(error, OSError):
            return ErrorType.IO
        if isinstance(error, (KeyError, TypeError)):
            return ErrorType.CONFIG
        return ErrorType.UNKNOWN

    def get_message(self, error: BaseException) -> str:
        """Return a sanitized single-line message for an exception."""
        error_type = self.classify_error(error)
        raw = str(error).strip()
        if isinstance(error, OSError) and getattr(error, 'filename', None) and raw == '':
            raw = f"{error.strerror}: {error.filename}"
        if not raw:
            raw = self.DEFAULT_MESSAGES.get(error_type, self.DEFAULT_MESSAGES[ErrorType.UNKNOWN])
        return self._sanitize_error_message(raw)

    def _sanitize_error_message(self, message: str) -> str:
        """Collapse whitespace so the message fits on one line."""
        return re.sub(r'\s+', ' ', message).strip()

    def format_cli_error(self, error: BaseException) -> str:
        """
        Render the machine-parsable single-line error.

        Returns:
            Line of the form: error type=<type> message="<escaped message>"
        """
        error_type = self.classify_error(error)
        message = self.get_message(error).replace('\\', '\\\\').replace('"', '\\"')
        return f'error type={error_type.value} message="{message}"'

    def handle_error(self, error: BaseException, context: Optional[str] = None) -> Dict[str, Any]:
        """
        Log an error with the appropriate level and return its description.

        Args:
            error: The exception being handled
            context: Short label of the operation that failed

        Returns:
            Dict with error_type, message and context
        """
        error_type = self.classify_error(error)
        log_data = {
            'error_type': error_type.value,
            'message': self.get_message(error),
            'context': context,
        }
        if isinstance(error, DeskOcrError) and error.details:
            log_data['details'] = error.details

        if error_type in self._WARNING_TYPES:
            logger.warning(f"Rejected input: {log_data}")
        elif error_type == ErrorType.UNKNOWN:
            logger.error(f"Unknown error type: {log_data}", exc_info=error)
        else:
            logger.error(f"Handled error: {log_data}")
        return log_data


error_handler = ErrorHandler()
