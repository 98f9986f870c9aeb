# tests/unit/test_error_handler.py
import logging
import logging.handlers

import numpy as np
import pytest

from src.utils.errors import (
    CheckpointError,
    CheckpointShapeError,
    ConfigError,
    DeskOcrError,
    ErrorHandler,
    ErrorType,
    InputError,
    StorageError,
    TokenIndexError,
    TruncatedCheckpointError,
)
from src.utils.logging import Logger, logger
from src.utils.seeding import derive_seed, make_rng
from src.utils.validators import (
    MAX_SEED,
    find_unsupported_chars,
    validate_fraction,
    validate_heads,
    validate_patch_geometry,
    validate_positive_int,
    validate_range,
    validate_seed,
)


class TestErrorHandler:
    """Test the ErrorHandler class."""

    @pytest.fixture
    def error_handler(self):
        """Create an error handler for testing."""
        return ErrorHandler()

    def test_classify_engine_errors(self, error_handler):
        """Test that engine errors carry their own type."""
        assert error_handler.classify_error(ConfigError("x")) == ErrorType.CONFIG
        assert error_handler.classify_error(TruncatedCheckpointError("x")) == ErrorType.CHECKPOINT_TRUNCATED
        assert error_handler.classify_error(TokenIndexError("x")) == ErrorType.INDEX

    def test_classify_builtin_errors(self, error_handler):
        """Test classification of exceptions raised outside the engine."""
        assert error_handler.classify_error(FileNotFoundError("gone")) == ErrorType.IO
        assert error_handler.classify_error(KeyError("k")) == ErrorType.CONFIG
        assert error_handler.classify_error(RuntimeError("boom")) == ErrorType.UNKNOWN

    def test_engine_errors_keep_builtin_bases(self):
        """Test that callers catching builtin exceptions still see engine errors."""
        assert isinstance(ConfigError("x"), ValueError)
        assert isinstance(TokenIndexError("x"), IndexError)
        assert isinstance(StorageError("x"), OSError)
        assert isinstance(CheckpointShapeError("x"), CheckpointError)
        assert isinstance(CheckpointShapeError("x"), DeskOcrError)

    def test_details_are_kept(self):
        error = InputError("bad token", token_id=7)
        assert error.details == {"token_id": 7}
        assert error.message == "bad token"

    def test_cli_line_format(self, error_handler):
        """Test the single-line machine-parsable error."""
        line = error_handler.format_cli_error(ConfigError('unknown key "x"\n at line 3'))
        assert line == 'error type=config message="unknown key \\"x\\" at line 3"'

    def test_empty_message_falls_back(self, error_handler):
        assert error_handler.get_message(RuntimeError()) == "An unexpected error occurred"

    def test_handle_error_returns_description(self, error_handler):
        """Test the logged description of a handled error."""
        info = error_handler.handle_error(InputError("no such id", path="a.pgm"), "recognize")
        assert info == {
            "error_type": "input",
            "message": "no such id",
            "context": "recognize",
            "details": {"path": "a.pgm"},
        }

    def test_handle_unknown_error(self, error_handler):
        info = error_handler.handle_error(RuntimeError("boom"))
        assert info["error_type"] == "unknown"
        assert "details" not in info

    def test_exit_codes(self):
        assert (ErrorHandler.EXIT_FAILURE, ErrorHandler.EXIT_USAGE) == (1, 2)


class TestValidators:
    def test_positive_int(self):
        assert validate_positive_int("n", 3) == (True, "")
        assert not validate_positive_int("n", 0)[0]
        assert validate_positive_int("n", 0, minimum=0)[0]
        assert not validate_positive_int("n", True)[0]
        assert not validate_positive_int("n", 2.0)[0]

    def test_fraction(self):
        assert validate_fraction("f", 1.0)[0]
        assert not validate_fraction("f", 1.0, inclusive_high=False)[0]
        assert not validate_fraction("f", -0.1)[0]

    def test_range(self):
        assert validate_range("r", (1, 2))[0]
        assert not validate_range("r", (2, 1))[0]
        assert not validate_range("r", (1, 2, 3))[0]
        assert not validate_range("r", ("a", 2))[0]

    def test_patch_geometry(self):
        assert validate_patch_geometry(384, 384, 16)[0]
        ok, message = validate_patch_geometry(30, 64, 4)
        assert not ok and "not divisible" in message

    def test_heads(self):
        assert validate_heads("encoder", 64, 4)[0]
        assert not validate_heads("encoder", 64, 3)[0]
        assert not validate_heads("encoder", 64, 0)[0]

    def test_seed(self):
        assert validate_seed(0)[0] and validate_seed(MAX_SEED)[0]
        assert not validate_seed(MAX_SEED + 1)[0]
        assert not validate_seed(-1)[0]

    def test_unsupported_chars_in_order(self):
        assert find_unsupported_chars("aXbYXa", "ab") == "XY"
        assert find_unsupported_chars("", "ab") == ""


class TestSeeding:
    def test_derive_seed_is_stable(self):
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
        assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
        assert 0 <= derive_seed(MAX_SEED) <= MAX_SEED

    def test_make_rng_streams(self):
        a = make_rng(5, 0).random(4)
        np.testing.assert_array_equal(a, make_rng(5, 0).random(4))
        assert not np.array_equal(a, make_rng(5, 1).random(4))


class TestLogging:
    def test_singleton(self):
        assert Logger() is Logger()
        assert logger is Logger().get_logger()
        assert logger.name == "desk_trocr"

    def test_console_level_change(self):
        Logger().set_console_level("ERROR")
        try:
            consoles = [h for h in logger.handlers if not isinstance(h, logging.handlers.RotatingFileHandler)]
            assert consoles and all(h.level == logging.ERROR for h in consoles)
        finally:
            Logger().set_console_level("WARNING")
