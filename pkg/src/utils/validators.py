# src/utils/validators.py
from typing import Any, Iterable, Tuple

MAX_SEED = 2 ** 64 - 1


def validate_positive_int(name: str, value: Any, minimum: int = 1) -> Tuple[bool, str]:
    """
    Validate an integer hyperparameter.

    Args:
        name: Dotted name used in the error message
        value: Value to check
        minimum: Smallest accepted value

    Returns:
        Tuple of (is_valid, error_message)
    """
    if isinstance(value, bool) or not isinstance(value, int):
        return False, f"{name} must be an integer, got {type(value).__name__}"
    if value < minimum:
        return False, f"{name} must be >= {minimum}, got {value}"
    return True, ""


def validate_fraction(name: str, value: Any, inclusive_high: bool = True) -> Tuple[bool, str]:
    """Validate a float in [0, 1] (or [0, 1) when inclusive_high is False)."""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return False, f"{name} must be a number, got {type(value).__name__}"
    upper_ok = value <= 1.0 if inclusive_high else value < 1.0
    if value < 0.0 or not upper_ok:
        bound = "]" if inclusive_high else ")"
        return False, f"{name} must be in [0, 1{bound}, got {value}"
    return True, ""


def validate_range(name: str, value: Any) -> Tuple[bool, str]:
    """Validate a [low, high] pair of numbers with low <= high."""
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        return False, f"{name} must be a [low, high] pair"
    low, high = value
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in (low, high)):
        return False, f"{name} bounds must be numbers"
    if low > high:
        return False, f"{name} low bound {low} exceeds high bound {high}"
    return True, ""


def validate_patch_geometry(height: int, width: int, patch: int) -> Tuple[bool, str]:
    """Check that the resized image is divisible into P x P patches."""
    if patch < 1:
        return False, f"patch size must be >= 1, got {patch}"
    if height % patch != 0 or width % patch != 0:
        return False, (f"resize ({height}, {width}) is not divisible by patch size {patch}")
    return True, ""


def validate_heads(name: str, hidden: int, heads: int) -> Tuple[bool, str]:
    """Check that the hidden size splits evenly across attention heads."""
    if heads < 1:
        return False, f"{name}.heads must be >= 1, got {heads}"
    if hidden % heads != 0:
        return False, f"{name}.hidden {hidden} is not divisible by heads {heads}"
    return True, ""


def validate_seed(seed: Any) -> Tuple[bool, str]:
    """Seeds are unsigned 64-bit integers."""
    if isinstance(seed, bool) or not isinstance(seed, int):
        return False, "seed must be an integer"
    if seed < 0 or seed > MAX_SEED:
        return False, f"seed must be in [0, 2^64), got {seed}"
    return True, ""


def find_unsupported_chars(text: str, charset: Iterable[str]) -> str:
    """Return the characters of text missing from charset, in first-seen order."""
    allowed = set(charset)
    missing = []
    for char in text:
        if char not in allowed and char not in missing:
            missing.append(char)
    return "".join(missing)
