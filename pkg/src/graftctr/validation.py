"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


def require(condition: bool, message: str) -> None:
    if not condition:
        raise ValidationError(message)


def check_finite(values, name: str) -> None:
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")


def check_unit_norm(vector: np.ndarray, name: str, atol: float = 1e-6) -> None:
    norm = float(np.linalg.norm(vector))
    if abs(norm - 1.0) > atol:
        raise ValidationError(f"{name} must be unit-norm, got ||v||={norm!r}")


def check_probability_open(values, name: str) -> None:
    """Probabilities must lie strictly inside (0, 1)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size and not (np.all(arr > 0.0) and np.all(arr < 1.0)):
        raise ValidationError(f"{name} must lie in the open interval (0, 1)")


def check_safe_token(text: str, name: str) -> str:
    """Reject identifiers that would collide with file-format delimiters."""
    if not text or any(c in text for c in "\t\n|;:=,"):
        raise ValidationError(f"{name} contains reserved delimiter characters: {text!r}")
    return text
