"""Shared exception types and input validation helpers."""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Tensor or image dimensions do not satisfy an operation's contract."""


class ParameterError(ValueError):
    """A hyperparameter is outside its legal range."""


class ConfigError(ValueError):
    """A model or training configuration is inconsistent."""


class DataError(ValueError):
    """A dataset entry (file, label, token id) is unusable."""


class NumericError(ArithmeticError):
    """A computation produced or received non-finite values."""


class ContractError(ValueError):
    """A caller violated an API precondition (empty mask, non-scalar loss, ...)."""


def check_odd_window(window: int, name: str = "window") -> int:
    if window < 3 or window % 2 == 0:
        raise ParameterError(f"{name} must be an odd integer >= 3, got {window}")
    return window


def check_in_open_interval(value: float, lo: float, hi: float, name: str) -> float:
    if not (lo < value < hi):
        raise ParameterError(f"{name} must be in ({lo}, {hi}), got {value}")
    return value


def check_positive(value: float, name: str) -> float:
    if not value > 0:
        raise ParameterError(f"{name} must be > 0, got {value}")
    return value


def as_float_array(x, name: str = "array") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite values")
    return arr


def as_gray_image(x) -> np.ndarray:
    """Validate a (H, W) intensity image with values in [0, 1]."""
    arr = as_float_array(x, "image")
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-d grayscale image, got shape {arr.shape}")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ShapeError("grayscale intensities must lie in [0, 1]")
    return arr


def as_rgb_image(x) -> np.ndarray:
    """Validate a (3, H, W) color image with values in [0, 1]."""
    arr = as_float_array(x, "image")
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ShapeError(f"expected a (3, H, W) image, got shape {arr.shape}")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ShapeError("image values must lie in [0, 1]")
    return arr
