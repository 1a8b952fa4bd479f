"""Input validation shared by the estimator and the CLI."""

from __future__ import annotations

import math
from numbers import Integral, Real

import numpy as np

from .image import ImageBuffer


def check_image(X) -> ImageBuffer:
    """Coerce an ``ImageBuffer`` or 2D array-like into an ``ImageBuffer``."""
    if isinstance(X, ImageBuffer):
        return X
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a single 2D grayscale image, got array of shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("empty image")
    return ImageBuffer.from_array(arr)


def check_positive(name: str, value, integer: bool = False):
    kind = Integral if integer else Real
    if not isinstance(value, kind) or isinstance(value, bool):
        raise TypeError(f"{name} must be {'an integer' if integer else 'a real number'}, got {value!r}")
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be positive, got {value!r}")
    return value


def check_pair(name: str, value) -> tuple[int, int]:
    """``k`` or ``(kh, kw)`` to a pair of positive ints."""
    if isinstance(value, Integral):
        pair = (int(value), int(value))
    else:
        pair = tuple(int(v) for v in value)
        if len(pair) != 2:
            raise ValueError(f"{name} must be an int or a pair, got {value!r}")
    for v in pair:
        check_positive(name, v, integer=True)
    return pair
