"""Image container, synthetic images, noise and fidelity metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._random import gaussian, make_rng


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """Grayscale image stored as a row-major float64 vector.

    Intensities are nominally in ``[0, 1]`` but are never clamped here.
    """

    height: int
    width: int
    data: np.ndarray

    def __post_init__(self):
        if int(self.height) <= 0 or int(self.width) <= 0:
            raise ValueError(f"image dimensions must be positive, got {self.height}x{self.width}")
        data = np.ascontiguousarray(self.data, dtype=np.float64).reshape(-1)
        if data.size != self.height * self.width:
            raise ValueError(
                f"data has {data.size} entries, expected {self.height}*{self.width}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("image data contains non-finite values")
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, array) -> ImageBuffer:
        array = np.asarray(array, dtype=np.float64)
        if array.ndim != 2:
            raise ValueError(f"expected a 2D array, got shape {array.shape}")
        return cls(array.shape[0], array.shape[1], array.reshape(-1))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def size(self) -> int:
        return self.height * self.width

    def to_array(self) -> np.ndarray:
        return self.data.reshape(self.height, self.width).copy()

    def with_data(self, data) -> ImageBuffer:
        return ImageBuffer(self.height, self.width, data)

    def __repr__(self):
        return f"ImageBuffer({self.height}x{self.width})"


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


def _check_same_shape(a: ImageBuffer, b: ImageBuffer):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def add_awgn(img: ImageBuffer, spec: NoiseSpec) -> ImageBuffer:
    """Return ``img + sigma * w`` with ``w`` i.i.d. standard normal.

    ``w`` is drawn by Box-Muller from ``make_rng(spec.seed)``, so the output
    is a pure function of ``(img, spec)``.
    """
    if spec.sigma == 0:
        return img.with_data(img.data.copy())
    noise = gaussian(make_rng(int(spec.seed)), img.size)
    return img.with_data(img.data + spec.sigma * noise)


def mse(a: ImageBuffer, b: ImageBuffer) -> float:
    _check_same_shape(a, b)
    diff = a.data - b.data
    return float(np.dot(diff, diff) / diff.size)


def psnr(a: ImageBuffer, b: ImageBuffer, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` when the images are equal."""
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    err = mse(a, b)
    if err == 0:
        return float("inf")
    return float(10.0 * np.log10(peak**2 / err))


def make_test_image(kind: str, height: int, width: int, **params) -> ImageBuffer:
    """Deterministic synthetic image.

    kinds and their formulas (``i`` row, ``j`` column, 0-based):

    ``constant``
        ``value`` (default 0.5) everywhere.
    ``gradient``
        horizontal ramp ``j / (width - 1)``; a single column is 0.
    ``checkerboard``
        ``high`` (default 1) where ``(i // period + j // period)`` is odd,
        ``low`` (default 0) elsewhere; ``period`` defaults to 1.
    ``piecewise``
        background 0.2; rectangle rows ``[h/4, 3h/4)`` by cols ``[w/8, w/2)``
        at 0.8; disc of radius ``min(h, w)/5`` centred at ``(h/2, 3w/4)``
        at 0.5 (the disc is drawn last).
    """
    if height <= 0 or width <= 0:
        raise ValueError(f"image dimensions must be positive, got {height}x{width}")
    ii, jj = np.mgrid[0:height, 0:width]
    if kind == "constant":
        arr = np.full((height, width), float(params.get("value", 0.5)))
    elif kind == "gradient":
        ramp = jj / (width - 1) if width > 1 else np.zeros_like(jj, dtype=float)
        arr = ramp.astype(np.float64)
    elif kind == "checkerboard":
        period = int(params.get("period", 1))
        if period < 1:
            raise ValueError("checkerboard period must be >= 1")
        low, high = float(params.get("low", 0.0)), float(params.get("high", 1.0))
        odd = ((ii // period + jj // period) % 2).astype(bool)
        arr = np.where(odd, high, low)
    elif kind == "piecewise":
        arr = np.full((height, width), 0.2)
        rect = (ii >= height / 4) & (ii < 3 * height / 4) & (jj >= width / 8) & (jj < width / 2)
        arr[rect] = 0.8
        radius = min(height, width) / 5
        disc = (ii - height / 2) ** 2 + (jj - 3 * width / 4) ** 2 <= radius**2
        arr[disc] = 0.5
    else:
        raise ValueError(f"unknown test image kind {kind!r}")
    return ImageBuffer.from_array(arr)
