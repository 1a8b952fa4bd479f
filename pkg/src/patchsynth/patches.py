"""Patch extraction ``P`` and averaging synthesis ``Q`` as index operations.

A :class:`PatchGrid` stores, for every patch ``m``, the ``n`` absolute pixel
indices it covers (``footprints[m]``, row-major inside the patch) and the
per-pixel coverage counts ``c``.  With that:

* ``P x`` gathers ``x[footprints]``;
* ``Q z`` scatter-adds every patch entry onto its pixel and divides by ``c``;
* ``Q^T y`` gathers ``(y / c)[footprints]``;
* ``Q Q^T = diag(1 / c)``.

Stacks are patch-major: patch ``m`` occupies ``data[m*n:(m+1)*n]``.
Neither ``P`` nor ``Q`` is ever formed as a matrix here; dense versions
live in :mod:`patchsynth.oracle`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import CoverageError
from .image import ImageBuffer

BOUNDARIES = ("clip", "periodic")


@dataclass(frozen=True, eq=False)
class PatchGrid:
    image_height: int
    image_width: int
    patch_height: int
    patch_width: int
    stride_y: int
    stride_x: int
    boundary: str
    footprints: np.ndarray  # (M, n) int64
    counts: np.ndarray  # (N,) int64

    @property
    def n(self) -> int:
        return self.patch_height * self.patch_width

    @property
    def num_patches(self) -> int:
        return self.footprints.shape[0]

    M = num_patches

    @property
    def num_pixels(self) -> int:
        return self.image_height * self.image_width

    @property
    def image_shape(self) -> tuple[int, int]:
        return (self.image_height, self.image_width)

    @property
    def stack_size(self) -> int:
        return self.num_patches * self.n

    @property
    def is_overlapping(self) -> bool:
        return bool(np.any(self.counts > 1))

    def describe(self) -> dict:
        return {
            "image_height": self.image_height,
            "image_width": self.image_width,
            "patch_height": self.patch_height,
            "patch_width": self.patch_width,
            "stride_y": self.stride_y,
            "stride_x": self.stride_x,
            "boundary": self.boundary,
        }

    def __repr__(self):
        return (
            f"PatchGrid(image={self.image_height}x{self.image_width}, "
            f"patch={self.patch_height}x{self.patch_width}, "
            f"stride=({self.stride_y},{self.stride_x}), {self.boundary}, M={self.num_patches})"
        )


@dataclass(frozen=True, eq=False)
class PatchStack:
    grid: PatchGrid
    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64).reshape(-1)
        if data.size != self.grid.stack_size:
            raise ValueError(
                f"stack has {data.size} entries, grid expects M*n = {self.grid.stack_size}"
            )
        object.__setattr__(self, "data", data)

    @property
    def patches(self) -> np.ndarray:
        """``(M, n)`` view of the stack."""
        return self.data.reshape(self.grid.num_patches, self.grid.n)

    def with_data(self, data) -> PatchStack:
        return PatchStack(self.grid, data)


def _corners(size: int, patch: int, stride: int, boundary: str) -> np.ndarray:
    if boundary == "clip":
        return np.arange(0, size - patch + 1, stride)
    return np.arange(0, size, stride)


def plan_grid(
    image_height: int,
    image_width: int,
    patch_height: int,
    patch_width: int,
    stride_y: int = 1,
    stride_x: int = 1,
    boundary: str = "clip",
) -> PatchGrid:
    """Enumerate patches with top-left corners on the stride lattice.

    ``clip`` keeps every corner whose patch lies fully inside the image;
    ``periodic`` takes every lattice corner and wraps indices around.
    Corners are ordered row-major.  Raises :class:`CoverageError` if some
    pixel belongs to no patch.
    """
    if boundary not in BOUNDARIES:
        raise ValueError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")
    for name, v in [
        ("image_height", image_height),
        ("image_width", image_width),
        ("patch_height", patch_height),
        ("patch_width", patch_width),
        ("stride_y", stride_y),
        ("stride_x", stride_x),
    ]:
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v}")
    if patch_height > image_height or patch_width > image_width:
        raise ValueError(
            f"patch {patch_height}x{patch_width} larger than image {image_height}x{image_width}"
        )

    ys = _corners(image_height, patch_height, stride_y, boundary)
    xs = _corners(image_width, patch_width, stride_x, boundary)
    dy, dx = np.mgrid[0:patch_height, 0:patch_width]
    rows = ys[:, None, None, None] + dy[None, None]
    cols = xs[None, :, None, None] + dx[None, None]
    if boundary == "periodic":
        rows = rows % image_height
        cols = cols % image_width
    footprints = (rows * image_width + cols).reshape(len(ys) * len(xs), patch_height * patch_width)
    footprints = footprints.astype(np.int64)

    counts = np.bincount(footprints.ravel(), minlength=image_height * image_width)
    uncovered = np.flatnonzero(counts == 0)
    if uncovered.size:
        first = int(uncovered[0])
        raise CoverageError((first // image_width, first % image_width))

    footprints.setflags(write=False)
    counts.setflags(write=False)
    return PatchGrid(
        int(image_height),
        int(image_width),
        int(patch_height),
        int(patch_width),
        int(stride_y),
        int(stride_x),
        boundary,
        footprints,
        counts,
    )


def _check_image(grid: PatchGrid, img: ImageBuffer):
    if img.shape != grid.image_shape:
        raise ValueError(f"image shape {img.shape} does not match grid {grid.image_shape}")


def _check_stack(grid: PatchGrid, stack: PatchStack):
    if stack.grid is not grid and stack.data.size != grid.stack_size:
        raise ValueError("patch stack does not belong to this grid")


# Array-level kernels; the solvers call these on raw vectors.


def gather(grid: PatchGrid, x: np.ndarray) -> np.ndarray:
    return x[grid.footprints].reshape(-1)


def scatter_sum(grid: PatchGrid, z: np.ndarray) -> np.ndarray:
    """``P^T z``: sum of all patch entries landing on each pixel."""
    # bincount accumulates sequentially, so the result is bit-deterministic
    return np.bincount(grid.footprints.ravel(), weights=z, minlength=grid.num_pixels)


def scatter_mean(grid: PatchGrid, z: np.ndarray) -> np.ndarray:
    return scatter_sum(grid, z) / grid.counts


def scatter_mean_adjoint(grid: PatchGrid, y: np.ndarray) -> np.ndarray:
    return gather(grid, y / grid.counts)


# Public operators on typed containers.


def extract(grid: PatchGrid, img: ImageBuffer) -> PatchStack:
    _check_image(grid, img)
    return PatchStack(grid, gather(grid, img.data))


def synthesize(grid: PatchGrid, stack: PatchStack) -> ImageBuffer:
    _check_stack(grid, stack)
    return ImageBuffer(grid.image_height, grid.image_width, scatter_mean(grid, stack.data))


def synthesize_adjoint(grid: PatchGrid, img: ImageBuffer) -> PatchStack:
    _check_image(grid, img)
    return PatchStack(grid, scatter_mean_adjoint(grid, img.data))


def qqt_diag(grid: PatchGrid) -> np.ndarray:
    return 1.0 / grid.counts


def project_range(grid: PatchGrid, stack: PatchStack) -> PatchStack:
    """``P Q z``: replace every patch entry by the consensus pixel average."""
    _check_stack(grid, stack)
    return PatchStack(grid, gather(grid, scatter_mean(grid, stack.data)))


def operator_report(grid: PatchGrid) -> dict:
    values, freq = np.unique(grid.counts, return_counts=True)
    q = qqt_diag(grid)
    return {
        "M": grid.num_patches,
        "n": grid.n,
        "N": grid.num_pixels,
        "count_histogram": {int(v): int(f) for v, f in zip(values, freq)},
        "qqt_diag_min": float(q.min()),
        "qqt_diag_max": float(q.max()),
        "overlapping": grid.is_overlapping,
    }
