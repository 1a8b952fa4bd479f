"""Draw images from the patch-synthesis prior: i.i.d. patches, then ``Q``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._random import make_rng
from .exceptions import CapabilityError
from .image import ImageBuffer
from .patches import PatchGrid, scatter_mean
from .priors import PatchPrior


@dataclass(frozen=True)
class SampleJob:
    grid: PatchGrid
    prior: PatchPrior
    seed: int = 0
    count: int = 1

    def __post_init__(self):
        if not self.prior.can_sample:
            raise CapabilityError(f"{self.prior!r} cannot be sampled")
        if self.prior.patch_dim != self.grid.n:
            raise ValueError(f"prior patch_dim {self.prior.patch_dim} != grid n={self.grid.n}")
        if int(self.count) != self.count or self.count < 1:
            raise ValueError(f"count must be a positive integer, got {self.count}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


def sample_patches(job: SampleJob, index: int) -> np.ndarray:
    """The ``(M, n)`` patch draw behind image ``index``.

    Image ``index`` owns the stream ``make_rng(seed, index)``; its ``M``
    patches are consecutive i.i.d. draws from that stream, patch 0 first.
    """
    return job.prior.sample(make_rng(int(job.seed), int(index)), size=job.grid.num_patches)


def sample_prior_image(job: SampleJob, index: int) -> ImageBuffer:
    grid = job.grid
    z = sample_patches(job, index).reshape(-1)
    return ImageBuffer(grid.image_height, grid.image_width, scatter_mean(grid, z))


def sample_prior_images(job: SampleJob) -> list[ImageBuffer]:
    return [sample_prior_image(job, i) for i in range(job.count)]
