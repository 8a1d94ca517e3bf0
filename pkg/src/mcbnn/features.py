"""Fixed convolutional feature extraction for grayscale images.

Each stage convolves the incoming maps with seeded random kernels, applies
ReLU, and max-pools; the final maps are flattened and average-binned down
to a fixed-length feature vector. The kernels are drawn once per spec from
a PCG64 stream and never trained, which keeps the whole pipeline
deterministic: the Bayesian treatment is confined to the classifier head
that consumes these vectors. Convolution means cross-correlation (no
kernel flip) throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._validation import as_image

DEFAULT_STAGES = ((8, 3, 2), (4, 3, 2))


@dataclass(frozen=True)
class ConvStackSpec:
    """Stage layout of the extractor.

    Each stage is ``(n_kernels, kernel_size, pool_size)``. The default
    two-stage stack feeds a 256-entry vector from images as small as
    50 x 50 and as large as 224 x 224.
    """

    stages: tuple[tuple[int, int, int], ...] = DEFAULT_STAGES
    output_dim: int = 256
    kernel_seed: int = 0

    def __post_init__(self):
        stages = tuple(tuple(int(v) for v in stage) for stage in self.stages)
        object.__setattr__(self, "stages", stages)
        if not stages:
            raise ValueError("spec needs at least one stage")
        for idx, stage in enumerate(stages):
            if len(stage) != 3:
                raise ValueError(f"stage {idx} must be (n_kernels, kernel_size, pool_size)")
            n_kernels, kernel_size, pool_size = stage
            if n_kernels < 1 or kernel_size < 1 or pool_size < 1:
                raise ValueError(f"stage {idx} entries must be positive, got {stage}")
            if kernel_size % 2 == 0:
                raise ValueError(f"stage {idx} kernel_size must be odd, got {kernel_size}")
        if self.output_dim < 1:
            raise ValueError(f"output_dim must be >= 1, got {self.output_dim}")


def conv2d_valid(image, kernel) -> np.ndarray:
    """Valid cross-correlation: output (i, j) = sum image[i+a, j+b] * kernel[a, b].

    No padding, stride 1; the output shrinks to (H-k+1, W-k+1). Values are
    returned unclamped.
    """
    image = np.asarray(image, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if image.ndim != 2 or kernel.ndim != 2:
        raise ValueError("conv2d_valid expects 2-D image and kernel")
    kh, kw = kernel.shape
    if kh > image.shape[0] or kw > image.shape[1]:
        raise ValueError(
            f"kernel {kernel.shape} larger than image {image.shape}"
        )
    windows = sliding_window_view(image, (kh, kw))
    return np.einsum("ijab,ab->ij", windows, kernel)


def relu(values) -> np.ndarray:
    """Elementwise max(0, v)."""
    return np.maximum(np.asarray(values, dtype=np.float64), 0.0)


def max_pool(image, pool_size: int) -> np.ndarray:
    """Non-overlapping max pooling; trailing rows/cols not filling a window are dropped."""
    image = np.asarray(image, dtype=np.float64)
    if pool_size < 1:
        raise ValueError(f"pool_size must be >= 1, got {pool_size}")
    h, w = image.shape
    ph, pw = h // pool_size, w // pool_size
    if ph < 1 or pw < 1:
        raise ValueError(f"pool {pool_size} too large for image {image.shape}")
    trimmed = image[: ph * pool_size, : pw * pool_size]
    return trimmed.reshape(ph, pool_size, pw, pool_size).max(axis=(1, 3))


def stack_kernels(spec: ConvStackSpec) -> list[np.ndarray]:
    """Materialize the per-stage kernel banks, shape (n_out, n_in, k, k) each.

    All banks are drawn sequentially from one PCG64 stream seeded with
    ``kernel_seed``; entries are Gaussian with standard deviation 1/k.
    """
    rng = np.random.default_rng(spec.kernel_seed)
    banks = []
    n_in = 1
    for n_out, k, _ in spec.stages:
        banks.append(rng.standard_normal((n_out, n_in, k, k)) / k)
        n_in = n_out
    return banks


def _run_stage(maps, bank, pool_size, stage_idx):
    kh = bank.shape[2]
    h, w = maps[0].shape
    if kh > h or kh > w:
        raise ValueError(
            f"image too small at stage {stage_idx}: maps are {h}x{w}, kernel is {kh}x{kh}"
        )
    out = []
    for kernels in bank:
        acc = np.zeros((h - kh + 1, w - kh + 1))
        for channel, kern in zip(maps, kernels):
            acc += conv2d_valid(channel, kern)
        if acc.shape[0] < pool_size or acc.shape[1] < pool_size:
            raise ValueError(
                f"image too small at stage {stage_idx}: "
                f"convolved maps are {acc.shape[0]}x{acc.shape[1]}, pool is {pool_size}"
            )
        out.append(max_pool(relu(acc), pool_size))
    return out


def extract_features(image, spec: ConvStackSpec) -> np.ndarray:
    """Run the conv/ReLU/pool stack and reduce to exactly ``output_dim`` values.

    The flattened final maps are average-binned into ``output_dim``
    contiguous bins (identity when the flat size already matches), which
    requires the flat size to be at least ``output_dim``. Deterministic
    given (image, spec).
    """
    image = as_image(image)
    maps = [image]
    for stage_idx, ((_, _, pool_size), bank) in enumerate(zip(spec.stages, stack_kernels(spec))):
        maps = _run_stage(maps, bank, pool_size, stage_idx)
    flat = np.stack(maps).ravel()
    if flat.shape[0] < spec.output_dim:
        raise ValueError(
            f"image too small: pipeline yields {flat.shape[0]} values, "
            f"output_dim is {spec.output_dim}"
        )
    if flat.shape[0] == spec.output_dim:
        return flat
    bounds = (np.arange(spec.output_dim + 1) * flat.shape[0]) // spec.output_dim
    sums = np.add.reduceat(flat, bounds[:-1])
    return sums / np.diff(bounds)


def extract_features_batch(images, spec: ConvStackSpec) -> np.ndarray:
    """Feature matrix for a sequence of images, one row per image."""
    return np.stack([extract_features(img, spec) for img in images])
