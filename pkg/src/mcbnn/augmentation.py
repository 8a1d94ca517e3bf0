"""Deterministic image augmentation: right-angle rotation, mirroring, scaling.

Rotations and flips are exact pixel permutations, so they are lossless and
bit-exact under composition. Scaling resamples bilinearly about the image
center and then center-crops (factor > 1) or zero-pads (factor < 1) back
to the original canvas, so downstream shapes never change. Dataset-level
augmentation draws its transform choices from per-image PCG64 substreams
keyed on (seed, image index), making the enlarged dataset a pure function
of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_image

ROTATIONS = (90, 180, 270)
FLIP_AXES = ("horizontal", "vertical")

# The policy restricts scales to (0.5, 2.0]; scale() itself additionally
# accepts the closed lower endpoint 0.5.
SCALE_MIN = 0.5
SCALE_MAX = 2.0


@dataclass(frozen=True)
class AugmentPolicy:
    """Which transforms may be drawn and how many variants to add per image."""

    rotations: tuple[int, ...] = ROTATIONS
    flips: tuple[str, ...] = FLIP_AXES
    scales: tuple[float, ...] = (0.9, 1.1)
    per_image_count: int = 3
    seed: int = 0

    def __post_init__(self):
        rotations = tuple(int(r) for r in self.rotations)
        flips = tuple(self.flips)
        scales = tuple(float(s) for s in self.scales)
        object.__setattr__(self, "rotations", rotations)
        object.__setattr__(self, "flips", flips)
        object.__setattr__(self, "scales", scales)
        if any(r not in ROTATIONS for r in rotations):
            raise ValueError(f"rotations must be a subset of {ROTATIONS}, got {rotations}")
        if any(f not in FLIP_AXES for f in flips):
            raise ValueError(f"flips must be a subset of {FLIP_AXES}, got {flips}")
        if any(not SCALE_MIN < s <= SCALE_MAX for s in scales):
            raise ValueError(
                f"scales must lie in ({SCALE_MIN}, {SCALE_MAX}], got {scales}"
            )
        if self.per_image_count < 0:
            raise ValueError(f"per_image_count must be >= 0, got {self.per_image_count}")


def rotate(image, angle: int) -> np.ndarray:
    """Exact rotation by 0/90/180/270 degrees; 90 maps (i, j) to (j, H-1-i)."""
    image = as_image(image)
    if angle not in (0, 90, 180, 270):
        raise ValueError(f"angle must be one of 0, 90, 180, 270, got {angle}")
    return np.rot90(image, -angle // 90).copy()


def flip(image, axis: str) -> np.ndarray:
    """Exact mirror: ``horizontal`` swaps columns, ``vertical`` swaps rows."""
    image = as_image(image)
    if axis == "horizontal":
        return np.fliplr(image).copy()
    if axis == "vertical":
        return np.flipud(image).copy()
    raise ValueError(f"axis must be one of {FLIP_AXES}, got {axis!r}")


def scale(image, factor: float) -> np.ndarray:
    """Resample by ``factor`` about the center, keeping the original canvas.

    Bilinear interpolation with edge clamping; the resampled image is
    center-cropped (factor > 1) or zero-padded (factor < 1) back to the
    input dimensions and clamped to [0, 1]. Accepts factors in
    [0.5, 2.0].
    """
    image = as_image(image)
    if not SCALE_MIN <= factor <= SCALE_MAX:
        raise ValueError(f"factor must lie in [{SCALE_MIN}, {SCALE_MAX}], got {factor}")
    h, w = image.shape
    hs = max(1, int(np.floor(h * factor + 0.5)))
    ws = max(1, int(np.floor(w * factor + 0.5)))

    def axis_coords(n_out, n_in):
        # Center-aligned inverse map; exact identity when n_out == n_in.
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        lo = np.floor(src).astype(int)
        frac = src - lo
        return np.clip(lo, 0, n_in - 1), np.clip(lo + 1, 0, n_in - 1), frac

    r0, r1, tr = axis_coords(hs, h)
    c0, c1, tc = axis_coords(ws, w)
    tr = tr[:, None]
    tc = tc[None, :]
    resampled = (
        image[np.ix_(r0, c0)] * (1 - tr) * (1 - tc)
        + image[np.ix_(r0, c1)] * (1 - tr) * tc
        + image[np.ix_(r1, c0)] * tr * (1 - tc)
        + image[np.ix_(r1, c1)] * tr * tc
    )

    out = np.zeros((h, w))
    src_r, dst_r = max(0, (hs - h) // 2), max(0, (h - hs) // 2)
    src_c, dst_c = max(0, (ws - w) // 2), max(0, (w - ws) // 2)
    nr, nc = min(h, hs), min(w, ws)
    out[dst_r : dst_r + nr, dst_c : dst_c + nc] = resampled[
        src_r : src_r + nr, src_c : src_c + nc
    ]
    return np.clip(out, 0.0, 1.0)


def _variants(image, policy: AugmentPolicy, image_index: int):
    """Yield the policy's variants of one image, drawn on its substream."""
    rng = np.random.default_rng(
        np.random.SeedSequence(policy.seed, spawn_key=(image_index,))
    )
    for _ in range(policy.per_image_count):
        out = image
        if policy.rotations:
            out = rotate(out, policy.rotations[rng.integers(len(policy.rotations))])
        if policy.flips:
            pick = rng.integers(len(policy.flips) + 1)
            if pick < len(policy.flips):
                out = flip(out, policy.flips[pick])
        if policy.scales:
            out = scale(out, policy.scales[rng.integers(len(policy.scales))])
        yield out


def augment_dataset(images, labels, policy: AugmentPolicy):
    """Append ``per_image_count`` transformed copies of every image.

    Returns (images, labels) with the originals first, in their input
    order, followed by the variants grouped by source image. Labels are
    copied verbatim, so class proportions are preserved exactly up to the
    integer multiplier.
    """
    images = [as_image(img) for img in images]
    labels = np.asarray(labels)
    if labels.shape != (len(images),):
        raise ValueError(f"{labels.shape[0]} labels for {len(images)} images")
    out_images = list(images)
    out_labels = list(labels)
    for idx, image in enumerate(images):
        for variant in _variants(image, policy, idx):
            out_images.append(variant)
            out_labels.append(labels[idx])
    return out_images, np.asarray(out_labels)
