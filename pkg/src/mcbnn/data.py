"""Dataset ingestion, standardization, splitting, and synthetic data.

Two on-disk formats are supported, both chosen for bit-exact, library-free
parsing: delimited tables with header ``label,f0,f1,...`` and binary 8-bit
PGM (P5) images arranged as ``root/<class_name>/*.pgm``. Class indices
come from sorted class-directory names and file ordering is sorted paths,
so ingestion is deterministic regardless of filesystem order.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import as_labels
from .errors import ConfigError, DataError
from .model import Dataset

FLOAT_FORMAT = "%.17g"
CONSTANT_SD_TOL = 1e-12


# ---------------------------------------------------------------------------
# Delimited tables


def load_csv(path) -> Dataset:
    """Read a ``label,f0,f1,...`` table; K is inferred as max label + 1."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise DataError(f"{path}:1: empty file, expected a header row")
    header = rows[0]
    if len(header) < 2 or header[0] != "label":
        raise DataError(f"{path}:1: header must be 'label,f0,f1,...'")
    expected = ["label"] + [f"f{i}" for i in range(len(header) - 1)]
    if header != expected:
        raise DataError(f"{path}:1: header must be 'label,f0,f1,...'")
    n_features = len(header) - 1
    if len(rows) < 2:
        raise DataError(f"{path}:2: no data rows (need at least one sample)")

    labels = []
    features = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != n_features + 1:
            raise DataError(
                f"{path}:{lineno}: expected {n_features + 1} cells, got {len(row)}"
            )
        try:
            label = int(row[0])
        except ValueError:
            raise DataError(f"{path}:{lineno}: label {row[0]!r} is not an integer") from None
        if label < 0:
            raise DataError(f"{path}:{lineno}: negative label {label}")
        try:
            vals = [float(cell) for cell in row[1:]]
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric feature cell") from None
        if not all(math.isfinite(v) for v in vals):
            raise DataError(f"{path}:{lineno}: non-finite feature value")
        labels.append(label)
        features.append(vals)
    return Dataset(
        features=np.asarray(features, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.int64),
        n_classes=max(labels) + 1,
    )


def _atomic_write_bytes(path: Path, blob: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def save_csv(data: Dataset, path) -> None:
    """Write a dataset in the :func:`load_csv` format; round-trips exactly."""
    path = Path(path)
    lines = ["label," + ",".join(f"f{i}" for i in range(data.n_features))]
    for label, row in zip(data.labels, data.features):
        lines.append(str(int(label)) + "," + ",".join(FLOAT_FORMAT % v for v in row))
    _atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


# ---------------------------------------------------------------------------
# PGM (P5) images


def _read_pgm_header(raw: bytes, path):
    """Parse the P5 header tokens, honoring '#' comments; returns
    (width, height, maxval, data offset)."""
    pos = 0
    tokens = []
    while len(tokens) < 4:
        if pos >= len(raw):
            raise DataError(f"{path}: truncated PGM header")
        byte = raw[pos : pos + 1]
        if byte == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif byte.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(raw) and not raw[pos : pos + 1].isspace():
                pos += 1
            tokens.append(raw[start:pos])
            if len(tokens) < 4:
                continue
            # Exactly one whitespace byte separates maxval from pixel data.
            pos += 1
    if tokens[0] != b"P5":
        raise DataError(f"{path}: not a binary PGM (P5) file")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise DataError(f"{path}: corrupt PGM header") from None
    if width < 1 or height < 1:
        raise DataError(f"{path}: bad PGM dimensions {width}x{height}")
    if not 1 <= maxval <= 255:
        raise DataError(f"{path}: unsupported PGM maxval {maxval} (need 1..255)")
    return width, height, maxval, pos


def read_pgm(path) -> np.ndarray:
    """Read a binary 8-bit PGM into a [0, 1] image (pixel byte / 255)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    width, height, _, offset = _read_pgm_header(raw, path)
    data = raw[offset : offset + width * height]
    if len(data) != width * height:
        raise DataError(
            f"{path}: expected {width * height} pixel bytes, found {len(data)}"
        )
    pixels = np.frombuffer(data, dtype=np.uint8).reshape(height, width)
    return pixels.astype(np.float64) / 255.0


def write_pgm(path, image) -> None:
    """Write an image as binary PGM with maxval 255 (pixels rounded to bytes)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {image.shape}")
    h, w = image.shape
    body = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    _atomic_write_bytes(Path(path), b"P5\n%d %d\n255\n" % (w, h) + body.tobytes())


def load_image_dir(root):
    """Read ``root/<class_name>/*.pgm`` into (images, labels, class_names).

    Class indices follow sorted class-directory names; files are read in
    sorted order within each class. All images must share one size.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"{root}: not a directory")
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not class_dirs:
        raise DataError(f"{root}: no class directories found")
    images = []
    labels = []
    class_names = [d.name for d in class_dirs]
    for index, class_dir in enumerate(class_dirs):
        files = sorted(class_dir.glob("*.pgm"))
        if not files:
            raise DataError(f"{class_dir}: class directory holds no .pgm files")
        for f in files:
            img = read_pgm(f)
            if images and img.shape != images[0].shape:
                raise DataError(
                    f"{f}: image size {img.shape[1]}x{img.shape[0]} does not match "
                    f"{images[0].shape[1]}x{images[0].shape[0]}"
                )
            images.append(img)
            labels.append(index)
    return images, np.asarray(labels, dtype=np.int64), class_names


# ---------------------------------------------------------------------------
# Standardization


@dataclass(frozen=True)
class StandardizationParams:
    """Per-feature mean and standard deviation, fit on the training split only.

    ``constant_mask`` flags features whose training standard deviation was
    below tolerance; those features map to 0.
    """

    mean: np.ndarray
    sd: np.ndarray
    constant_mask: np.ndarray


def fit_standardizer_matrix(X) -> StandardizationParams:
    """Column means and (population) standard deviations of a feature matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError(f"need a nonempty 2-D matrix, got shape {X.shape}")
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    return StandardizationParams(
        mean=mean, sd=sd, constant_mask=sd < CONSTANT_SD_TOL
    )


def fit_standardizer(train: Dataset) -> StandardizationParams:
    return fit_standardizer_matrix(train.features)


def standardize_matrix(params: StandardizationParams, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.mean.shape[0]:
        raise ValueError(
            f"matrix has shape {X.shape}, standardizer was fit on "
            f"{params.mean.shape[0]} features"
        )
    safe_sd = np.where(params.constant_mask, 1.0, params.sd)
    z = (X - params.mean) / safe_sd
    z[:, params.constant_mask] = 0.0
    return z


def apply_standardizer(params: StandardizationParams, data: Dataset) -> Dataset:
    """Z-score ``data`` with training statistics; constant features map to 0."""
    return Dataset(
        features=standardize_matrix(params, data.features),
        labels=data.labels,
        n_classes=data.n_classes,
    )


# ---------------------------------------------------------------------------
# Splitting


@dataclass(frozen=True)
class SplitSpec:
    """Test fraction, RNG seed, and whether to stratify by class."""

    test_fraction: float
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(
                f"test_fraction must lie in (0, 1), got {self.test_fraction}"
            )


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_indices(labels, spec: SplitSpec):
    """Deterministic (train_idx, test_idx) partition of ``range(len(labels))``.

    Stratified mode shuffles every class on its own (seed, class) PCG64
    substream and takes round(class_n * fraction) test samples, at least 1
    and at most class_n - 1 per class. Indices come back sorted.
    """
    labels = as_labels(labels)
    n = labels.shape[0]
    if spec.stratified:
        test_parts = []
        train_parts = []
        for cls in np.unique(labels):
            idx = np.nonzero(labels == cls)[0]
            if idx.shape[0] < 2:
                raise ConfigError(
                    f"class {cls} has {idx.shape[0]} sample(s); stratified "
                    "splitting needs at least 2 per class"
                )
            rng = np.random.default_rng(
                np.random.SeedSequence(spec.seed, spawn_key=(int(cls),))
            )
            perm = rng.permutation(idx)
            n_test = _round_half_up(idx.shape[0] * spec.test_fraction)
            n_test = min(max(n_test, 1), idx.shape[0] - 1)
            test_parts.append(perm[:n_test])
            train_parts.append(perm[n_test:])
        test_idx = np.sort(np.concatenate(test_parts))
        train_idx = np.sort(np.concatenate(train_parts))
    else:
        if n < 2:
            raise ConfigError("splitting needs at least 2 samples")
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
        perm = rng.permutation(n)
        n_test = min(max(_round_half_up(n * spec.test_fraction), 1), n - 1)
        test_idx = np.sort(perm[:n_test])
        train_idx = np.sort(perm[n_test:])
    return train_idx, test_idx


def stratified_split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Partition a dataset into (train, test) per :func:`split_indices`."""
    train_idx, test_idx = split_indices(data.labels, spec)
    make = lambda idx: Dataset(
        features=data.features[idx], labels=data.labels[idx], n_classes=data.n_classes
    )
    return make(train_idx), make(test_idx)


# ---------------------------------------------------------------------------
# Synthetic data


def synth_blobs(
    n_per_class: int,
    n_classes: int,
    n_features: int,
    separation: float,
    noise_sd: float,
    seed: int = 0,
) -> Dataset:
    """Isotropic Gaussian blobs with all class centers ``separation`` apart.

    Centers sit on scaled standard-basis vertices (a regular simplex face),
    which requires ``n_classes <= n_features``. Deterministic given seed.
    """
    if n_classes < 2:
        raise ValueError(f"n_classes must be >= 2, got {n_classes}")
    if n_features < 2:
        raise ValueError(f"n_features must be >= 2, got {n_features}")
    if n_classes > n_features:
        raise ValueError(
            f"equidistant centers need n_classes <= n_features, got "
            f"{n_classes} > {n_features}"
        )
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    if separation < 0 or noise_sd < 0:
        raise ValueError("separation and noise_sd must be nonnegative")
    centers = np.zeros((n_classes, n_features))
    for k in range(n_classes):
        centers[k, k] = separation / math.sqrt(2.0)
    labels = np.repeat(np.arange(n_classes, dtype=np.int64), n_per_class)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    features = centers[labels] + noise_sd * rng.standard_normal(
        (labels.shape[0], n_features)
    )
    return Dataset(features=features, labels=labels, n_classes=n_classes)
