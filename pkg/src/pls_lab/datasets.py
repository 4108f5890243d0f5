"""Dataset assembly: IDX ingestion, subsetting, and synthetic fixtures.

Images are flattened to float64 rows scaled into [0, 1]; classification
targets are one-hot rows, reconstruction targets are the inputs
themselves. Subsetting shuffles with a seeded stream and takes a prefix,
so a given (seed, limit) always selects the same samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .idx import load_idx
from .rng import SeededRng


@dataclass
class Dataset:
    """Flattened train/test inputs plus optional integer labels."""

    train_inputs: np.ndarray  # (n, d) float64 in [0, 1]
    train_labels: np.ndarray | None
    test_inputs: np.ndarray | None = None
    test_labels: np.ndarray | None = None
    image_shape: tuple[int, int] | None = None
    num_classes: int | None = None

    def __post_init__(self):
        if self.train_labels is not None:
            if self.train_labels.shape[0] != self.train_inputs.shape[0]:
                raise ValueError("label count does not match sample count")
            if self.num_classes is None:
                raise ValueError("labeled datasets must declare num_classes")
            for labels in (self.train_labels, self.test_labels):
                if labels is not None and (
                    labels.min() < 0 or labels.max() >= self.num_classes
                ):
                    raise ValueError("labels must lie in [0, num_classes)")

    @property
    def n(self) -> int:
        return self.train_inputs.shape[0]

    @property
    def d(self) -> int:
        return self.train_inputs.shape[1]

    def train_targets(self, task: str) -> np.ndarray:
        if task == "classification":
            if self.train_labels is None:
                raise ValueError("classification needs labels")
            return one_hot(self.train_labels, self.num_classes)
        if task == "reconstruction":
            return self.train_inputs
        raise ValueError("task must be 'classification' or 'reconstruction'")

    def test_targets(self, task: str) -> np.ndarray | None:
        if self.test_inputs is None:
            return None
        if task == "classification":
            if self.test_labels is None:
                return None
            return one_hot(self.test_labels, self.num_classes)
        return self.test_inputs


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    out = np.zeros((labels.shape[0], num_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def _flatten_images(raw: np.ndarray) -> tuple[np.ndarray, tuple[int, int]]:
    n, rows, cols = raw.shape
    return raw.reshape(n, rows * cols).astype(np.float64) / 255.0, (rows, cols)


def from_idx(
    images_path,
    labels_path=None,
    test_images_path=None,
    test_labels_path=None,
    num_classes: int = 10,
) -> Dataset:
    """Load a dataset from IDX files; labels are optional (reconstruction)."""
    train_inputs, image_shape = _flatten_images(load_idx(images_path))
    train_labels = None
    if labels_path is not None:
        train_labels = load_idx(labels_path).astype(np.int64)
    test_inputs = test_labels = None
    if test_images_path is not None:
        test_inputs, _ = _flatten_images(load_idx(test_images_path))
        if test_labels_path is not None:
            test_labels = load_idx(test_labels_path).astype(np.int64)
    return Dataset(
        train_inputs,
        train_labels,
        test_inputs,
        test_labels,
        image_shape,
        num_classes if train_labels is not None else None,
    )


def subset(dataset: Dataset, limit: int, rng: SeededRng) -> Dataset:
    """Seeded-shuffle prefix of the training split; the test split is kept."""
    if limit <= 0:
        raise ValueError("limit must be positive")
    if limit >= dataset.n:
        return dataset
    order = rng.permutation(dataset.n)[:limit]
    return Dataset(
        dataset.train_inputs[order],
        None if dataset.train_labels is None else dataset.train_labels[order],
        dataset.test_inputs,
        dataset.test_labels,
        dataset.image_shape,
        dataset.num_classes,
    )


def synthetic_digits(
    n: int,
    seed: int,
    rows: int = 28,
    cols: int = 28,
    num_classes: int = 10,
    label_noise: float = 0.10,
) -> tuple[np.ndarray, np.ndarray]:
    """Digit-like uint8 image stack with balanced labels.

    Each class is a fixed arrangement of a few saturated strokes; samples
    jitter stroke centers and amplitudes, add class-uninformative clutter
    and paper-like background texture, and a small fraction of labels is
    resampled. The texture and occasional bold samples are deliberate:
    they raise the local curvature of network losses enough that step-size
    instability phenomena show up at desk scale (1000 samples, mini-batch
    gradients averaged over the batch) the way they do on full-size
    handwritten-digit corpora.
    """
    rng = SeededRng(seed)
    yy, xx = np.mgrid[0:rows, 0:cols].astype(np.float64)
    class_rng = SeededRng(0xD161).spawn(7)
    blobs_per_class = 3
    class_blobs = []
    for _ in range(num_classes):
        centers = class_rng.uniform_array(blobs_per_class * 2, 0.25, 0.75)
        widths = class_rng.uniform_array(blobs_per_class, 0.09, 0.16)
        class_blobs.append((centers.reshape(blobs_per_class, 2), widths))

    images = np.zeros((n, rows, cols), dtype=np.uint8)
    labels = (np.arange(n) % num_classes).astype(np.int64)
    labels = labels[rng.permutation(n)]
    for i in range(n):
        centers, widths = class_blobs[labels[i]]
        jitter = rng.uniform_array(blobs_per_class * 2, -0.10, 0.10).reshape(-1, 2)
        amps = rng.uniform_array(blobs_per_class, 1.2, 1.9)
        canvas = np.zeros((rows, cols))
        for (cy, cx), (jy, jx), w, amp in zip(centers, jitter, widths, amps):
            dy = (yy / rows - (cy + jy)) ** 2
            dx = (xx / cols - (cx + jx)) ** 2
            canvas += amp * np.exp(-(dy + dx) / (2.0 * w * w))
        for _ in range(4):
            cy, cx = rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)
            w = rng.uniform(0.04, 0.12)
            amp = rng.uniform(0.4, 1.5)
            dy = (yy / rows - cy) ** 2
            dx = (xx / cols - cx) ** 2
            canvas += amp * np.exp(-(dy + dx) / (2.0 * w * w))
        if rng.uniform() < 0.10:
            canvas *= 1.7  # occasional bold sample, a heavy intensity tail
        canvas = np.clip(canvas, 0.0, 1.0)
        canvas[canvas < 0.10] = 0.0
        paper = rng.uniform_array(rows * cols, 0.0, 0.30).reshape(rows, cols)
        canvas = np.clip(canvas + paper, 0.0, 1.0)
        images[i] = np.round(canvas * 255.0).astype(np.uint8)
        if label_noise > 0.0 and rng.uniform() < label_noise:
            labels[i] = rng.randint(num_classes)
    return images, labels.astype(np.uint8)
