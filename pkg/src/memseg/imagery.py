"""Raster types and file I/O for probability maps and label images.

The in-memory convention is fixed: values of a :class:`ProbabilityMap` are
always P(pixel is membrane). Input files with the opposite display polarity
are flipped at load time, so downstream code never sees both conventions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import ImageFormatError, LabelOverflowError

MIN_SIDE = 8  # smallest workable raster


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ProbabilityMap:
    """Dense per-pixel membrane probability, values in [0, 1]."""

    width: int
    height: int
    values: np.ndarray  # float64, shape (height, width)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.height, self.width):
            raise ValueError(f"values shape {v.shape} != (height, width) = "
                             f"({self.height}, {self.width})")
        if self.width < MIN_SIDE or self.height < MIN_SIDE:
            raise ValueError(f"raster must be at least {MIN_SIDE}x{MIN_SIDE}, "
                             f"got {self.width}x{self.height}")
        if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("probability values must lie in [0, 1]")
        object.__setattr__(self, "values", _freeze(v))

    @staticmethod
    def from_array(values: np.ndarray) -> "ProbabilityMap":
        values = np.asarray(values, dtype=np.float64)
        h, w = values.shape
        return ProbabilityMap(width=w, height=h, values=values)


@dataclass(frozen=True)
class LabelImage:
    """Integer segment labels; 0 is reserved for membrane/background."""

    width: int
    height: int
    labels: np.ndarray  # int32, shape (height, width)

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.shape != (self.height, self.width):
            raise ValueError(f"labels shape {lab.shape} != (height, width) = "
                             f"({self.height}, {self.width})")
        if lab.min(initial=0) < 0:
            raise ValueError("labels must be non-negative")
        object.__setattr__(self, "labels", _freeze(lab.astype(np.int32)))

    @staticmethod
    def from_array(labels: np.ndarray) -> "LabelImage":
        labels = np.asarray(labels)
        h, w = labels.shape
        return LabelImage(width=w, height=h, labels=labels)

    def num_segments(self) -> int:
        return int(len(np.unique(self.labels[self.labels > 0])))


def _read_single_channel(path) -> np.ndarray:
    try:
        img = Image.open(path)
        img.load()
    except (OSError, ValueError, SyntaxError) as exc:
        raise ImageFormatError(f"cannot read image {path}: {exc}") from exc
    if img.width == 0 or img.height == 0:
        raise ImageFormatError(f"zero-size image: {path}")
    if img.mode in ("L", "I;16", "I;16B", "I"):
        return np.asarray(img)
    raise ImageFormatError(
        f"expected a single-channel 8/16-bit image, got mode {img.mode!r}: {path}")


def load_probability_map(path, polarity: str = "high") -> ProbabilityMap:
    """Load an 8/16-bit PGM or PNG as P(membrane).

    polarity "high": bright pixels are membrane; "low": bright pixels are
    cell interior, so values are flipped v -> 1 - v after scaling.
    """
    if polarity not in ("high", "low"):
        raise ValueError(f"polarity must be 'high' or 'low', got {polarity!r}")
    raw = _read_single_channel(path)
    full = 255.0 if raw.dtype == np.uint8 else 65535.0
    values = raw.astype(np.float64) / full
    if polarity == "low":
        values = 1.0 - values
    return ProbabilityMap.from_array(values)


def save_probability_map(pmap: ProbabilityMap, path) -> None:
    """Write a probability map as a 16-bit grayscale PNG (quantized)."""
    arr = np.round(pmap.values * 65535.0).astype(np.uint16)
    Image.fromarray(arr).save(path, format="PNG")


def save_label_image(img: LabelImage, path, palette_path=None) -> None:
    """Write labels as 16-bit PNG; optionally a color visualization alongside."""
    if img.labels.max(initial=0) > 65535:
        raise LabelOverflowError(
            f"labels up to {int(img.labels.max())} do not fit 16 bits")
    arr = img.labels.astype(np.uint16)
    Image.fromarray(arr).save(path, format="PNG")
    if palette_path is not None:
        Image.fromarray(label_palette(img)).save(palette_path, format="PNG")


def load_label_image(path) -> LabelImage:
    arr = _read_single_channel(path)
    return LabelImage.from_array(arr.astype(np.int32))


def label_palette(img: LabelImage) -> np.ndarray:
    """Map labels to stable pseudo-random colors (background stays black)."""
    rng = np.random.default_rng(0)
    lut = rng.integers(40, 255, size=(int(img.labels.max(initial=0)) + 1, 3),
                       dtype=np.uint8)
    lut[0] = 0
    return lut[img.labels]


def save_mask(mask: np.ndarray, path) -> None:
    """Write a boolean raster as an 8-bit PNG (255 = true)."""
    Image.fromarray((np.asarray(mask, dtype=bool) * np.uint8(255))).save(
        path, format="PNG")
