"""Shared domain types: class labels, 3D SUV volumes, 2D canvas images."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

#: Upper SUV window bound; voxels are clipped here before mapping to [0, 1].
SUV_MAX = 30.0

#: Isotropic voxel pitch (mm) the pipeline resamples to.
TARGET_SPACING_MM = 2.0

#: Network canvas (rows, cols). Chosen so a 5x3 seed map doubled five times
#: lands exactly on it.
CANVAS = (160, 96)


class ClassLabel(IntEnum):
    """The five image classes. Integer codes are stable across all file formats."""

    NORMAL = 0
    LUNG = 1
    HEAD_NECK = 2
    OESOPHAGUS = 3
    LYMPHOMA = 4

    @property
    def key(self) -> str:
        """Lowercase name used on the CLI and in manifests."""
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str) -> "ClassLabel":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            valid = ", ".join(label.key for label in cls)
            raise ValueError(f"unknown class {name!r}; valid names: {valid}") from None

    @classmethod
    def from_code(cls, code: int) -> "ClassLabel":
        try:
            return cls(int(code))
        except ValueError:
            raise ValueError(f"unknown class code {code!r}; valid codes: 0..4") from None


CLASS_NAMES = tuple(label.key for label in ClassLabel)
NUM_CLASSES = len(ClassLabel)


@dataclass
class Volume3D:
    """SUV-scaled voxel grid, z-major, with per-axis spacing in millimetres.

    Axis order is (z, y, x) with z index 0 at the head, so coronal projections
    come out upright without flipping.
    """

    voxels: np.ndarray
    spacing_mm: tuple[float, float, float]

    def __post_init__(self):
        self.voxels = np.ascontiguousarray(self.voxels, dtype=np.float32)
        if self.voxels.ndim != 3:
            raise ValueError(f"voxels must be 3D (z, y, x), got shape {self.voxels.shape}")
        self.spacing_mm = tuple(float(s) for s in self.spacing_mm)
        if len(self.spacing_mm) != 3:
            raise ValueError("spacing_mm must have three entries (z, y, x)")
        if not all(np.isfinite(s) and s > 0 for s in self.spacing_mm):
            raise ValueError(f"spacings must be finite and positive, got {self.spacing_mm}")
        if not np.isfinite(self.voxels).all():
            raise ValueError("voxel values must be finite")
        if (self.voxels < 0).any():
            raise ValueError("voxel values must be non-negative (SUV scale)")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.voxels.shape


@dataclass
class MipImage:
    """2D projection image with pixels in [0, 1] and an attached class label."""

    pixels: np.ndarray
    label: ClassLabel
    source_id: str = ""

    def __post_init__(self):
        self.pixels = np.ascontiguousarray(self.pixels, dtype=np.float32)
        if self.pixels.ndim != 2:
            raise ValueError(f"pixels must be 2D, got shape {self.pixels.shape}")
        self.label = ClassLabel(self.label)
        if not np.isfinite(self.pixels).all():
            raise ValueError("pixel values must be finite")
        lo, hi = float(self.pixels.min(initial=0.0)), float(self.pixels.max(initial=0.0))
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"pixel values must lie in [0, 1], got range [{lo}, {hi}]")

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape
