"""Volume preprocessing: isotropic resample, SUV window, MIP, canvas fit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .core import CANVAS, SUV_MAX, TARGET_SPACING_MM, ClassLabel, MipImage, Volume3D
from .validation import check_positive, check_volume

PROJECTION_AXES = {"y": 1, "x": 2}


@dataclass(frozen=True)
class PipelineConfig:
    target_spacing_mm: float = TARGET_SPACING_MM
    suv_max: float = SUV_MAX
    projection_axis: str = "y"
    canvas: tuple[int, int] = CANVAS

    def __post_init__(self):
        check_positive(self.target_spacing_mm, "target_spacing_mm")
        check_positive(self.suv_max, "suv_max")
        if self.projection_axis not in PROJECTION_AXES:
            raise ValueError(
                f"projection_axis must be one of {sorted(PROJECTION_AXES)}, "
                f"got {self.projection_axis!r}"
            )
        canvas = (int(self.canvas[0]), int(self.canvas[1]))
        object.__setattr__(self, "canvas", canvas)
        if canvas[0] < 1 or canvas[1] < 1:
            raise ValueError(f"canvas must be positive, got {canvas}")


def _nearest_indices(n_in: int, spacing_in: float, n_out: int, target: float) -> np.ndarray:
    """Index of the input voxel whose center is nearest each output center.

    Ties break toward the lower index. Uses exact midpoint comparisons
    (no division) so the result matches a brute-force distance scan.
    """
    centers_out = (np.arange(n_out, dtype=np.float64) + 0.5) * target
    midpoints = (np.arange(1, n_in, dtype=np.float64)) * spacing_in
    idx = np.searchsorted(midpoints, centers_out, side="left")
    return np.clip(idx, 0, n_in - 1)


def resample_nearest(volume: Volume3D, target_spacing_mm: float) -> Volume3D:
    """Resample to an isotropic grid by nearest-center lookup (k=1)."""
    check_volume(volume)
    target = check_positive(target_spacing_mm, "target_spacing_mm")
    dims_out = []
    index_maps = []
    for n_in, spacing in zip(volume.dims, volume.spacing_mm):
        n_out = max(1, int(np.floor(n_in * spacing / target + 0.5)))
        dims_out.append(n_out)
        index_maps.append(_nearest_indices(n_in, spacing, n_out, target))
    iz, iy, ix = index_maps
    voxels = volume.voxels[np.ix_(iz, iy, ix)]
    return Volume3D(voxels=voxels, spacing_mm=(target, target, target))


def normalize_suv(volume: Volume3D, suv_max: float = SUV_MAX) -> Volume3D:
    """Clamp to [0, suv_max] and scale linearly to [0, 1]."""
    check_volume(volume)
    cap = check_positive(suv_max, "suv_max")
    voxels = np.clip(volume.voxels, 0.0, np.float32(cap)) / np.float32(cap)
    return Volume3D(voxels=voxels, spacing_mm=volume.spacing_mm)


def mip_project(volume: Volume3D, axis: str = "y") -> np.ndarray:
    """Maximum intensity projection along y or x; output keeps (z, other) order."""
    check_volume(volume)
    if axis not in PROJECTION_AXES:
        raise ValueError(
            f"MIP axis must be one of {sorted(PROJECTION_AXES)} (projecting over z "
            f"would collapse the body axis), got {axis!r}"
        )
    return volume.voxels.max(axis=PROJECTION_AXES[axis])


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable bilinear resize with half-pixel centers and clamped edges."""
    img = np.asarray(img, dtype=np.float32)
    h, w = img.shape

    def axis_coords(n_in, n_out):
        src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1.0)
        i0 = np.floor(src).astype(np.int64)
        i1 = np.minimum(i0 + 1, n_in - 1)
        frac = (src - i0).astype(np.float32)
        return i0, i1, frac

    r0, r1, fr = axis_coords(h, out_h)
    c0, c1, fc = axis_coords(w, out_w)
    rows = img[r0] * (1.0 - fr)[:, None] + img[r1] * fr[:, None]
    out = rows[:, c0] * (1.0 - fc)[None, :] + rows[:, c1] * fc[None, :]
    return out.astype(np.float32)


def fit_to_canvas(img: np.ndarray, canvas: tuple[int, int] = CANVAS) -> np.ndarray:
    """Rescale isotropically to fit inside the canvas, then letterbox with zeros."""
    img = np.asarray(img, dtype=np.float32)
    if img.ndim != 2 or img.size == 0:
        raise ValueError(f"expected a nonempty 2D image, got shape {img.shape}")
    canvas_h, canvas_w = int(canvas[0]), int(canvas[1])
    h, w = img.shape
    scale = min(canvas_h / h, canvas_w / w)
    new_h = max(1, int(np.floor(h * scale + 0.5)))
    new_w = max(1, int(np.floor(w * scale + 0.5)))
    resized = bilinear_resize(img, new_h, new_w)
    out = np.zeros((canvas_h, canvas_w), dtype=np.float32)
    top = (canvas_h - new_h) // 2
    left = (canvas_w - new_w) // 2
    out[top : top + new_h, left : left + new_w] = resized
    return out


def preprocess(volume: Volume3D, label, cfg: PipelineConfig | None = None,
               source_id: str = "") -> MipImage:
    """Full chain: resample -> SUV window -> MIP -> canvas fit."""
    cfg = cfg if cfg is not None else PipelineConfig()
    resampled = resample_nearest(volume, cfg.target_spacing_mm)
    windowed = normalize_suv(resampled, cfg.suv_max)
    projected = mip_project(windowed, cfg.projection_axis)
    pixels = fit_to_canvas(projected, cfg.canvas)
    return MipImage(pixels=pixels, label=ClassLabel(label), source_id=source_id)


class MipPreprocessor(BaseEstimator, TransformerMixin):
    """Stateless transformer turning Volume3D sequences into canvas image batches."""

    def __init__(self, target_spacing_mm: float = TARGET_SPACING_MM,
                 suv_max: float = SUV_MAX, projection_axis: str = "y",
                 canvas: tuple[int, int] = CANVAS):
        self.target_spacing_mm = target_spacing_mm
        self.suv_max = suv_max
        self.projection_axis = projection_axis
        self.canvas = canvas

    def _config(self) -> PipelineConfig:
        return PipelineConfig(
            target_spacing_mm=self.target_spacing_mm,
            suv_max=self.suv_max,
            projection_axis=self.projection_axis,
            canvas=tuple(self.canvas),
        )

    def fit(self, X=None, y=None):
        self._config()  # validates parameters
        return self

    def transform(self, X) -> np.ndarray:
        cfg = self._config()
        images = [
            preprocess(check_volume(v), ClassLabel.NORMAL, cfg).pixels for v in X
        ]
        if not images:
            return np.zeros((0,) + cfg.canvas, dtype=np.float32)
        return np.stack(images)
