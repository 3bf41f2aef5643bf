"""Synthetic body phantoms with class-specific uptake patterns.

The pipeline needs reproducible volumes whose class is recoverable from the
projected image, so every geometric constant lives in the ANATOMY block below
and the region-energy classifier derives its 2D zones from the same numbers.

Coordinates are fractional (fz, fy, fx) of the volume extent, z index 0 at the
head. Lesion radii are in voxels of the generated grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .core import ClassLabel, Volume3D
from .validation import check_positive

MIN_DIMS = (32, 24, 24)

# --- ANATOMY ---------------------------------------------------------------
# Body background and the three physiological hotspots are identical for all
# classes; only the lesion block below differs per class.
BODY_CENTER = (0.50, 0.50, 0.50)
BODY_SEMI = (0.47, 0.30, 0.36)
BACKGROUND_SUV = 1.0
BACKGROUND_JITTER_SUV = 0.05

BRAIN_CENTER = (0.085, 0.50, 0.50)   # top 15% of z
BRAIN_SEMI = (0.055, 0.10, 0.10)
HEART_CENTER = (0.37, 0.45, 0.36)    # shifted left of the midline column
HEART_SEMI = (0.06, 0.09, 0.09)
BLADDER_CENTER = (0.92, 0.50, 0.50)  # bottom 15% of z
BLADDER_SEMI = (0.04, 0.08, 0.08)
HOTSPOT_SUV = (4.0, 8.0)

LESION_SUV = (5.0, 15.0)
# Lung blobs are large, so their center band depends on the drawn radius:
# the top edge stays below the neck zone and the medial edge clear of the
# oesophagus column (see _lesion_mask).
LUNG_RADIUS_VOX = (6.0, 10.0)
LUNG_Z_TOP_MIN = 0.2744              # body fz of u=0.26, just below the neck zone
LUNG_Z_MAX = 0.46
LUNG_Y = (0.40, 0.60)
LUNG_X_MIN = 0.18                    # mirrored to the right side
LUNG_X_MEDIAL_LIMIT = 0.47           # oesophagus column start
NECK_RADIUS_VOX = (2.5, 4.0)
NECK_Z = (0.16, 0.19)                # adjacent to the brain band
NECK_Y = (0.44, 0.56)
NECK_X = (0.46, 0.54)
OESO_RADIUS_VOX = (1.5, 2.5)
OESO_Z_TOP = (0.20, 0.24)            # starts above the heart band
OESO_Z_BOTTOM = (0.44, 0.50)
OESO_Y = (0.45, 0.55)
OESO_X = (0.47, 0.53)
LYMPH_COUNT = (3, 6)
LYMPH_RADIUS_VOX = (2.0, 4.0)
LYMPH_Z = (0.48, 0.74)               # abdominal band of the torso
LYMPH_Y = (0.35, 0.65)
LYMPH_X = (0.30, 0.70)
SUV_CAP = 30.0
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhantomSpec:
    """Corpus recipe. Same spec + seed always yields byte-identical output."""

    dims: tuple[int, int, int] = (64, 48, 48)
    spacing_mm: tuple[float, float, float] = (4.0, 4.0, 4.0)
    per_class_count: dict = field(default_factory=dict)
    rng_seed: int = 0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if any(d < m for d, m in zip(dims, MIN_DIMS)):
            raise ValueError(f"dims {dims} below minimum {MIN_DIMS}: anatomy degenerates")
        spacing = tuple(float(s) for s in self.spacing_mm)
        object.__setattr__(self, "spacing_mm", spacing)
        for s in spacing:
            check_positive(s, "spacing_mm")
        counts = {ClassLabel(k): int(v) for k, v in self.per_class_count.items()}
        if any(v < 0 for v in counts.values()):
            raise ValueError("per_class_count entries must be >= 0")
        object.__setattr__(self, "per_class_count", counts)


def _fractional_grids(dims):
    z, y, x = dims
    fz = ((np.arange(z) + 0.5) / z).reshape(z, 1, 1)
    fy = ((np.arange(y) + 0.5) / y).reshape(1, y, 1)
    fx = ((np.arange(x) + 0.5) / x).reshape(1, 1, x)
    return fz, fy, fx


def _ellipsoid(grids, center, semi):
    fz, fy, fx = grids
    cz, cy, cx = center
    az, ay, ax = semi
    return (((fz - cz) / az) ** 2 + ((fy - cy) / ay) ** 2 + ((fx - cx) / ax) ** 2) <= 1.0


def _voxel_grids(dims):
    z, y, x = dims
    iz = np.arange(z, dtype=np.float64).reshape(z, 1, 1)
    iy = np.arange(y, dtype=np.float64).reshape(1, y, 1)
    ix = np.arange(x, dtype=np.float64).reshape(1, 1, x)
    return iz, iy, ix


def _sphere_vox(dims, center_frac, radius_vox):
    iz, iy, ix = _voxel_grids(dims)
    cz = center_frac[0] * dims[0]
    cy = center_frac[1] * dims[1]
    cx = center_frac[2] * dims[2]
    return ((iz - cz) ** 2 + (iy - cy) ** 2 + (ix - cx) ** 2) <= radius_vox**2


def _cylinder_vox(dims, z_frac_range, center_yx_frac, radius_vox):
    iz, iy, ix = _voxel_grids(dims)
    z0 = z_frac_range[0] * dims[0]
    z1 = z_frac_range[1] * dims[0]
    cy = center_yx_frac[0] * dims[1]
    cx = center_yx_frac[1] * dims[2]
    in_z = (iz >= z0) & (iz <= z1)
    in_rx = ((iy - cy) ** 2 + (ix - cx) ** 2) <= radius_vox**2
    return in_z & in_rx


def anatomy_masks(dims) -> dict:
    """Boolean masks of the fixed anatomy (body, brain, heart, bladder)."""
    grids = _fractional_grids(dims)
    body = _ellipsoid(grids, BODY_CENTER, BODY_SEMI)
    return {
        "body": body,
        "brain": _ellipsoid(grids, BRAIN_CENTER, BRAIN_SEMI) & body,
        "heart": _ellipsoid(grids, HEART_CENTER, HEART_SEMI) & body,
        "bladder": _ellipsoid(grids, BLADDER_CENTER, BLADDER_SEMI) & body,
    }


def _uniform(rng, lo_hi):
    return float(rng.uniform(lo_hi[0], lo_hi[1]))


def _lesion_mask(label: ClassLabel, rng, dims, body):
    """Class lesion mask. RNG draws happen in a fixed order per class."""
    if label == ClassLabel.NORMAL:
        return np.zeros(dims, dtype=bool), 0.0
    if label == ClassLabel.LUNG:
        side = int(rng.integers(2))
        radius = _uniform(rng, LUNG_RADIUS_VOX)
        # bands clamp to stay nonempty on coarse grids, where a 6-10 voxel
        # blob is too large to clear the neck zone and midline completely
        z_lo = min(LUNG_Z_TOP_MIN + radius / dims[0] + 0.005, LUNG_Z_MAX - 0.02)
        x_hi = max(LUNG_X_MEDIAL_LIMIT - radius / dims[2], LUNG_X_MIN + 0.02)
        cz = _uniform(rng, (z_lo, LUNG_Z_MAX))
        cy = _uniform(rng, LUNG_Y)
        cx = _uniform(rng, (LUNG_X_MIN, x_hi))
        if side:
            cx = 1.0 - cx
        suv = _uniform(rng, LESION_SUV)
        return _sphere_vox(dims, (cz, cy, cx), radius) & body, suv
    if label == ClassLabel.HEAD_NECK:
        cz = _uniform(rng, NECK_Z)
        cy = _uniform(rng, NECK_Y)
        cx = _uniform(rng, NECK_X)
        radius = _uniform(rng, NECK_RADIUS_VOX)
        suv = _uniform(rng, LESION_SUV)
        return _sphere_vox(dims, (cz, cy, cx), radius) & body, suv
    if label == ClassLabel.OESOPHAGUS:
        z0 = _uniform(rng, OESO_Z_TOP)
        z1 = _uniform(rng, OESO_Z_BOTTOM)
        cy = _uniform(rng, OESO_Y)
        cx = _uniform(rng, OESO_X)
        radius = _uniform(rng, OESO_RADIUS_VOX)
        suv = _uniform(rng, LESION_SUV)
        return _cylinder_vox(dims, (z0, z1), (cy, cx), radius) & body, suv
    # lymphoma: several small scattered blobs, each with its own intensity
    count = int(rng.integers(LYMPH_COUNT[0], LYMPH_COUNT[1] + 1))
    mask = np.zeros(dims, dtype=bool)
    values = np.zeros(dims, dtype=np.float32)
    for _ in range(count):
        cz = _uniform(rng, LYMPH_Z)
        cy = _uniform(rng, LYMPH_Y)
        cx = _uniform(rng, LYMPH_X)
        radius = _uniform(rng, LYMPH_RADIUS_VOX)
        suv = _uniform(rng, LESION_SUV)
        blob = _sphere_vox(dims, (cz, cy, cx), radius) & body
        mask |= blob
        values = np.where(blob, np.maximum(values, np.float32(suv)), values)
    return mask, values


def make_phantom_volume(label, seed: int, spec: PhantomSpec | None = None,
                        return_lesion_mask: bool = False):
    """Generate one phantom volume for `label`, deterministic in (label, seed, spec).

    The base anatomy (body, hotspots, noise) consumes the RNG in a fixed order
    before any lesion draw, so volumes of different classes built from the same
    seed differ only inside the returned lesion mask.
    """
    label = ClassLabel(label)
    spec = spec if spec is not None else PhantomSpec()
    dims = spec.dims
    rng = np.random.default_rng(int(seed))

    masks = anatomy_masks(dims)
    body = masks["body"]

    vol = np.zeros(dims, dtype=np.float32)
    jitter = rng.standard_normal(dims).astype(np.float32) * np.float32(BACKGROUND_JITTER_SUV)
    vol[body] = np.float32(BACKGROUND_SUV) + jitter[body]

    for organ in ("brain", "heart", "bladder"):
        suv = np.float32(_uniform(rng, HOTSPOT_SUV))
        vol = np.where(masks[organ], np.maximum(vol, suv), vol)

    lesion_mask, lesion_value = _lesion_mask(label, rng, dims, body)
    if np.isscalar(lesion_value):
        lesion = np.float32(lesion_value) * lesion_mask
    else:
        lesion = lesion_value
    vol = np.where(lesion_mask, np.maximum(vol, lesion), vol)

    vol = np.clip(vol, 0.0, np.float32(SUV_CAP))
    volume = Volume3D(voxels=vol, spacing_mm=spec.spacing_mm)
    if return_lesion_mask:
        return volume, lesion_mask
    return volume


@dataclass(frozen=True)
class CorpusItem:
    item_id: str
    label: ClassLabel
    volume: Volume3D
    filename: str


def derive_seed(rng_seed: int, label: ClassLabel, index: int) -> int:
    """Stable per-volume seed so corpus items are independent and reproducible."""
    seq = np.random.SeedSequence((int(rng_seed), int(label), int(index)))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def make_corpus(spec: PhantomSpec) -> list[CorpusItem]:
    """Generate `per_class_count[label]` volumes per class, in class-code order."""
    items = []
    for label in ClassLabel:
        count = spec.per_class_count.get(label, 0)
        for i in range(count):
            seed = derive_seed(spec.rng_seed, label, i)
            item_id = f"{label.key}_{i:04d}"
            volume = make_phantom_volume(label, seed, spec)
            items.append(CorpusItem(item_id, label, volume, f"{item_id}.pvol"))
    return items


def save_corpus(items, out_dir) -> None:
    """Write PVOL1 files plus a manifest.csv into `out_dir`."""
    from pathlib import Path

    from .fileio import ManifestRow, write_manifest, write_pvol

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for item in items:
        write_pvol(out_dir / item.filename, item.volume)
        rows.append(ManifestRow(item.item_id, item.label, item.filename))
    write_manifest(out_dir / "manifest.csv", rows)


# ---------------------------------------------------------------------------
# Region-energy oracle classifier
#
# Zones live in (u, v) coordinates: fractions of the body bounding box found
# in the image (u down from the head, v left to right). They are projections
# of the lesion placement bands above, with the fixed hotspots carved out.

_BODY_Z_EXTENT = (BODY_CENTER[0] - BODY_SEMI[0], BODY_CENTER[0] + BODY_SEMI[0])
_BODY_X_EXTENT = (BODY_CENTER[2] - BODY_SEMI[2], BODY_CENTER[2] + BODY_SEMI[2])


def _u_of_fz(fz):
    lo, hi = _BODY_Z_EXTENT
    return (fz - lo) / (hi - lo)


def _v_of_fx(fx):
    lo, hi = _BODY_X_EXTENT
    return (fx - lo) / (hi - lo)


# the neck band starts well below the projected brain (bottom at u ~0.117):
# generated images blur the brain by a few pixels, and the zone must not
# catch that smear on any canvas the pipeline produces
ZONE_BANDS = {
    ClassLabel.HEAD_NECK: ((0.16, 0.25), ((0.36, 0.64),)),
    ClassLabel.LUNG: ((0.24, 0.48), ((0.04, 0.40), (0.60, 0.96))),
    ClassLabel.OESOPHAGUS: ((0.24, 0.48), ((0.42, 0.58),)),
    ClassLabel.LYMPHOMA: ((0.44, 0.78), ((0.08, 0.92),)),
}

# Heart projects into the lung and oesophagus zones; exclude it with margin.
_HEART_UV = (_u_of_fz(HEART_CENTER[0]), _v_of_fx(HEART_CENTER[2]))
_HEART_UV_SEMI = (
    1.3 * HEART_SEMI[0] / (_BODY_Z_EXTENT[1] - _BODY_Z_EXTENT[0]) + 0.02,
    1.3 * HEART_SEMI[2] / (_BODY_X_EXTENT[1] - _BODY_X_EXTENT[0]) + 0.02,
)

#: Pixels above this count as body when locating the bounding box.
BODY_FLOOR = 0.015
#: Normalized intensity subtracted before zone energies are averaged.
EXCESS_FLOOR = 2.5 / SUV_CAP
#: Minimum winning zone score; below it the image is called normal.
DEFAULT_THRESHOLD = 0.005


def zone_masks(shape, bbox) -> dict:
    """Rasterize the signature zones for an image of `shape` and body `bbox`."""
    h, w = shape
    r0, r1, c0, c1 = bbox
    rows = np.arange(h).reshape(h, 1)
    cols = np.arange(w).reshape(1, w)
    u = (rows + 0.5 - r0) / max(r1 - r0, 1)
    v = (cols + 0.5 - c0) / max(c1 - c0, 1)
    heart = (
        ((u - _HEART_UV[0]) / _HEART_UV_SEMI[0]) ** 2
        + ((v - _HEART_UV[1]) / _HEART_UV_SEMI[1]) ** 2
    ) <= 1.0
    masks = {}
    for label, (u_band, v_bands) in ZONE_BANDS.items():
        in_u = (u >= u_band[0]) & (u < u_band[1])
        in_v = np.zeros((1, w), dtype=bool)
        for v_band in v_bands:
            in_v |= (v >= v_band[0]) & (v < v_band[1])
        masks[label] = in_u & in_v & ~heart
    return masks


def region_energy_scores(pixels) -> dict:
    """Per-class mean excess energy inside each signature zone."""
    if hasattr(pixels, "pixels"):  # MipImage
        pixels = pixels.pixels
    pixels = np.asarray(pixels, dtype=np.float32)
    body = pixels > BODY_FLOOR
    if not body.any():
        return {label: 0.0 for label in ZONE_BANDS}
    rows = np.flatnonzero(body.any(axis=1))
    cols = np.flatnonzero(body.any(axis=0))
    bbox = (rows[0], rows[-1] + 1, cols[0], cols[-1] + 1)
    excess = np.maximum(pixels - EXCESS_FLOOR, 0.0)
    scores = {}
    for label, mask in zone_masks(pixels.shape, bbox).items():
        scores[label] = float(excess[mask].mean()) if mask.any() else 0.0
    return scores


def region_energy_label(pixels, threshold: float = DEFAULT_THRESHOLD) -> ClassLabel:
    """Classify a canvas image by its strongest signature zone."""
    scores = region_energy_scores(pixels)
    best = max(scores, key=lambda label: scores[label])
    if scores[best] < threshold:
        return ClassLabel.NORMAL
    return best


class RegionEnergyClassifier(BaseEstimator, ClassifierMixin):
    """Rule-based conditioning oracle over the phantom anatomy zones.

    Works on preprocessed coronal canvas images in [0, 1]. `fit` only records
    the class set; the decision rule is fixed by the anatomy block.
    """

    def __init__(self, threshold: float = DEFAULT_THRESHOLD):
        self.threshold = threshold

    def fit(self, X=None, y=None):
        self.classes_ = np.arange(len(ClassLabel))
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float32)
        if X.ndim == 2:
            X = X[None]
        return np.array(
            [int(region_energy_label(img, threshold=self.threshold)) for img in X],
            dtype=np.int64,
        )

    def score_map(self, X) -> np.ndarray:
        """(n, 4) zone scores in the order head_neck, lung, oesophagus, lymphoma."""
        X = np.asarray(X, dtype=np.float32)
        if X.ndim == 2:
            X = X[None]
        order = list(ZONE_BANDS)
        return np.array(
            [[region_energy_scores(img)[label] for label in order] for img in X],
            dtype=np.float64,
        )
