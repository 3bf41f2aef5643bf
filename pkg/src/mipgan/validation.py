"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np

from .core import NUM_CLASSES, ClassLabel, Volume3D


def as_rng(seed) -> np.random.Generator:
    """Return a Generator from a seed, a SeedSequence, or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def check_positive(value, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive and finite, got {value}")
    return value


def check_volume(volume) -> Volume3D:
    if not isinstance(volume, Volume3D):
        raise TypeError(f"expected Volume3D, got {type(volume).__name__}")
    return volume


def check_labels(y, n_samples: int | None = None) -> np.ndarray:
    """Coerce labels to an int64 code array and verify each code is valid."""
    y = np.asarray(y)
    if y.ndim == 0:
        y = y.reshape(1)
    if y.ndim != 1:
        raise ValueError(f"labels must be 1D, got shape {y.shape}")
    if y.size and not np.issubdtype(y.dtype, np.number):
        y = np.array([ClassLabel.from_name(str(v)) for v in y])
    codes = y.astype(np.int64)
    if codes.size and ((codes < 0) | (codes >= NUM_CLASSES)).any():
        bad = sorted(set(int(c) for c in codes if c < 0 or c >= NUM_CLASSES))
        raise ValueError(f"invalid class codes {bad}; valid codes: 0..{NUM_CLASSES - 1}")
    if n_samples is not None and codes.shape[0] != n_samples:
        raise ValueError(f"expected {n_samples} labels, got {codes.shape[0]}")
    return codes


def check_image_batch(X, canvas: tuple[int, int] | None = None) -> np.ndarray:
    """Coerce to a float32 (n, H, W) batch with values in [0, 1]."""
    X = np.asarray(X, dtype=np.float32)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ValueError(f"image batch must be (n, H, W), got shape {X.shape}")
    if canvas is not None and X.shape[1:] != tuple(canvas):
        raise ValueError(f"images are {X.shape[1:]}, expected canvas {tuple(canvas)}")
    if not np.isfinite(X).all():
        raise ValueError("image batch contains non-finite values")
    if X.size and (X.min() < 0.0 or X.max() > 1.0):
        raise ValueError("image batch values must lie in [0, 1]")
    return X


def check_latent(z, latent_dim: int) -> np.ndarray:
    """Coerce to a (n, latent_dim) float array of finite latent seeds."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        z = z[None]
    if z.ndim != 2 or z.shape[1] != latent_dim:
        raise ValueError(f"latent seeds must be (n, {latent_dim}), got shape {z.shape}")
    if not np.isfinite(z).all():
        raise ValueError("latent seeds must be finite")
    return z
