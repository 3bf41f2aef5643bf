"""Latent-space walks and memorization metrics.

A walk renders the generator along a path between two latent seeds (and
optionally between two class conditions) and scores each step: discriminator
realism, deviation from the straight pixel blend of the endpoints (a
memorizing generator scores ~0 there), and nearest-neighbor distance to a
reference corpus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .checkpoint import Checkpoint
from .core import ClassLabel
from .network import Discriminator, Generator, pixel_unscale
from .validation import check_latent

WALK_MODES = ("first_coord", "lerp", "label_lerp")


@dataclass(frozen=True)
class WalkSpec:
    mode: str = "first_coord"
    steps: int = 10
    a: float = 1.0
    b: float = 10.0
    z_start: np.ndarray | None = None
    z_end: np.ndarray | None = None
    label_start: ClassLabel = ClassLabel.NORMAL
    label_end: ClassLabel | None = None

    def __post_init__(self):
        if self.mode not in WALK_MODES:
            raise ValueError(f"mode must be one of {WALK_MODES}, got {self.mode!r}")
        if self.steps < 2:
            raise ValueError("steps must be >= 2")
        if self.mode in ("lerp", "label_lerp") and (
            self.z_start is None or self.z_end is None
        ):
            raise ValueError(f"mode {self.mode!r} needs z_start and z_end")
        if self.mode == "label_lerp" and self.label_end is None:
            raise ValueError("label_lerp needs label_end")


def first_coord_seeds(a: float, b: float, n: int, latent_dim: int = 100) -> np.ndarray:
    """Seeds [a..b, 0, ..., 0] with the first coordinate evenly spaced."""
    if n < 2:
        raise ValueError("need at least two steps")
    seeds = np.zeros((n, latent_dim), dtype=np.float64)
    k = np.arange(n, dtype=np.float64)
    seeds[:, 0] = a + k * (b - a) / (n - 1)
    return seeds


def lerp_seeds(z_start, z_end, n: int) -> np.ndarray:
    """Straight-line interpolation with t = k/(n-1); endpoints are exact."""
    if n < 2:
        raise ValueError("need at least two steps")
    z_start = np.asarray(z_start, dtype=np.float64)
    z_end = np.asarray(z_end, dtype=np.float64)
    if z_start.shape != z_end.shape:
        raise ValueError("z_start and z_end must have the same shape")
    t = (np.arange(n, dtype=np.float64) / (n - 1))[:, None]
    seeds = (1.0 - t) * z_start[None, :] + t * z_end[None, :]
    seeds[0], seeds[-1] = z_start, z_end  # endpoints exact regardless of rounding
    return seeds


@dataclass
class WalkReport:
    images: np.ndarray          # (steps, H, W) in [0, 1]
    ts: np.ndarray              # interpolation fraction per step
    realism: np.ndarray         # discriminator output per step
    blend_deviation: np.ndarray
    nn_distance: np.ndarray | None = None
    spec: WalkSpec | None = None

    METRIC_HEADER = "step,t,realism,blend_deviation,nn_distance"

    def metrics_csv(self) -> str:
        lines = [self.METRIC_HEADER]
        for k in range(len(self.images)):
            nn = float("nan") if self.nn_distance is None else self.nn_distance[k]
            lines.append(
                f"{k},{self.ts[k]!r},{self.realism[k]!r},"
                f"{self.blend_deviation[k]!r},{nn!r}"
            )
        return "\n".join(lines) + "\n"

    def strip_image(self) -> np.ndarray:
        """All steps concatenated left to right."""
        return np.concatenate(list(self.images), axis=1)


def blend_deviation(images, ts) -> np.ndarray:
    """Mean |image_k - straight pixel blend of the endpoints| per step."""
    images = np.asarray(images, dtype=np.float64)
    ts = np.asarray(ts, dtype=np.float64)
    if images.ndim != 3 or images.shape[0] != ts.shape[0]:
        raise ValueError("need one t per image")
    if images.shape[0] < 3:
        raise ValueError("blend deviation needs at least 3 steps")
    first, last = images[0], images[-1]
    out = np.empty(images.shape[0])
    for k, (img, t) in enumerate(zip(images, ts)):
        blend = (1.0 - t) * first + t * last
        out[k] = np.abs(img - blend).mean()
    return out


def nn_memorization_score(images, training_images) -> np.ndarray:
    """Per image: min over the training set of the mean absolute pixel distance."""
    images = np.asarray(images, dtype=np.float64)
    training_images = np.asarray(training_images, dtype=np.float64)
    if training_images.ndim != 3 or training_images.shape[0] == 0:
        raise ValueError("training_images must be a nonempty (n, H, W) batch")
    if images.ndim == 2:
        images = images[None]
    if images.shape[1:] != training_images.shape[1:]:
        raise ValueError("query and training images must share the canvas")
    out = np.empty(images.shape[0])
    for k, img in enumerate(images):
        out[k] = np.abs(training_images - img[None]).mean(axis=(1, 2)).min()
    return out


class PixelBlendGenerator:
    """Memorizing-generator stand-in: every step is the literal pixel blend
    of its two endpoint images. Validates the blend_deviation metric."""

    def __init__(self, image_start, image_end):
        self.image_start = np.asarray(image_start, dtype=np.float64)
        self.image_end = np.asarray(image_end, dtype=np.float64)
        if self.image_start.shape != self.image_end.shape:
            raise ValueError("endpoint images must share a shape")

    def generate(self, t: float) -> np.ndarray:
        return (1.0 - float(t)) * self.image_start + float(t) * self.image_end

    def generate_path(self, ts) -> np.ndarray:
        return np.stack([self.generate(t) for t in np.asarray(ts, dtype=np.float64)])


def _walk_seeds(spec: WalkSpec, latent_dim: int) -> np.ndarray:
    if spec.mode == "first_coord":
        return first_coord_seeds(spec.a, spec.b, spec.steps, latent_dim)
    z_start = check_latent(spec.z_start, latent_dim)[0]
    z_end = check_latent(spec.z_end, latent_dim)[0]
    return lerp_seeds(z_start, z_end, spec.steps)


def walk(ckpt: Checkpoint, spec: WalkSpec, reference_images=None) -> WalkReport:
    """Render and score a latent walk from a trained checkpoint.

    Endpoint steps bypass the interpolation arithmetic entirely, so they are
    bitwise equal to direct eval-mode generation at (z_start, label_start) and
    (z_end, label_end). In label_lerp mode the two labels' condition maps are
    blended with the same fraction as the latent seeds, for both networks.
    """
    cfg = ckpt.model_cfg
    gen = Generator(cfg)
    disc = Discriminator(cfg)
    params = ckpt.params
    dtype = cfg.np_dtype

    seeds = _walk_seeds(spec, cfg.latent_dim).astype(dtype)
    n = spec.steps
    ts = np.arange(n, dtype=np.float64) / (n - 1)

    label_start = ClassLabel(spec.label_start)
    label_end = ClassLabel(spec.label_end) if spec.label_end is not None else label_start
    start_code = np.array([int(label_start)])
    end_code = np.array([int(label_end)])
    gen_cond_start, _ = gen.condition_map(params.gen, start_code)
    disc_cond_start, _ = disc.condition_map(params.disc, start_code)
    gen_cond_end, _ = gen.condition_map(params.gen, end_code)
    disc_cond_end, _ = disc.condition_map(params.disc, end_code)

    def conditions_at(k: int):
        # endpoints bypass the blend arithmetic so they stay bitwise equal
        # to direct generation at the endpoint label
        if spec.mode != "label_lerp" or k == 0:
            return gen_cond_start, disc_cond_start
        if k == n - 1:
            return gen_cond_end, disc_cond_end
        t = ts[k]
        gen_cond = ((1.0 - t) * gen_cond_start + t * gen_cond_end).astype(dtype)
        disc_cond = ((1.0 - t) * disc_cond_start + t * disc_cond_end).astype(dtype)
        return gen_cond, disc_cond

    # one forward per step: the endpoints must match single-sample direct
    # generation bitwise, and batched BLAS calls may round differently
    raw_steps, realism_steps = [], []
    for k in range(n):
        gen_cond, disc_cond = conditions_at(k)
        raw_k, _, _ = gen.forward_with_condition(
            params.gen, params.gen_state, seeds[k : k + 1], gen_cond, train=False
        )
        p_k, _, _ = disc.forward_with_condition(
            params.disc, params.disc_state, raw_k, disc_cond, train=False
        )
        raw_steps.append(raw_k[0])
        realism_steps.append(p_k[0])
    raw = np.stack(raw_steps)
    realism = np.array(realism_steps)
    images = pixel_unscale(raw[..., 0])

    if n >= 3:
        deviations = blend_deviation(images, ts)
    else:
        deviations = np.zeros(n)  # endpoints deviate from themselves by zero
    report = WalkReport(
        images=images,
        ts=ts,
        realism=realism,
        blend_deviation=deviations,
        spec=spec,
    )
    if reference_images is not None:
        report.nn_distance = nn_memorization_score(images, reference_images)
    return report
