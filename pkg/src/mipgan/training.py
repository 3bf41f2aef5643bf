"""Adversarial training loop: BCE objectives, Adam, step/epoch drivers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ClassLabel
from .network import Discriminator, Generator, ModelConfig, ModelParams, init_params, pixel_scale
from .validation import check_image_batch, check_labels

BCE_EPS = 1e-7
ADAM_EPS = 1e-8


class TrainingDiverged(RuntimeError):
    """Raised when a loss stops being finite; the last checkpoint stays on disk."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    lr: float = 0.0002
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 32
    rng_seed: int = 0
    checkpoint_every: int = 0  # 0 = only the final checkpoint

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.checkpoint_every < 0:
            raise ValueError("checkpoint_every must be >= 0")


@dataclass
class EpochStats:
    epoch: int
    d_loss_real: float
    d_loss_fake: float
    g_loss: float
    d_acc: float

    def __post_init__(self):
        self.epoch = int(self.epoch)
        for name in ("d_loss_real", "d_loss_fake", "g_loss", "d_acc"):
            setattr(self, name, float(getattr(self, name)))


@dataclass
class TrainHistory:
    rows: list = field(default_factory=list)

    HEADER = "epoch,d_loss_real,d_loss_fake,g_loss,d_acc"

    def append(self, stats: EpochStats):
        self.rows.append(stats)

    def to_csv(self) -> str:
        lines = [self.HEADER]
        for r in self.rows:
            lines.append(
                f"{r.epoch},{r.d_loss_real!r},{r.d_loss_fake!r},{r.g_loss!r},{r.d_acc!r}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "TrainHistory":
        lines = text.strip().splitlines()
        if not lines or lines[0] != cls.HEADER:
            raise ValueError(f"history header must be {cls.HEADER!r}")
        history = cls()
        for line in lines[1:]:
            e, dr, df, g, acc = line.split(",")
            history.append(EpochStats(int(e), float(dr), float(df), float(g), float(acc)))
        return history


def bce_loss(p, target: float) -> float:
    """Binary cross entropy against a constant 0/1 target, batch mean."""
    p = np.clip(np.asarray(p, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)
    if target == 1.0:
        return float(-np.mean(np.log(p)))
    if target == 0.0:
        return float(-np.mean(np.log(1.0 - p)))
    return float(-np.mean(target * np.log(p) + (1.0 - target) * np.log(1.0 - p)))


def bce_grad(p, target: float):
    """d(bce mean)/dp with the same [eps, 1-eps] clamp as the loss."""
    p = np.asarray(p, dtype=np.float64)
    inside = (p > BCE_EPS) & (p < 1.0 - BCE_EPS)
    pc = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    g = (-target / pc + (1.0 - target) / (1.0 - pc)) / p.size
    return (g * inside).astype(p.dtype)


# ---------------------------------------------------------------------------
# Adam with bias-corrected moments


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0

    @classmethod
    def for_params(cls, params: dict) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            step=0,
        )

    def copy(self) -> "AdamState":
        return AdamState(
            m={k: a.copy() for k, a in self.m.items()},
            v={k: a.copy() for k, a in self.v.items()},
            step=self.step,
        )


def adam_update(params: dict, grads: dict, opt: AdamState, lr, beta1, beta2,
                eps=ADAM_EPS) -> None:
    """One in-place Adam step over every parameter present in `grads`."""
    opt.step += 1
    t = opt.step
    correction1 = 1.0 - beta1**t
    correction2 = 1.0 - beta2**t
    for key, g in grads.items():
        p = params[key]
        m = opt.m[key]
        v = opt.v[key]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        m_hat = m / correction1
        v_hat = v / correction2
        p -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.dtype)


# ---------------------------------------------------------------------------
# Training steps


def _sum_grads(a: dict, b: dict) -> dict:
    return {k: a[k] + b[k] for k in a}


def _check_finite(name, *values):
    for v in values:
        if not np.isfinite(v):
            raise TrainingDiverged(f"{name} became non-finite ({v}); training aborted")


@dataclass
class StepMetrics:
    d_loss_real: float
    d_loss_fake: float
    g_loss: float
    d_acc: float


def train_step(gen: Generator, disc: Discriminator, params: ModelParams,
               gen_opt: AdamState, disc_opt: AdamState, real_images, real_labels,
               cfg: TrainConfig, rng: np.random.Generator) -> StepMetrics:
    """One adversarial step: D on real+fake, then G through the updated D.

    `real_images` must already be in the generator range [-1, 1]. The same
    (z, label) draw feeds both the discriminator and generator objectives.
    """
    model_cfg = gen.cfg
    n = real_images.shape[0]
    z = rng.standard_normal((n, model_cfg.latent_dim)).astype(model_cfg.np_dtype)
    fake_labels = rng.integers(0, model_cfg.num_classes, size=n)

    fake, gen_state, gen_cache = gen.forward(
        params.gen, params.gen_state, z, fake_labels, train=True
    )
    params.gen_state = gen_state

    # discriminator update: push reals to 1, fakes to 0, one Adam step
    p_real, disc_state, cache_real = disc.forward(
        params.disc, params.disc_state, real_images, real_labels, train=True, rng=rng
    )
    params.disc_state = {**params.disc_state, **disc_state}
    p_fake, disc_state, cache_fake = disc.forward(
        params.disc, params.disc_state, fake, fake_labels, train=True, rng=rng
    )
    params.disc_state = {**params.disc_state, **disc_state}

    d_loss_real = bce_loss(p_real, 1.0)
    d_loss_fake = bce_loss(p_fake, 0.0)
    _check_finite("discriminator loss", d_loss_real, d_loss_fake)

    grads_real, _ = disc.backward(params.disc, cache_real, bce_grad(p_real, 1.0))
    grads_fake, _ = disc.backward(params.disc, cache_fake, bce_grad(p_fake, 0.0))
    adam_update(params.disc, _sum_grads(grads_real, grads_fake), disc_opt,
                cfg.lr, cfg.beta1, cfg.beta2)

    d_acc = float(np.concatenate([p_real >= 0.5, p_fake < 0.5]).mean())

    # generator update: same fakes through the updated discriminator, target 1
    p_fake2, disc_state, cache_g = disc.forward(
        params.disc, params.disc_state, fake, fake_labels, train=True, rng=rng
    )
    params.disc_state = {**params.disc_state, **disc_state}
    g_loss = bce_loss(p_fake2, 1.0)
    _check_finite("generator loss", g_loss)

    _, d_fake_img = disc.backward(params.disc, cache_g, bce_grad(p_fake2, 1.0),
                                  want_dx=True)
    gen_grads = gen.backward(params.gen, gen_cache, d_fake_img)
    adam_update(params.gen, gen_grads, gen_opt, cfg.lr, cfg.beta1, cfg.beta2)

    return StepMetrics(d_loss_real, d_loss_fake, g_loss, d_acc)


def check_corpus_labels(y) -> np.ndarray:
    codes = check_labels(y)
    present = set(int(c) for c in codes)
    missing = [label.key for label in ClassLabel if int(label) not in present]
    if missing:
        raise ValueError(f"corpus is missing classes: {', '.join(missing)}")
    return codes


def train(X, y, model_cfg: ModelConfig, train_cfg: TrainConfig, out_dir=None,
          resume=None, epoch_callback=None):
    """Train on canvas images X in [0, 1] with labels y.

    Returns (checkpoint, history). With `out_dir` set, checkpoints land there
    every `checkpoint_every` epochs and at the end, and a divergence abort
    leaves the last good checkpoint in place. `resume` continues a returned or
    loaded checkpoint bit-exactly (same seeds, single-threaded).
    """
    from .checkpoint import Checkpoint, save_checkpoint

    X = check_image_batch(X, canvas=model_cfg.canvas)
    y = check_corpus_labels(y)
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} images but {y.shape[0]} labels")
    X_pm1 = pixel_scale(X).astype(model_cfg.np_dtype)

    gen = Generator(model_cfg)
    disc = Discriminator(model_cfg)

    if resume is not None:
        if resume.model_cfg != model_cfg:
            raise ValueError("resume checkpoint has a different model configuration")
        params = resume.params.copy()
        gen_opt = resume.gen_opt.copy()
        disc_opt = resume.disc_opt.copy()
        rng = np.random.default_rng(0)
        rng.bit_generator.state = resume.rng_state
        start_epoch = resume.epoch
        history = TrainHistory(rows=list(resume.history.rows))
    else:
        init_seed = int(np.random.SeedSequence((train_cfg.rng_seed, 0)).generate_state(1)[0])
        params = init_params(model_cfg, seed=init_seed)
        gen_opt = AdamState.for_params(params.gen)
        disc_opt = AdamState.for_params(params.disc)
        rng = np.random.default_rng(np.random.SeedSequence((train_cfg.rng_seed, 1)))
        start_epoch = 0
        history = TrainHistory()

    n = X_pm1.shape[0]
    checkpoint = Checkpoint(
        params=params, gen_opt=gen_opt, disc_opt=disc_opt,
        model_cfg=model_cfg, train_cfg=train_cfg, epoch=start_epoch,
        rng_state=rng.bit_generator.state, history=history,
    )
    for epoch in range(start_epoch + 1, train_cfg.epochs + 1):
        order = rng.permutation(n)
        sums = np.zeros(4)
        steps = 0
        for lo in range(0, n, train_cfg.batch_size):
            batch = order[lo : lo + train_cfg.batch_size]
            metrics = train_step(
                gen, disc, params, gen_opt, disc_opt,
                X_pm1[batch], y[batch], train_cfg, rng,
            )
            sums += (metrics.d_loss_real, metrics.d_loss_fake,
                     metrics.g_loss, metrics.d_acc)
            steps += 1
        stats = EpochStats(epoch, *(sums / steps))
        history.append(stats)
        if epoch_callback is not None:
            epoch_callback(stats)

        checkpoint = Checkpoint(
            params=params, gen_opt=gen_opt, disc_opt=disc_opt,
            model_cfg=model_cfg, train_cfg=train_cfg, epoch=epoch,
            rng_state=rng.bit_generator.state, history=history,
        )
        if out_dir is not None:
            every = train_cfg.checkpoint_every
            if (every and epoch % every == 0) or epoch == train_cfg.epochs:
                save_checkpoint(checkpoint, out_dir)

    return checkpoint, history
