"""Scikit-learn style estimator wrapping the adversarial model."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .network import Discriminator, ModelConfig, generate_images, pixel_scale
from .training import TrainConfig, train
from .validation import check_image_batch, check_labels


class MipGan(BaseEstimator):
    """Conditional DCGAN over canvas images with a fit/sample interface.

    `fit(X, y)` trains on images in [0, 1] shaped (n, H, W) where (H, W)
    equals `seed_map * 2**upsample_stages`; `sample` draws new images for
    given class codes; `discriminate` scores images with the trained critic.
    """

    def __init__(self, latent_dim=100, embed_dim=50, seed_map=(5, 3),
                 upsample_stages=5, gen_channels=(256, 128, 64, 32, 16),
                 gen_kernel=4, disc_layers=8,
                 disc_channels=(16, 32, 64, 128, 256, 256, 256, 256),
                 disc_kernel=3, disc_stride=2, leaky_slope=0.2, dropout_rate=0.25,
                 bn_momentum=0.8, epochs=300, lr=0.0002, beta1=0.5, beta2=0.999,
                 batch_size=32, checkpoint_every=0, checkpoint_dir=None,
                 random_state=0):
        self.latent_dim = latent_dim
        self.embed_dim = embed_dim
        self.seed_map = seed_map
        self.upsample_stages = upsample_stages
        self.gen_channels = gen_channels
        self.gen_kernel = gen_kernel
        self.disc_layers = disc_layers
        self.disc_channels = disc_channels
        self.disc_kernel = disc_kernel
        self.disc_stride = disc_stride
        self.leaky_slope = leaky_slope
        self.dropout_rate = dropout_rate
        self.bn_momentum = bn_momentum
        self.epochs = epochs
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.batch_size = batch_size
        self.checkpoint_every = checkpoint_every
        self.checkpoint_dir = checkpoint_dir
        self.random_state = random_state

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            latent_dim=self.latent_dim, embed_dim=self.embed_dim,
            seed_map=tuple(self.seed_map), upsample_stages=self.upsample_stages,
            gen_channels=tuple(self.gen_channels), gen_kernel=self.gen_kernel,
            disc_layers=self.disc_layers, disc_channels=tuple(self.disc_channels),
            disc_kernel=self.disc_kernel, disc_stride=self.disc_stride,
            leaky_slope=self.leaky_slope, dropout_rate=self.dropout_rate,
            bn_momentum=self.bn_momentum,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, lr=self.lr, beta1=self.beta1, beta2=self.beta2,
            batch_size=self.batch_size, rng_seed=self.random_state,
            checkpoint_every=self.checkpoint_every,
        )

    @property
    def canvas(self) -> tuple[int, int]:
        return self.model_config().canvas

    def fit(self, X, y, epoch_callback=None):
        checkpoint, history = train(
            X, y, self.model_config(), self.train_config(),
            out_dir=self.checkpoint_dir, epoch_callback=epoch_callback,
        )
        self.checkpoint_ = checkpoint
        self.history_ = history
        return self

    def _require_fitted(self):
        if not hasattr(self, "checkpoint_"):
            raise RuntimeError("estimator is not fitted; call fit or load first")

    def sample(self, y, seed=None, z=None) -> np.ndarray:
        """Generate one image in [0, 1] per class code in `y`."""
        self._require_fitted()
        cfg = self.checkpoint_.model_cfg
        codes = check_labels(y)
        if z is None:
            rng = np.random.default_rng(seed)
            z = rng.standard_normal((codes.shape[0], cfg.latent_dim))
        return generate_images(cfg, self.checkpoint_.params, z, codes)

    def discriminate(self, X, y) -> np.ndarray:
        """Probability each image is real, conditioned on its class code."""
        self._require_fitted()
        cfg = self.checkpoint_.model_cfg
        X = check_image_batch(X, canvas=cfg.canvas)
        codes = check_labels(y, X.shape[0])
        disc = Discriminator(cfg)
        params = self.checkpoint_.params
        p, _, _ = disc.forward(
            params.disc, params.disc_state,
            pixel_scale(X).astype(cfg.np_dtype), codes, train=False,
        )
        return p

    def save(self, out_dir):
        from .checkpoint import save_checkpoint

        self._require_fitted()
        save_checkpoint(self.checkpoint_, out_dir)

    @classmethod
    def from_checkpoint(cls, ckpt_dir) -> "MipGan":
        from .checkpoint import load_checkpoint

        checkpoint = load_checkpoint(ckpt_dir)
        mc, tc = checkpoint.model_cfg, checkpoint.train_cfg
        est = cls(
            latent_dim=mc.latent_dim, embed_dim=mc.embed_dim, seed_map=mc.seed_map,
            upsample_stages=mc.upsample_stages, gen_channels=mc.gen_channels,
            gen_kernel=mc.gen_kernel, disc_layers=mc.disc_layers,
            disc_channels=mc.disc_channels, disc_kernel=mc.disc_kernel,
            disc_stride=mc.disc_stride, leaky_slope=mc.leaky_slope,
            dropout_rate=mc.dropout_rate, bn_momentum=mc.bn_momentum,
            epochs=tc.epochs, lr=tc.lr, beta1=tc.beta1, beta2=tc.beta2,
            batch_size=tc.batch_size, checkpoint_every=tc.checkpoint_every,
            random_state=tc.rng_seed,
        )
        est.checkpoint_ = checkpoint
        est.history_ = checkpoint.history
        return est
