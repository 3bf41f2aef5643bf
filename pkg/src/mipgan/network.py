"""Conditional generator/discriminator pair built from the nn primitives.

Both networks receive the class label through an embedding followed by a
linear map, reshaped to an extra input channel ("condition map"). Parameters
live in plain name->array dicts so the optimizer and checkpoints can treat
them uniformly; batch-norm running statistics live in separate state dicts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .core import NUM_CLASSES
from .validation import check_labels, check_latent

INIT_STD = 0.02
SIGMOID_CLIP = 1e-7


@dataclass(frozen=True)
class ModelConfig:
    latent_dim: int = 100
    embed_dim: int = 50
    num_classes: int = NUM_CLASSES
    seed_map: tuple[int, int] = (5, 3)
    upsample_stages: int = 5
    gen_channels: tuple[int, ...] = (256, 128, 64, 32, 16)
    gen_kernel: int = 4
    disc_layers: int = 8
    disc_channels: tuple[int, ...] = (16, 32, 64, 128, 256, 256, 256, 256)
    disc_kernel: int = 3
    disc_stride: int = 2
    leaky_slope: float = 0.2
    dropout_rate: float = 0.25
    bn_momentum: float = 0.8
    bn_eps: float = 1e-5
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "seed_map", tuple(int(v) for v in self.seed_map))
        object.__setattr__(self, "gen_channels", tuple(int(v) for v in self.gen_channels))
        object.__setattr__(self, "disc_channels", tuple(int(v) for v in self.disc_channels))
        if self.latent_dim < 1 or self.embed_dim < 1:
            raise ValueError("latent_dim and embed_dim must be >= 1")
        if any(v < 1 for v in self.seed_map):
            raise ValueError(f"seed_map entries must be >= 1, got {self.seed_map}")
        if self.upsample_stages < 1:
            raise ValueError("upsample_stages must be >= 1")
        if len(self.gen_channels) != self.upsample_stages:
            raise ValueError(
                f"gen_channels needs {self.upsample_stages} entries, "
                f"got {len(self.gen_channels)}"
            )
        if self.disc_layers < 2:
            raise ValueError("disc_layers must be >= 2")
        if len(self.disc_channels) != self.disc_layers:
            raise ValueError(
                f"disc_channels needs {self.disc_layers} entries, "
                f"got {len(self.disc_channels)}"
            )
        if self.gen_kernel < 2 or self.gen_kernel % 2:
            raise ValueError("gen_kernel must be even (exact 2x upsampling)")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if not 0.0 <= self.bn_momentum < 1.0:
            raise ValueError("bn_momentum must be in [0, 1)")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")

    @property
    def canvas(self) -> tuple[int, int]:
        factor = 2**self.upsample_stages
        return (self.seed_map[0] * factor, self.seed_map[1] * factor)

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)


@dataclass
class ModelParams:
    gen: dict
    disc: dict
    gen_state: dict
    disc_state: dict
    init_seed: int = 0

    def copy(self) -> "ModelParams":
        return ModelParams(
            gen={k: v.copy() for k, v in self.gen.items()},
            disc={k: v.copy() for k, v in self.disc.items()},
            gen_state={k: v.copy() for k, v in self.gen_state.items()},
            disc_state={k: v.copy() for k, v in self.disc_state.items()},
            init_seed=self.init_seed,
        )


def pixel_scale(x01):
    """Map data-range pixels [0, 1] to the generator range [-1, 1]."""
    return np.asarray(x01) * 2.0 - 1.0


def pixel_unscale(xpm1):
    """Map generator-range pixels [-1, 1] back to [0, 1]."""
    return (np.asarray(xpm1) + 1.0) / 2.0


def _bn_param(shapes, name, channels):
    shapes[f"{name}/gamma"] = ("ones", (channels,))
    shapes[f"{name}/beta"] = ("zeros", (channels,))


class Generator:
    """Latent + label -> image in [-1, 1] on the configured canvas."""

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        self.c0 = cfg.gen_channels[0]
        self.stage_in = [self.c0 + 1] + list(cfg.gen_channels[:-1])
        self.stage_out = list(cfg.gen_channels)
        self.tconv_pad = (cfg.gen_kernel - 2) // 2
        self.out_kernel = 3

    def param_shapes(self) -> dict:
        cfg = self.cfg
        sh, sw = cfg.seed_map
        shapes = {}
        shapes["embed"] = ("normal", (cfg.num_classes, cfg.embed_dim))
        shapes["cond/W"] = ("normal", (cfg.embed_dim, sh * sw))
        shapes["cond/b"] = ("zeros", (sh * sw,))
        shapes["latent/W"] = ("normal", (cfg.latent_dim, sh * sw * self.c0))
        shapes["latent/b"] = ("zeros", (sh * sw * self.c0,))
        _bn_param(shapes, "bn0", self.c0)
        for i, (cin, cout) in enumerate(zip(self.stage_in, self.stage_out)):
            shapes[f"up{i}/W"] = ("normal", (cin, cfg.gen_kernel, cfg.gen_kernel, cout))
            shapes[f"up{i}/b"] = ("zeros", (cout,))
            _bn_param(shapes, f"up{i}_bn", cout)
        shapes["out/W"] = ("normal", (self.out_kernel, self.out_kernel, self.stage_out[-1], 1))
        shapes["out/b"] = ("zeros", (1,))
        return shapes

    def state_shapes(self) -> dict:
        shapes = {"bn0/mean": self.c0, "bn0/var": self.c0}
        for i, cout in enumerate(self.stage_out):
            shapes[f"up{i}_bn/mean"] = cout
            shapes[f"up{i}_bn/var"] = cout
        return shapes

    def condition_map(self, params, labels):
        """Label codes -> (N, 1, sh, sw) condition channel, with backward cache."""
        sh, sw = self.cfg.seed_map
        emb, emb_cache = nn.embedding_forward(labels, params["embed"])
        flat, dense_cache = nn.dense_forward(emb, params["cond/W"], params["cond/b"])
        cond = flat.reshape(len(labels), sh, sw, 1)
        return cond, (emb_cache, dense_cache)

    def forward(self, params, state, z, labels, train: bool = False):
        cond, cond_cache = self.condition_map(params, labels)
        return self.forward_with_condition(
            params, state, z, cond, train=train, cond_cache=cond_cache
        )

    def forward_with_condition(self, params, state, z, cond, train=False, cond_cache=None):
        cfg = self.cfg
        sh, sw = cfg.seed_map
        z = np.asarray(z, dtype=cfg.np_dtype)
        cond = np.asarray(cond, dtype=cfg.np_dtype)
        n = z.shape[0]
        cache = {"cond": cond_cache, "n": n}
        new_state = {}

        flat, cache["latent"] = nn.dense_forward(z, params["latent/W"], params["latent/b"])
        h = flat.reshape(n, sh, sw, self.c0)
        h, (new_state["bn0/mean"], new_state["bn0/var"]), cache["bn0"] = nn.batchnorm_forward(
            h, params["bn0/gamma"], params["bn0/beta"],
            state["bn0/mean"], state["bn0/var"],
            cfg.bn_momentum, cfg.bn_eps, train,
        )
        h, cache["relu0"] = nn.relu_forward(h)
        h = np.concatenate([h, cond], axis=3)

        for i in range(cfg.upsample_stages):
            h, cache[f"up{i}"] = nn.conv_transpose2d_forward(
                h, params[f"up{i}/W"], params[f"up{i}/b"], 2,
                (self.tconv_pad, self.tconv_pad), (self.tconv_pad, self.tconv_pad),
            )
            bn_key = f"up{i}_bn"
            h, (new_state[f"{bn_key}/mean"], new_state[f"{bn_key}/var"]), cache[bn_key] = (
                nn.batchnorm_forward(
                    h, params[f"{bn_key}/gamma"], params[f"{bn_key}/beta"],
                    state[f"{bn_key}/mean"], state[f"{bn_key}/var"],
                    cfg.bn_momentum, cfg.bn_eps, train,
                )
            )
            h, cache[f"relu{i + 1}"] = nn.relu_forward(h)

        pad = self.out_kernel // 2
        h, cache["out"] = nn.conv2d_forward(
            h, params["out/W"], params["out/b"], 1, (pad, pad), (pad, pad)
        )
        img, cache["tanh"] = nn.tanh_forward(h)
        return img, new_state, cache

    def backward(self, params, cache, d_img):
        """Gradients of every generator parameter given d(loss)/d(image)."""
        cfg = self.cfg
        grads = {}
        dh = nn.tanh_backward(d_img, cache["tanh"])
        dh, grads["out/W"], grads["out/b"] = nn.conv2d_backward(dh, params["out/W"], cache["out"])

        for i in reversed(range(cfg.upsample_stages)):
            dh = nn.relu_backward(dh, cache[f"relu{i + 1}"])
            bn_key = f"up{i}_bn"
            dh, grads[f"{bn_key}/gamma"], grads[f"{bn_key}/beta"] = nn.batchnorm_backward(
                dh, cache[bn_key]
            )
            dh, grads[f"up{i}/W"], grads[f"up{i}/b"] = nn.conv_transpose2d_backward(
                dh, params[f"up{i}/W"], cache[f"up{i}"]
            )

        d_main, d_cond = dh[..., : self.c0], dh[..., self.c0 :]
        d_main = nn.relu_backward(d_main, cache["relu0"])
        d_main, grads["bn0/gamma"], grads["bn0/beta"] = nn.batchnorm_backward(
            d_main, cache["bn0"]
        )
        d_flat = d_main.reshape(cache["n"], -1)
        _, grads["latent/W"], grads["latent/b"] = nn.dense_backward(
            d_flat, params["latent/W"], cache["latent"]
        )

        emb_cache, dense_cache = cache["cond"]
        d_cond_flat = np.ascontiguousarray(d_cond).reshape(cache["n"], -1)
        d_emb, grads["cond/W"], grads["cond/b"] = nn.dense_backward(
            d_cond_flat, params["cond/W"], dense_cache
        )
        grads["embed"] = nn.embedding_backward(d_emb, emb_cache)
        return grads


class Discriminator:
    """Image + label -> probability the image is real, with ceil stride-2 stack."""

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        self.layer_in = [2] + list(cfg.disc_channels[:-1])
        self.layer_out = list(cfg.disc_channels)
        # batch norm everywhere except the first and the two last conv layers
        self.bn_layers = set(range(2, cfg.disc_layers - 1))
        trace = self.spatial_trace()
        self.flat_dim = trace[-1][0] * trace[-1][1] * self.layer_out[-1]

    def spatial_trace(self) -> list[tuple[int, int]]:
        cfg = self.cfg
        h, w = cfg.canvas
        trace = [(h, w)]
        for _ in range(cfg.disc_layers):
            h = nn.ceil_div(h, cfg.disc_stride)
            w = nn.ceil_div(w, cfg.disc_stride)
            trace.append((h, w))
        return trace

    def param_shapes(self) -> dict:
        cfg = self.cfg
        canvas_h, canvas_w = cfg.canvas
        shapes = {}
        shapes["embed"] = ("normal", (cfg.num_classes, cfg.embed_dim))
        shapes["cond/W"] = ("normal", (cfg.embed_dim, canvas_h * canvas_w))
        shapes["cond/b"] = ("zeros", (canvas_h * canvas_w,))
        for i, (cin, cout) in enumerate(zip(self.layer_in, self.layer_out), start=1):
            shapes[f"conv{i}/W"] = ("normal", (cfg.disc_kernel, cfg.disc_kernel, cin, cout))
            shapes[f"conv{i}/b"] = ("zeros", (cout,))
            if i in self.bn_layers:
                _bn_param(shapes, f"conv{i}_bn", cout)
        shapes["head/W"] = ("normal", (self.flat_dim, 1))
        shapes["head/b"] = ("zeros", (1,))
        return shapes

    def state_shapes(self) -> dict:
        shapes = {}
        for i, cout in enumerate(self.layer_out, start=1):
            if i in self.bn_layers:
                shapes[f"conv{i}_bn/mean"] = cout
                shapes[f"conv{i}_bn/var"] = cout
        return shapes

    def condition_map(self, params, labels):
        canvas_h, canvas_w = self.cfg.canvas
        emb, emb_cache = nn.embedding_forward(labels, params["embed"])
        flat, dense_cache = nn.dense_forward(emb, params["cond/W"], params["cond/b"])
        cond = flat.reshape(len(labels), canvas_h, canvas_w, 1)
        return cond, (emb_cache, dense_cache)

    def forward(self, params, state, x, labels, train: bool = False, rng=None):
        cond, cond_cache = self.condition_map(params, labels)
        return self.forward_with_condition(
            params, state, x, cond, train=train, rng=rng, cond_cache=cond_cache
        )

    def forward_with_condition(self, params, state, x, cond, train=False, rng=None,
                               cond_cache=None):
        cfg = self.cfg
        x = np.asarray(x, dtype=cfg.np_dtype)
        if x.ndim == 3:
            x = x[..., None]
        cond = np.asarray(cond, dtype=cfg.np_dtype)
        if train and cfg.dropout_rate > 0.0 and rng is None:
            raise ValueError("training-mode forward with dropout needs an rng")
        n = x.shape[0]
        cache = {"cond": cond_cache, "n": n}
        new_state = {}

        h = np.concatenate([x, cond], axis=3)
        for i in range(1, cfg.disc_layers + 1):
            pad_h = nn.same_pad_1d(h.shape[1], cfg.disc_kernel, cfg.disc_stride)
            pad_w = nn.same_pad_1d(h.shape[2], cfg.disc_kernel, cfg.disc_stride)
            h, cache[f"conv{i}"] = nn.conv2d_forward(
                h, params[f"conv{i}/W"], params[f"conv{i}/b"],
                cfg.disc_stride, pad_h, pad_w,
            )
            h, cache[f"act{i}"] = nn.leaky_relu_forward(h, cfg.leaky_slope)
            h, cache[f"drop{i}"] = nn.dropout_forward(h, cfg.dropout_rate, rng, train)
            if i in self.bn_layers:
                bn_key = f"conv{i}_bn"
                h, (new_state[f"{bn_key}/mean"], new_state[f"{bn_key}/var"]), cache[bn_key] = (
                    nn.batchnorm_forward(
                        h, params[f"{bn_key}/gamma"], params[f"{bn_key}/beta"],
                        state[f"{bn_key}/mean"], state[f"{bn_key}/var"],
                        cfg.bn_momentum, cfg.bn_eps, train,
                    )
                )

        cache["conv_out_shape"] = h.shape
        flat = h.reshape(n, -1)
        logit, cache["head"] = nn.dense_forward(flat, params["head/W"], params["head/b"])
        p_raw, cache["sigmoid"] = nn.sigmoid_forward(logit[:, 0])
        p = np.clip(p_raw, SIGMOID_CLIP, 1.0 - SIGMOID_CLIP)
        cache["clip_mask"] = (p_raw > SIGMOID_CLIP) & (p_raw < 1.0 - SIGMOID_CLIP)
        return p, new_state, cache

    def backward(self, params, cache, d_p, want_dx: bool = False):
        """Gradients of every discriminator parameter; optionally d(loss)/d(image)."""
        cfg = self.cfg
        grads = {}
        d_p = d_p * cache["clip_mask"]
        d_logit = nn.sigmoid_backward(d_p, cache["sigmoid"])[:, None]
        d_flat, grads["head/W"], grads["head/b"] = nn.dense_backward(
            d_logit, params["head/W"], cache["head"]
        )
        dh = d_flat.reshape(cache["conv_out_shape"])

        for i in reversed(range(1, cfg.disc_layers + 1)):
            if i in self.bn_layers:
                bn_key = f"conv{i}_bn"
                dh, grads[f"{bn_key}/gamma"], grads[f"{bn_key}/beta"] = nn.batchnorm_backward(
                    dh, cache[bn_key]
                )
            dh = nn.dropout_backward(dh, cache[f"drop{i}"])
            dh = nn.leaky_relu_backward(dh, cache[f"act{i}"])
            # the condition channel gradient reaches the embedding through
            # layer 1, so its input gradient is needed even when dx is not
            dh, grads[f"conv{i}/W"], grads[f"conv{i}/b"] = nn.conv2d_backward(
                dh, params[f"conv{i}/W"], cache[f"conv{i}"]
            )

        dx, d_cond = dh[..., :1], dh[..., 1:]
        emb_cache, dense_cache = cache["cond"]
        d_cond_flat = np.ascontiguousarray(d_cond).reshape(cache["n"], -1)
        d_emb, grads["cond/W"], grads["cond/b"] = nn.dense_backward(
            d_cond_flat, params["cond/W"], dense_cache
        )
        grads["embed"] = nn.embedding_backward(d_emb, emb_cache)
        if want_dx:
            return grads, np.ascontiguousarray(dx)
        return grads, None


def _init_dict(shapes, rng, dtype):
    params = {}
    for name, (kind, shape) in shapes.items():
        if kind == "normal":
            params[name] = (rng.standard_normal(shape) * INIT_STD).astype(dtype)
        elif kind == "zeros":
            params[name] = np.zeros(shape, dtype=dtype)
        else:  # ones (batch-norm scale)
            params[name] = np.ones(shape, dtype=dtype)
    return params


def _init_state(shapes, dtype):
    state = {}
    for name, channels in shapes.items():
        if name.endswith("/var"):
            state[name] = np.ones(channels, dtype=dtype)
        else:
            state[name] = np.zeros(channels, dtype=dtype)
    return state


def init_params(cfg: ModelConfig, seed: int = 0) -> ModelParams:
    """Normal(0, 0.02) weights, zero biases, unit batch-norm scale; deterministic."""
    rng = np.random.default_rng(int(seed))
    gen = Generator(cfg)
    disc = Discriminator(cfg)
    dtype = cfg.np_dtype
    return ModelParams(
        gen=_init_dict(gen.param_shapes(), rng, dtype),
        disc=_init_dict(disc.param_shapes(), rng, dtype),
        gen_state=_init_state(gen.state_shapes(), dtype),
        disc_state=_init_state(disc.state_shapes(), dtype),
        init_seed=int(seed),
    )


def generate_images(cfg, params, z, labels, state=None):
    """Eval-mode convenience: latent seeds + labels -> images in [0, 1]."""
    gen = Generator(cfg)
    z = check_latent(z, cfg.latent_dim).astype(cfg.np_dtype)
    labels = check_labels(labels, z.shape[0])
    state = state if state is not None else params.gen_state
    img, _, _ = gen.forward(params.gen, state, z, labels, train=False)
    return pixel_unscale(img[..., 0])
