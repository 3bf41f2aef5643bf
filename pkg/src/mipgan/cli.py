"""Command-line interface: phantom, preprocess, train, generate, walk, evaluate.

Every command resolves its settings from defaults, then an optional key=value
config file (--config), then explicit flags, and writes the fully resolved
configuration next to its outputs as run_config.txt so any artifact can be
reproduced from its output directory alone.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint
from .core import CLASS_NAMES, ClassLabel
from .fileio import (
    ManifestRow,
    atomic_write_bytes,
    read_manifest,
    read_pgm16,
    read_pvol,
    write_manifest,
    write_pgm16,
    write_pvol,
)
from .network import ModelConfig, generate_images
from .phantoms import PhantomSpec, RegionEnergyClassifier, make_corpus
from .preprocessing import PipelineConfig, preprocess
from .training import TrainConfig, train
from .walk import WalkSpec, nn_memorization_score, walk


class CliError(Exception):
    pass


def _parse_int_tuple(text, n=None):
    parts = tuple(int(v) for v in str(text).split(","))
    if n is not None and len(parts) != n:
        raise CliError(f"expected {n} comma-separated integers, got {text!r}")
    return parts


def _parse_float_tuple(text, n=None):
    parts = tuple(float(v) for v in str(text).split(","))
    if n is not None and len(parts) != n:
        raise CliError(f"expected {n} comma-separated numbers, got {text!r}")
    return parts


#: config-file keys: name -> parser
KNOWN_KEYS = {
    # provenance line emitted into run_config.txt, accepted so a resolved
    # config can be replayed verbatim with --config
    "command": str,
    # phantom corpus
    "dims": lambda v: _parse_int_tuple(v, 3),
    "spacing_mm": lambda v: _parse_float_tuple(v, 3),
    "per_class": str,
    "rng_seed": int,
    # preprocessing
    "target_spacing_mm": float,
    "suv_max": float,
    "projection_axis": str,
    "canvas": lambda v: _parse_int_tuple(v, 2),
    # model
    "latent_dim": int,
    "embed_dim": int,
    "seed_map": lambda v: _parse_int_tuple(v, 2),
    "upsample_stages": int,
    "gen_channels": _parse_int_tuple,
    "gen_kernel": int,
    "disc_layers": int,
    "disc_channels": _parse_int_tuple,
    "disc_kernel": int,
    "disc_stride": int,
    "leaky_slope": float,
    "dropout_rate": float,
    "bn_momentum": float,
    # training
    "epochs": int,
    "lr": float,
    "beta1": float,
    "beta2": float,
    "batch_size": int,
    "checkpoint_every": int,
    # walk
    "mode": str,
    "steps": int,
    "a": float,
    "b": float,
    "label_start": str,
    "label_end": str,
    # generation / evaluation
    "count": int,
    "per_class_eval": int,
}


def load_config_file(path) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep:
            raise CliError(f"{path}:{lineno}: expected key=value, got {line!r}")
        if key not in KNOWN_KEYS:
            raise CliError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            values[key] = KNOWN_KEYS[key](raw)
        except (ValueError, CliError) as exc:
            raise CliError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return values


class Resolver:
    """defaults < config file < explicit flags, tracking the resolved values."""

    def __init__(self, args):
        self.config = load_config_file(args.config) if getattr(args, "config", None) else {}
        self.args = args
        self.resolved = {}

    def get(self, key, flag_value, default):
        if flag_value is not None:
            value = flag_value
        elif key in self.config:
            value = self.config[key]
        else:
            value = default
        self.resolved[key] = value
        return value

    def write_resolved(self, out_dir, command):
        def fmt(v):
            if isinstance(v, tuple):
                return ",".join(str(x) for x in v)
            if isinstance(v, float):
                return repr(v)
            return str(v)

        lines = [f"command={command}"]
        for key in sorted(self.resolved):
            if self.resolved[key] is None:
                continue  # unset optional; replay falls back to the default
            lines.append(f"{key}={fmt(self.resolved[key])}")
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        atomic_write_bytes(out_dir / "run_config.txt", ("\n".join(lines) + "\n").encode())


def _parse_per_class(text) -> dict:
    """Either a single count for all classes or name=count pairs."""
    text = str(text).strip()
    if "=" not in text:
        count = int(text)
        return {label: count for label in ClassLabel}
    counts = {label: 0 for label in ClassLabel}
    for part in text.split(","):
        name, _, value = part.partition("=")
        counts[ClassLabel.from_name(name)] = int(value)
    return counts


def _load_image_corpus(data_dir):
    data_dir = Path(data_dir)
    manifest_path = data_dir / "manifest.csv"
    if not manifest_path.exists():
        raise CliError(f"{data_dir}: no manifest.csv (is this a preprocess output?)")
    rows = read_manifest(manifest_path)
    if not rows:
        raise CliError(f"{manifest_path}: manifest is empty")
    images = np.stack([read_pgm16(data_dir / row.path) for row in rows])
    labels = np.array([int(row.label) for row in rows])
    return images, labels, rows


# ---------------------------------------------------------------------------


def cmd_phantom(args) -> int:
    res = Resolver(args)
    per_class = _parse_per_class(res.get("per_class", args.per_class, "2"))
    seed = res.get("rng_seed", args.seed, 0)
    dims = res.get("dims", _parse_int_tuple(args.dims, 3) if args.dims else None, (64, 48, 48))
    spacing = res.get(
        "spacing_mm",
        _parse_float_tuple(args.spacing, 3) if args.spacing else None,
        (4.0, 4.0, 4.0),
    )
    spec = PhantomSpec(dims=dims, spacing_mm=spacing,
                       per_class_count=per_class, rng_seed=seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for item in make_corpus(spec):
        write_pvol(out_dir / item.filename, item.volume)
        rows.append(ManifestRow(item.item_id, item.label, item.filename))
    write_manifest(out_dir / "manifest.csv", rows)
    res.write_resolved(out_dir, "phantom")
    print(f"wrote {len(rows)} volumes to {out_dir}")
    return 0


def cmd_preprocess(args) -> int:
    res = Resolver(args)
    cfg = PipelineConfig(
        target_spacing_mm=res.get("target_spacing_mm", args.spacing, 2.0),
        suv_max=res.get("suv_max", args.suv_max, 30.0),
        projection_axis=res.get("projection_axis", args.axis, "y"),
        canvas=res.get(
            "canvas", _parse_int_tuple(args.canvas, 2) if args.canvas else None, (160, 96)
        ),
    )
    in_dir = Path(getattr(args, "in"))
    manifest_path = in_dir / "manifest.csv"
    if not manifest_path.exists():
        raise CliError(f"{in_dir}: no manifest.csv with volumes to preprocess")
    rows = read_manifest(manifest_path)
    if not rows:
        raise CliError(f"{manifest_path}: manifest is empty")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_rows = []
    for row in rows:
        volume = read_pvol(in_dir / row.path)
        image = preprocess(volume, row.label, cfg, source_id=row.item_id)
        filename = f"{row.item_id}.pgm"
        write_pgm16(out_dir / filename, image.pixels)
        out_rows.append(ManifestRow(row.item_id, row.label, filename))
    write_manifest(out_dir / "manifest.csv", out_rows)
    res.write_resolved(out_dir, "preprocess")
    print(f"wrote {len(out_rows)} images to {out_dir}")
    return 0


def cmd_train(args) -> int:
    res = Resolver(args)
    stages = res.get("upsample_stages", args.stages, 5)
    default_gen = tuple(2 ** (8 - i) for i in range(stages))  # 256,128,... per stage
    model_cfg = ModelConfig(
        latent_dim=res.get("latent_dim", None, 100),
        embed_dim=res.get("embed_dim", None, 50),
        seed_map=res.get("seed_map", None, (5, 3)),
        upsample_stages=stages,
        gen_channels=res.get(
            "gen_channels",
            _parse_int_tuple(args.gen_channels) if args.gen_channels else None,
            default_gen,
        ),
        gen_kernel=res.get("gen_kernel", None, 4),
        disc_layers=res.get("disc_layers", None, 8),
        disc_channels=res.get(
            "disc_channels",
            _parse_int_tuple(args.disc_channels) if args.disc_channels else None,
            (16, 32, 64, 128, 256, 256, 256, 256),
        ),
        disc_kernel=res.get("disc_kernel", None, 3),
        disc_stride=res.get("disc_stride", None, 2),
        leaky_slope=res.get("leaky_slope", None, 0.2),
        dropout_rate=res.get("dropout_rate", None, 0.25),
        bn_momentum=res.get("bn_momentum", None, 0.8),
    )
    train_cfg = TrainConfig(
        epochs=res.get("epochs", args.epochs, 300),
        lr=res.get("lr", args.lr, 0.0002),
        beta1=res.get("beta1", args.beta1, 0.5),
        beta2=res.get("beta2", None, 0.999),
        batch_size=res.get("batch_size", args.batch, 32),
        rng_seed=res.get("rng_seed", args.seed, 0),
        checkpoint_every=res.get("checkpoint_every", args.checkpoint_every, 0),
    )
    X, y, _ = _load_image_corpus(args.data)
    if X.shape[1:] != model_cfg.canvas:
        raise CliError(
            f"images are {X.shape[1:]} but the model canvas is {model_cfg.canvas}; "
            f"preprocess with --canvas {model_cfg.canvas[0]},{model_cfg.canvas[1]} "
            f"or change --stages"
        )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def echo(stats):
        print(
            f"epoch {stats.epoch}: d_real {stats.d_loss_real:.4f} "
            f"d_fake {stats.d_loss_fake:.4f} g {stats.g_loss:.4f} "
            f"d_acc {stats.d_acc:.3f}",
            flush=True,
        )

    checkpoint, history = train(
        X, y, model_cfg, train_cfg,
        out_dir=out_dir / "checkpoint" if train_cfg.checkpoint_every else None,
        epoch_callback=echo if args.verbose else None,
    )
    from .checkpoint import save_checkpoint

    save_checkpoint(checkpoint, out_dir / "checkpoint")
    atomic_write_bytes(out_dir / "history.csv", history.to_csv().encode("ascii"))
    res.write_resolved(out_dir, "train")
    print(f"trained {train_cfg.epochs} epochs; checkpoint in {out_dir / 'checkpoint'}")
    return 0


def cmd_generate(args) -> int:
    res = Resolver(args)
    label = ClassLabel.from_name(getattr(args, "class"))
    count = res.get("count", args.count, 5)
    seed = res.get("rng_seed", args.seed, 0)
    if count < 1:
        raise CliError("count must be >= 1")
    ckpt = load_checkpoint(args.ckpt)
    rng = np.random.default_rng(seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(count):
        z = rng.standard_normal((1, ckpt.model_cfg.latent_dim))
        image = generate_images(ckpt.model_cfg, ckpt.params, z, [int(label)])[0]
        filename = f"{label.key}_{i:04d}.pgm"
        write_pgm16(out_dir / filename, image)
        rows.append(ManifestRow(f"{label.key}_{i:04d}", label, filename))
    write_manifest(out_dir / "manifest.csv", rows)
    res.write_resolved(out_dir, "generate")
    print(f"wrote {count} {label.key} images to {out_dir}")
    return 0


def cmd_walk(args) -> int:
    res = Resolver(args)
    mode = res.get("mode", args.mode, "first-coord").replace("-", "_")
    steps = res.get("steps", args.steps, 10)
    seed = res.get("rng_seed", args.seed, 0)
    a = res.get("a", args.a, 1.0)
    b = res.get("b", args.b, 10.0)
    label_start = ClassLabel.from_name(
        res.get("label_start", args.from_class, "normal")
    )
    label_end_name = res.get("label_end", args.to_class, None)
    label_end = ClassLabel.from_name(label_end_name) if label_end_name else None

    ckpt = load_checkpoint(args.ckpt)
    z_start = z_end = None
    if mode in ("lerp", "label_lerp"):
        rng = np.random.default_rng(seed)
        z_start = rng.standard_normal(ckpt.model_cfg.latent_dim)
        z_end = rng.standard_normal(ckpt.model_cfg.latent_dim)
    spec = WalkSpec(
        mode=mode, steps=steps, a=a, b=b, z_start=z_start, z_end=z_end,
        label_start=label_start, label_end=label_end,
    )
    reference = None
    if args.data:
        reference, _, _ = _load_image_corpus(args.data)
    report = walk(ckpt, spec, reference_images=reference)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_pgm16(out_dir / "strip.pgm", report.strip_image())
    atomic_write_bytes(out_dir / "metrics.csv", report.metrics_csv().encode("ascii"))
    res.write_resolved(out_dir, "walk")
    print(f"wrote {steps}-step walk to {out_dir}")
    return 0


def cmd_evaluate(args) -> int:
    res = Resolver(args)
    per_class = res.get("per_class_eval", args.per_class, 10)
    seed = res.get("rng_seed", args.seed, 0)
    if per_class < 1:
        raise CliError("per-class sample count must be >= 1")
    ckpt = load_checkpoint(args.ckpt)
    reference, _, _ = _load_image_corpus(args.data)
    if reference.shape[1:] != ckpt.model_cfg.canvas:
        raise CliError(
            f"reference images are {reference.shape[1:]} but the checkpoint canvas "
            f"is {ckpt.model_cfg.canvas}"
        )

    from .network import Discriminator, pixel_scale

    oracle = RegionEnergyClassifier().fit()
    disc = Discriminator(ckpt.model_cfg)
    rng = np.random.default_rng(seed)
    lines = ["class,count,oracle_accuracy,mean_nn_distance,mean_realism"]
    for label in ClassLabel:
        z = rng.standard_normal((per_class, ckpt.model_cfg.latent_dim))
        images = generate_images(ckpt.model_cfg, ckpt.params, z, [int(label)] * per_class)
        accuracy = float(np.mean(oracle.predict(images) == int(label)))
        nn_mean = float(nn_memorization_score(images, reference).mean())
        p, _, _ = disc.forward(
            ckpt.params.disc, ckpt.params.disc_state,
            pixel_scale(images).astype(ckpt.model_cfg.np_dtype),
            np.full(per_class, int(label)), train=False,
        )
        lines.append(
            f"{label.key},{per_class},{accuracy!r},{nn_mean!r},{float(p.mean())!r}"
        )
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_bytes(out_path, ("\n".join(lines) + "\n").encode("ascii"))
    res.write_resolved(out_path.parent, "evaluate")
    print(f"wrote evaluation report to {out_path}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mipgan",
        description="Conditional DCGAN for coronal MIP PET-style images",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic PVOL1 corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", dest="per_class",
                   help="count for all classes, or name=count pairs")
    p.add_argument("--seed", type=int)
    p.add_argument("--dims", help="Z,Y,X voxel counts")
    p.add_argument("--spacing", help="Z,Y,X spacing in mm")
    p.add_argument("--config")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("preprocess", help="resample, window, project and canvas-fit")
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--suv-max", dest="suv_max", type=float)
    p.add_argument("--spacing", type=float)
    p.add_argument("--axis", choices=("y", "x"))
    p.add_argument("--canvas", help="H,W")
    p.add_argument("--config")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train the adversarial model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--beta1", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--stages", type=int)
    p.add_argument("--gen-channels", dest="gen_channels")
    p.add_argument("--disc-channels", dest="disc_channels")
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="sample images from a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--class", required=True, help=f"one of: {', '.join(CLASS_NAMES)}")
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("walk", help="latent-space walk with metrics")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--mode", choices=("first-coord", "lerp", "label-lerp"))
    p.add_argument("--steps", type=int)
    p.add_argument("--from-class", dest="from_class")
    p.add_argument("--to-class", dest="to_class")
    p.add_argument("--seed", type=int)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--data", help="reference corpus for nn_distance")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("evaluate", help="conditioning/memorization report")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", dest="per_class", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
