"""Checkpoint serialization: human-readable meta + deterministic binary blobs.

Layout of a checkpoint directory:
    params.bin   -- PBLOB1 container, sorted entries, little-endian payloads
    history.csv  -- per-epoch training history
    meta         -- key=value text, written last (its presence marks validity)

The container is byte-identical for equal arrays, which zip-based formats are
not (archive timestamps), so end-to-end runs can be compared with `cmp`.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CLASS_NAMES
from .fileio import atomic_write_bytes
from .network import ModelConfig, ModelParams
from .training import AdamState, TrainConfig, TrainHistory

SCHEMA_VERSION = 1
BLOB_MAGIC = b"PBLOB1\n"


def write_blob(path, arrays: dict) -> None:
    chunks = [BLOB_MAGIC]
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        dtype = arr.dtype.newbyteorder("<")
        dims = " ".join(str(d) for d in arr.shape)
        chunks.append(f"{name} {dtype.str} {dims}\n".encode("ascii"))
        chunks.append(arr.astype(dtype, copy=False).tobytes())
    atomic_write_bytes(path, b"".join(chunks))


def read_blob(path) -> dict:
    raw = Path(path).read_bytes()
    if not raw.startswith(BLOB_MAGIC):
        raise ValueError(f"{path}: not a PBLOB1 container")
    pos = len(BLOB_MAGIC)
    arrays = {}
    while pos < len(raw):
        end = raw.index(b"\n", pos)
        parts = raw[pos:end].decode("ascii").split(" ")
        name, dtype_str = parts[0], parts[1]
        shape = tuple(int(d) for d in parts[2:])
        dtype = np.dtype(dtype_str)
        nbytes = dtype.itemsize * int(np.prod(shape)) if shape else dtype.itemsize
        pos = end + 1
        arrays[name] = (
            np.frombuffer(raw, dtype=dtype, count=max(1, int(np.prod(shape))), offset=pos)
            .reshape(shape)
            .copy()
        )
        pos += nbytes
    return arrays


@dataclass
class Checkpoint:
    params: ModelParams
    gen_opt: AdamState
    disc_opt: AdamState
    model_cfg: ModelConfig
    train_cfg: TrainConfig
    epoch: int
    rng_state: dict
    history: TrainHistory


def _fmt_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


_MODEL_FIELDS = (
    "latent_dim", "embed_dim", "num_classes", "seed_map", "upsample_stages",
    "gen_channels", "gen_kernel", "disc_layers", "disc_channels", "disc_kernel",
    "disc_stride", "leaky_slope", "dropout_rate", "bn_momentum", "bn_eps", "dtype",
)
_TRAIN_FIELDS = (
    "epochs", "lr", "beta1", "beta2", "batch_size", "rng_seed", "checkpoint_every",
)
_INT_TUPLE_FIELDS = {"seed_map", "gen_channels", "disc_channels"}
_FLOAT_FIELDS = {"leaky_slope", "dropout_rate", "bn_momentum", "bn_eps",
                 "lr", "beta1", "beta2"}


def save_checkpoint(ckpt: Checkpoint, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    arrays = {}
    for prefix, group in (
        ("gen", ckpt.params.gen),
        ("disc", ckpt.params.disc),
        ("gen_state", ckpt.params.gen_state),
        ("disc_state", ckpt.params.disc_state),
        ("adam_gen_m", ckpt.gen_opt.m),
        ("adam_gen_v", ckpt.gen_opt.v),
        ("adam_disc_m", ckpt.disc_opt.m),
        ("adam_disc_v", ckpt.disc_opt.v),
    ):
        for key, arr in group.items():
            arrays[f"{prefix}:{key}"] = arr
    write_blob(out_dir / "params.bin", arrays)
    atomic_write_bytes(out_dir / "history.csv", ckpt.history.to_csv().encode("ascii"))

    lines = [f"schema={SCHEMA_VERSION}", "kind=checkpoint"]
    lines.append(f"epoch={ckpt.epoch}")
    lines.append(f"classes={','.join(CLASS_NAMES)}")
    lines.append(f"canvas={ckpt.model_cfg.canvas[0]},{ckpt.model_cfg.canvas[1]}")
    for name in _MODEL_FIELDS:
        lines.append(f"model.{name}={_fmt_value(getattr(ckpt.model_cfg, name))}")
    for name in _TRAIN_FIELDS:
        lines.append(f"train.{name}={_fmt_value(getattr(ckpt.train_cfg, name))}")
    lines.append(f"init_seed={ckpt.params.init_seed}")
    lines.append(f"gen_opt_step={ckpt.gen_opt.step}")
    lines.append(f"disc_opt_step={ckpt.disc_opt.step}")
    state = ckpt.rng_state
    lines.append(f"rng_bit_generator={state['bit_generator']}")
    lines.append(f"rng_state={state['state']['state']}")
    lines.append(f"rng_inc={state['state']['inc']}")
    lines.append(f"rng_has_uint32={state['has_uint32']}")
    lines.append(f"rng_uinteger={state['uinteger']}")
    atomic_write_bytes(out_dir / "meta", ("\n".join(lines) + "\n").encode("ascii"))


def _parse_meta(path) -> dict:
    meta = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}: malformed meta line {line!r}")
        meta[key] = value
    return meta


def _parse_field(name, raw):
    if name in _INT_TUPLE_FIELDS:
        return tuple(int(v) for v in raw.split(","))
    if name in _FLOAT_FIELDS:
        return float(raw)
    if name == "dtype":
        return raw
    return int(raw)


def load_checkpoint(ckpt_dir) -> Checkpoint:
    ckpt_dir = Path(ckpt_dir)
    meta_path = ckpt_dir / "meta"
    if not meta_path.exists():
        raise FileNotFoundError(f"{ckpt_dir}: no meta file; not a finished checkpoint")
    meta = _parse_meta(meta_path)

    if meta.get("kind") != "checkpoint":
        raise ValueError(f"{ckpt_dir}: not a checkpoint directory")
    if int(meta.get("schema", -1)) != SCHEMA_VERSION:
        raise ValueError(
            f"{ckpt_dir}: schema {meta.get('schema')} does not match "
            f"supported version {SCHEMA_VERSION}"
        )
    if meta["classes"] != ",".join(CLASS_NAMES):
        raise ValueError(
            f"{ckpt_dir}: class ordering {meta['classes']!r} does not match "
            f"this build ({','.join(CLASS_NAMES)})"
        )

    model_cfg = ModelConfig(**{n: _parse_field(n, meta[f"model.{n}"]) for n in _MODEL_FIELDS})
    train_cfg = TrainConfig(**{n: _parse_field(n, meta[f"train.{n}"]) for n in _TRAIN_FIELDS})
    canvas = tuple(int(v) for v in meta["canvas"].split(","))
    if canvas != model_cfg.canvas:
        raise ValueError(f"{ckpt_dir}: canvas {canvas} inconsistent with model config")

    arrays = read_blob(ckpt_dir / "params.bin")
    groups = {p: {} for p in ("gen", "disc", "gen_state", "disc_state",
                              "adam_gen_m", "adam_gen_v", "adam_disc_m", "adam_disc_v")}
    for name, arr in arrays.items():
        prefix, _, key = name.partition(":")
        groups[prefix][key] = arr

    params = ModelParams(
        gen=groups["gen"], disc=groups["disc"],
        gen_state=groups["gen_state"], disc_state=groups["disc_state"],
        init_seed=int(meta["init_seed"]),
    )
    gen_opt = AdamState(m=groups["adam_gen_m"], v=groups["adam_gen_v"],
                        step=int(meta["gen_opt_step"]))
    disc_opt = AdamState(m=groups["adam_disc_m"], v=groups["adam_disc_v"],
                         step=int(meta["disc_opt_step"]))
    rng_state = {
        "bit_generator": meta["rng_bit_generator"],
        "state": {"state": int(meta["rng_state"]), "inc": int(meta["rng_inc"])},
        "has_uint32": int(meta["rng_has_uint32"]),
        "uinteger": int(meta["rng_uinteger"]),
    }
    history = TrainHistory.from_csv((ckpt_dir / "history.csv").read_text())
    return Checkpoint(
        params=params, gen_opt=gen_opt, disc_opt=disc_opt,
        model_cfg=model_cfg, train_cfg=train_cfg,
        epoch=int(meta["epoch"]), rng_state=rng_state, history=history,
    )
