"""Self-describing binary checkpoint container.

Layout (all integers little-endian)::

    b"HBPNCKPT"  magic
    u32          format version
    u32 + bytes  UTF-8 JSON header (model config, optimizer settings, progress)
    u32          tensor count
    per tensor:  u16 name length, UTF-8 name, u8 rank, u32 * rank dims,
                 raw float32 little-endian values

Parameters are stored under ``param/<name>``; Adam moments under
``adam.m/<name>`` and ``adam.v/<name>``.
"""

from __future__ import annotations

import json
import os
import struct
from typing import BinaryIO

import numpy as np

from .autodiff import AdamState
from .network import HBPNModel, ModelConfig

MAGIC = b"HBPNCKPT"
VERSION = 1
_F32 = np.dtype("<f4")


class CheckpointError(ValueError):
    pass


def write_container(path, header: dict, tensors: dict[str, np.ndarray]) -> None:
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        blob = json.dumps(header, sort_keys=True).encode("utf-8")
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(np.ascontiguousarray(arr, dtype=_F32).tobytes())
    os.replace(tmp, path)


def _read_exact(f: BinaryIO, n: int, path) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CheckpointError(f"{path}: truncated checkpoint")
    return data


def read_container(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        if f.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path}: not an HBPN checkpoint (bad magic)")
        (version,) = struct.unpack("<I", _read_exact(f, 4, path))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        (hlen,) = struct.unpack("<I", _read_exact(f, 4, path))
        header = json.loads(_read_exact(f, hlen, path).decode("utf-8"))
        (count,) = struct.unpack("<I", _read_exact(f, 4, path))
        tensors = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", _read_exact(f, 2, path))
            name = _read_exact(f, nlen, path).decode("utf-8")
            (ndim,) = struct.unpack("<B", _read_exact(f, 1, path))
            shape = struct.unpack(f"<{ndim}I", _read_exact(f, 4 * ndim, path))
            size = int(np.prod(shape, dtype=np.int64))
            raw = _read_exact(f, size * 4, path)
            tensors[name] = np.frombuffer(raw, dtype=_F32).reshape(shape).astype(np.float32)
    return header, tensors


def save_checkpoint(path, model: HBPNModel, adam: AdamState | None = None,
                    progress: dict | None = None) -> None:
    header = {"model": model.config.to_dict(), "progress": progress or {}}
    tensors = {f"param/{name}": t.data for name, t in model.named_parameters()}
    if adam is not None:
        header["adam"] = {
            "lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2, "eps": adam.eps,
            "weight_decay": adam.weight_decay, "step": adam.step, "skipped": adam.skipped,
        }
        for name in adam.m:
            tensors[f"adam.m/{name}"] = adam.m[name]
            tensors[f"adam.v/{name}"] = adam.v[name]
    write_container(path, header, tensors)


def load_checkpoint(path) -> tuple[HBPNModel, AdamState | None, dict]:
    """Rebuild the model (and Adam state, if stored).  Returns (model, adam, header)."""
    header, tensors = read_container(path)
    try:
        config = ModelConfig(**header["model"])
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: bad model header ({exc})") from exc
    model = HBPNModel(config)
    params = dict(model.named_parameters())
    for name, t in params.items():
        key = f"param/{name}"
        if key not in tensors:
            raise CheckpointError(f"{path}: missing parameter {name}")
        if tensors[key].shape != t.shape:
            raise CheckpointError(f"{path}: parameter {name} has shape {tensors[key].shape}, expected {t.shape}")
        t.data[...] = tensors[key]
    extra = sorted(k[6:] for k in tensors if k.startswith("param/") and k[6:] not in params)
    if extra:
        raise CheckpointError(f"{path}: unexpected parameters {extra[:3]}")

    adam = None
    if "adam" in header:
        h = header["adam"]
        adam = AdamState(lr=h["lr"], beta1=h["beta1"], beta2=h["beta2"], eps=h["eps"],
                         weight_decay=h["weight_decay"], step=h["step"], skipped=h.get("skipped", 0))
        for key, arr in tensors.items():
            if key.startswith("adam.m/"):
                adam.m[key[7:]] = arr.copy()
            elif key.startswith("adam.v/"):
                adam.v[key[7:]] = arr.copy()
    return model, adam, header
