"""Self-describing binary checkpoints: architecture, parameters, optional
mask, and run metadata.  Round-trips are bitwise lossless."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .network import MlpSpec

__all__ = ["Checkpoint", "save_checkpoint", "load_checkpoint"]

_MAGIC = b"AWTC"
_VERSION = 1


@dataclass(frozen=True)
class Checkpoint:
    spec: MlpSpec
    params: np.ndarray
    mask: Optional[np.ndarray]
    seed: int
    config_hash: str
    phase: str

    def __post_init__(self):
        if self.params.shape != (self.spec.num_params,):
            raise ValueError("parameter length does not match spec")
        if self.mask is not None and self.mask.shape != self.params.shape:
            raise ValueError("mask length does not match parameters")


def _write_str(fh, s: str) -> None:
    raw = s.encode()
    fh.write(struct.pack("<H", len(raw)))
    fh.write(raw)


def _read_str(fh) -> str:
    (n,) = struct.unpack("<H", fh.read(2))
    return fh.read(n).decode()


def save_checkpoint(ck: Checkpoint, path) -> None:
    """Layout: magic, version u16, layer count u16, sizes u32[], seed u64,
    phase, config hash, mask flag u8, params f64 LE, mask f64 LE."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HH", _VERSION, len(ck.spec.layer_sizes)))
        fh.write(struct.pack(f"<{len(ck.spec.layer_sizes)}I", *ck.spec.layer_sizes))
        fh.write(struct.pack("<Q", ck.seed))
        _write_str(fh, ck.phase)
        _write_str(fh, ck.config_hash)
        fh.write(struct.pack("<B", 0 if ck.mask is None else 1))
        fh.write(np.ascontiguousarray(ck.params, dtype="<f8").tobytes())
        if ck.mask is not None:
            fh.write(np.ascontiguousarray(ck.mask, dtype="<f8").tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("bad checkpoint magic")
        version, n_sizes = struct.unpack("<HH", fh.read(4))
        if version != _VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        sizes = struct.unpack(f"<{n_sizes}I", fh.read(4 * n_sizes))
        (seed,) = struct.unpack("<Q", fh.read(8))
        phase = _read_str(fh)
        config_hash = _read_str(fh)
        (has_mask,) = struct.unpack("<B", fh.read(1))
        spec = MlpSpec(sizes)
        p = spec.num_params
        params = np.frombuffer(fh.read(8 * p), dtype="<f8")
        if params.size != p:
            raise ValueError("truncated checkpoint parameters")
        mask = None
        if has_mask:
            mask = np.frombuffer(fh.read(8 * p), dtype="<f8")
            if mask.size != p:
                raise ValueError("truncated checkpoint mask")
            mask = mask.copy()
    return Checkpoint(spec, params.copy(), mask, seed, config_hash, phase)
