"""Binary checkpoint container.

Layout: the ASCII line ``CASO1``, a text header of ``key = value`` lines
closed by a line ``end``, then the parameter blocks back to back as
little-endian float64 in row-major order.  The header records each block's
name and shape, so readers need nothing else to slice the payload.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TrainingConfig, parse_overrides

MAGIC = b"CASO1\n"
_DTYPE = np.dtype("<f8")


@dataclass
class Checkpoint:
    config: TrainingConfig
    blocks: dict[str, np.ndarray]
    meta: dict[str, str] = field(default_factory=dict)

    @property
    def user_base(self) -> np.ndarray:
        return self.blocks["user_base"]

    @property
    def community_emb(self) -> np.ndarray:
        return self.blocks["community"]

    @property
    def user_final(self) -> np.ndarray:
        return self.blocks["user_final"]


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    for k, v in ckpt.meta.items():
        if "\n" in f"{k}{v}":
            raise ValueError("header values must be single-line")
    lines = [f"meta.{k} = {v}" for k, v in ckpt.meta.items()]
    lines += [f"config.{k} = {v}" for k, v in ckpt.config.to_items()]
    for name, arr in ckpt.blocks.items():
        if arr.ndim != 2:
            raise ValueError(f"block {name!r} must be 2-D")
        lines.append(f"block.{name} = {arr.shape[0]} {arr.shape[1]}")
    header = "".join(line + "\n" for line in lines) + "end\n"
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header.encode("ascii"))
        for arr in ckpt.blocks.values():
            fh.write(np.ascontiguousarray(arr, dtype=_DTYPE).tobytes())


def load_checkpoint(path) -> Checkpoint:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    pos = len(MAGIC)
    meta, cfg_items, shapes = {}, {}, {}
    while True:
        nl = data.find(b"\n", pos)
        if nl < 0:
            raise ValueError(f"{path}: truncated header")
        line = data[pos:nl].decode("ascii")
        pos = nl + 1
        if line == "end":
            break
        key, _, value = line.partition(" = ")
        kind, _, name = key.partition(".")
        if kind == "meta":
            meta[name] = value
        elif kind == "config":
            cfg_items[name] = value
        elif kind == "block":
            shapes[name] = tuple(int(x) for x in value.split())
        else:
            raise ValueError(f"{path}: unknown header key {key!r}")
    blocks = {}
    for name, shape in shapes.items():
        nbytes = int(np.prod(shape)) * _DTYPE.itemsize
        if pos + nbytes > len(data):
            raise ValueError(f"{path}: truncated block {name!r}")
        blocks[name] = np.frombuffer(data, dtype=_DTYPE, count=int(np.prod(shape)), offset=pos).reshape(shape).copy()
        pos += nbytes
    if pos != len(data):
        raise ValueError(f"{path}: {len(data) - pos} trailing bytes")
    return Checkpoint(TrainingConfig(**parse_overrides(cfg_items)), blocks, meta)
