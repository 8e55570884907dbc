"""Binary MPS serialization: versioned header, per-site shapes, row-major
complex entries.  Used by the runner for checkpointing solved states."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .mps import MatrixProductState

_MAGIC = b"MPS1"
_VERSION = 1
_MODEL_CODES = {"half": 0, "one": 1, "": 255}
_MODEL_NAMES = {v: k for k, v in _MODEL_CODES.items()}


@dataclass(frozen=True)
class StateHeader:
    model: str
    length: int
    local_dim: int
    max_bond: int
    seed: int


def save_mps(psi: MatrixProductState, path, model: str = "", seed: int = 0) -> None:
    code = _MODEL_CODES.get(model)
    if code is None:
        raise ValueError(f"unknown model tag {model!r}")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(
            struct.pack(
                "<IBIIIQ",
                _VERSION,
                code,
                psi.length,
                psi.local_dim,
                psi.max_bond,
                seed & ((1 << 64) - 1),
            )
        )
        for t in psi.tensors:
            fh.write(struct.pack("<III", *t.shape))
            fh.write(np.ascontiguousarray(t, dtype=np.complex128).tobytes())


def load_mps(path) -> tuple[MatrixProductState, StateHeader]:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not an MPS state file")
        version, code, length, d, max_bond, seed = struct.unpack(
            "<IBIIIQ", fh.read(struct.calcsize("<IBIIIQ"))
        )
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported state-file version {version}")
        tensors = []
        for _ in range(length):
            shape = struct.unpack("<III", fh.read(12))
            n = shape[0] * shape[1] * shape[2]
            buf = fh.read(16 * n)
            tensors.append(np.frombuffer(buf, dtype=np.complex128).reshape(shape))
    header = StateHeader(
        model=_MODEL_NAMES[code], length=length, local_dim=d, max_bond=max_bond,
        seed=seed,
    )
    return MatrixProductState(tensors, max_bond=max_bond), header
