"""Trainable parameters and their binary serialization.

The params file (little-endian) is: magic "FGRW", version u32, h u32, h2 u32,
then P (h*h), W1 (h*h2), W2 (h2*h) as float32 row-major.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from fgr.errors import BadMagicError, BadVersionError, ParameterError, TruncatedFileError

MAGIC = b"FGRW"
FORMAT_VERSION = 1


@dataclass
class FgrHeadParams:
    """Residual feed-forward head: W1 is h x h2, W2 is h2 x h."""

    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        if self.w1.ndim != 2 or self.w2.ndim != 2:
            raise ParameterError("head weights must be 2-D")
        if self.w1.shape[1] != self.w2.shape[0] or self.w1.shape[0] != self.w2.shape[1]:
            raise ParameterError(
                f"inconsistent head shapes {self.w1.shape} and {self.w2.shape}"
            )

    @property
    def h(self) -> int:
        return self.w1.shape[0]

    @property
    def h2(self) -> int:
        return self.w1.shape[1]

    def astype(self, dtype) -> "FgrHeadParams":
        return FgrHeadParams(
            np.ascontiguousarray(self.w1, dtype=dtype),
            np.ascontiguousarray(self.w2, dtype=dtype),
        )


def init_head(h: int, h2: int, seed: int = 0) -> FgrHeadParams:
    """W1 uniform in +-1/sqrt(h), W2 zero: the transform starts as identity."""
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(h)
    w1 = rng.uniform(-bound, bound, size=(h, h2))
    w2 = np.zeros((h2, h))
    return FgrHeadParams(w1, w2)


@dataclass
class ModelParams:
    """Full trainable set: encoder projection P plus the relevance head."""

    projection: np.ndarray  # h x h
    head: FgrHeadParams

    def __post_init__(self):
        p = self.projection
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ParameterError(f"projection must be square, got {p.shape}")
        if p.shape[0] != self.head.h:
            raise ParameterError(
                f"projection dim {p.shape[0]} does not match head dim {self.head.h}"
            )

    @property
    def h(self) -> int:
        return self.projection.shape[0]

    @property
    def h2(self) -> int:
        return self.head.h2


def init_params(h: int, h2: int, seed: int = 0) -> ModelParams:
    return ModelParams(projection=np.eye(h), head=init_head(h, h2, seed=seed))


def save_params(path, params: ModelParams) -> None:
    p = np.ascontiguousarray(params.projection, dtype=np.float32)
    w1 = np.ascontiguousarray(params.head.w1, dtype=np.float32)
    w2 = np.ascontiguousarray(params.head.w2, dtype=np.float32)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", FORMAT_VERSION, params.h, params.h2))
        for mat in (p, w1, w2):
            data = mat if np.little_endian else mat.byteswap()
            fh.write(data.tobytes())


def load_params(path) -> ModelParams:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if len(magic) != 4:
            raise TruncatedFileError("params file shorter than its magic")
        if magic != MAGIC:
            raise BadMagicError(MAGIC, magic)
        header = fh.read(12)
        if len(header) != 12:
            raise TruncatedFileError("params file missing header")
        version, h, h2 = struct.unpack("<III", header)
        if version != FORMAT_VERSION:
            raise BadVersionError(FORMAT_VERSION, version)
        mats = []
        for rows, cols, name in ((h, h, "P"), (h, h2, "W1"), (h2, h, "W2")):
            raw = fh.read(4 * rows * cols)
            if len(raw) != 4 * rows * cols:
                raise TruncatedFileError(f"params file truncated inside {name}")
            mats.append(np.frombuffer(raw, dtype="<f4").reshape(rows, cols).astype(np.float32))
    return ModelParams(projection=mats[0], head=FgrHeadParams(mats[1], mats[2]))
