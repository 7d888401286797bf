"""Minimal dense linear algebra with instrumented operation counting.

Matrices are 2-D C-contiguous numpy arrays, float32 for serving and float64
for the gradient-checking mirror. Every exported operation validates that its
output is finite. The multiply-add counter follows the 2abc convention for an
a x b times b x c product; elementwise passes (activations, residual adds) are
counted separately so that the feed-forward transform cost reduces to an exact
integer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fgr.backend import kernels
from fgr.errors import ParameterError, ShapeMismatchError, ZeroRowError

_FLOAT_DTYPES = (np.float32, np.float64)


@dataclass
class OpCounter:
    """Accumulates multiply-adds and elementwise operations within a scope."""

    mul_adds: int = 0
    elementwise: int = 0

    def add_mul_adds(self, n: int) -> None:
        if n < 0:
            raise ParameterError("op counts cannot decrease")
        self.mul_adds += n

    def add_elementwise(self, n: int) -> None:
        if n < 0:
            raise ParameterError("op counts cannot decrease")
        self.elementwise += n

    @property
    def total(self) -> int:
        return self.mul_adds + self.elementwise

    def reset(self) -> None:
        self.mul_adds = 0
        self.elementwise = 0


def as_matrix(x, dtype=np.float32) -> np.ndarray:
    """Coerce to a C-contiguous 2-D array of the given float dtype."""
    m = np.ascontiguousarray(x, dtype=dtype)
    if m.ndim != 2:
        raise ParameterError(f"expected a 2-D matrix, got ndim={m.ndim}")
    return m


def _check_finite(m: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(m).all():
        raise ParameterError(f"{op} produced non-finite values")
    return m


def matmul(a: np.ndarray, b: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    """Matrix product; counts exactly 2 * a.rows * a.cols * b.cols mul-adds."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatchError("matmul", a.shape, b.shape)
    if a.dtype != b.dtype or a.dtype.type not in _FLOAT_DTYPES:
        raise ParameterError(f"matmul requires matching float dtypes, got {a.dtype} and {b.dtype}")
    a = np.ascontiguousarray(a)
    b = np.ascontiguousarray(b)
    out = np.zeros((a.shape[0], b.shape[1]), dtype=a.dtype)
    kernels.matmul(a, b, out)
    if counter is not None:
        counter.add_mul_adds(2 * a.shape[0] * a.shape[1] * b.shape[1])
    return _check_finite(out, "matmul")


def l2_normalize_rows(m: np.ndarray) -> np.ndarray:
    """Scale each row to unit Euclidean norm; all-zero rows are an error."""
    if m.ndim != 2:
        raise ParameterError(f"expected a 2-D matrix, got ndim={m.ndim}")
    norms = np.linalg.norm(m.astype(np.float64, copy=False), axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroRowError(int(zero[0]))
    out = (m / norms[:, None].astype(m.dtype)).astype(m.dtype)
    return _check_finite(out, "l2_normalize_rows")


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def elementwise(kind: str, m: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    """Apply sigmoid or relu entrywise; counts rows * cols elementwise ops."""
    if kind == "sigmoid":
        out = sigmoid(m)
    elif kind == "relu":
        out = np.maximum(m, 0)
    else:
        raise ParameterError(f"unknown elementwise kind {kind!r}")
    if counter is not None:
        counter.add_elementwise(int(m.size))
    return _check_finite(out, f"elementwise {kind}")


def softmax_and_log_softmax(v: np.ndarray, temperature: float = 1.0):
    """Temperature softmax of a vector, max-shifted for stability.

    Returns (probs, log_probs) as float64 arrays.
    """
    if temperature <= 0:
        raise ParameterError(f"temperature must be positive, got {temperature}")
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ParameterError("softmax of an empty vector")
    if not np.isfinite(v).all():
        raise ParameterError("softmax input must be finite")
    z = v / temperature
    z = z - z.max()
    log_norm = np.log(np.sum(np.exp(z)))
    log_probs = z - log_norm
    return np.exp(log_probs), log_probs
