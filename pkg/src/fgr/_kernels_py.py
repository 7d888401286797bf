"""Numpy fallback for the compiled kernels in fgr._kernels.

Same signatures and semantics; used when the extension is not built or when
FGR_KERNELS=numpy. Scores and logits accumulate in float64, matching the
compiled kernels up to summation order.
"""

from __future__ import annotations

import numpy as np


def matmul(a: np.ndarray, b: np.ndarray, out: np.ndarray) -> None:
    np.matmul(a, b, out=out)


def maxsim_scores(q: np.ndarray, corpus: np.ndarray, bounds: np.ndarray, out: np.ndarray) -> None:
    sims = q.astype(np.float64) @ corpus.astype(np.float64).T
    # max over each passage's token columns, then sum over query tokens
    seg_max = np.maximum.reduceat(sims, bounds[:-1], axis=1)
    np.sum(seg_max, axis=0, out=out)


def token_logits(q: np.ndarray, d: np.ndarray, out_logits: np.ndarray, out_arg: np.ndarray) -> None:
    sims = q.astype(np.float64) @ d.astype(np.float64).T
    np.max(sims, axis=0, out=out_logits)
    # argmax returns the first maximum: ties keep the lowest query index
    out_arg[:] = np.argmax(sims, axis=0).astype(np.int32)
