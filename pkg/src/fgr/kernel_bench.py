"""Benchmark comparing the compiled kernels against the numpy fallback.

Imports both implementations directly (ignoring the import-time selection),
checks that they agree numerically, and times the three hot kernels on
serving-shaped inputs.
"""

from __future__ import annotations

import json
import time

import numpy as np

from fgr import _kernels_py

try:
    from fgr import _kernels
except ImportError:
    _kernels = None


def _time_ms(fn, reps: int) -> float:
    fn()  # warmup
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) * 1000.0 / reps


def bench_kernels(
    n_docs: int = 500,
    doc_tokens: int = 48,
    query_tokens: int = 8,
    h: int = 128,
    h2: int = 768,
    reps: int = 20,
    seed: int = 0,
) -> dict:
    rng = np.random.default_rng(seed)
    q = rng.standard_normal((query_tokens, h)).astype(np.float32)
    corpus = rng.standard_normal((n_docs * doc_tokens, h)).astype(np.float32)
    bounds = np.arange(0, (n_docs + 1) * doc_tokens, doc_tokens, dtype=np.int64)
    e = rng.standard_normal((doc_tokens, h)).astype(np.float32)
    w1 = (rng.standard_normal((h, h2)) / np.sqrt(h)).astype(np.float32)
    doc = rng.standard_normal((doc_tokens, h)).astype(np.float32)

    impls = {"numpy": _kernels_py}
    if _kernels is not None:
        impls["cython"] = _kernels

    report: dict = {
        "shapes": {
            "n_docs": n_docs, "doc_tokens": doc_tokens,
            "query_tokens": query_tokens, "h": h, "h2": h2,
        },
        "reps": reps,
        "compiled_available": _kernels is not None,
        "timings_ms": {},
        "agreement": {},
    }

    results: dict = {}
    for name, impl in impls.items():
        mm_out = np.zeros((doc_tokens, h2), dtype=np.float32)
        ms_out = np.empty(n_docs, dtype=np.float64)
        tl_logits = np.empty(doc_tokens, dtype=np.float64)
        tl_arg = np.empty(doc_tokens, dtype=np.int32)

        def run_matmul():
            mm_out[:] = 0.0
            impl.matmul(e, w1, mm_out)

        timings = {
            "matmul": _time_ms(run_matmul, reps),
            "maxsim_scores": _time_ms(lambda: impl.maxsim_scores(q, corpus, bounds, ms_out), reps),
            "token_logits": _time_ms(lambda: impl.token_logits(q, doc, tl_logits, tl_arg), reps),
        }
        report["timings_ms"][name] = timings
        results[name] = {
            "matmul": mm_out.copy(),
            "maxsim_scores": ms_out.copy(),
            "token_logits": tl_logits.copy(),
            "argmax": tl_arg.copy(),
        }

    if _kernels is not None:
        a, b = results["cython"], results["numpy"]
        report["agreement"] = {
            "matmul_max_abs_diff": float(np.max(np.abs(a["matmul"] - b["matmul"]))),
            "maxsim_max_abs_diff": float(np.max(np.abs(a["maxsim_scores"] - b["maxsim_scores"]))),
            "token_logits_max_abs_diff": float(np.max(np.abs(a["token_logits"] - b["token_logits"]))),
            "argmax_equal": bool(np.array_equal(a["argmax"], b["argmax"])),
        }
        report["speedup_cython_over_numpy"] = {
            op: report["timings_ms"]["numpy"][op] / report["timings_ms"]["cython"][op]
            for op in ("matmul", "maxsim_scores", "token_logits")
        }
    return report


def main() -> None:
    print(json.dumps(bench_kernels(), indent=2))


if __name__ == "__main__":
    main()
