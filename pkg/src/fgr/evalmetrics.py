"""Evaluation metrics and resource benchmarks.

Token-level F1 ("plausibility") and Recall@k for quality; an analytic FLOP
estimator cross-checked against the instrumented counter, and a latency
harness for the with/without-head search overhead. Latency numbers are
hardware-dependent and are reported, never asserted against fixed targets.
"""

from __future__ import annotations

import json
import logging
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from fgr.errors import ParameterError, ShapeMismatchError
from fgr.index import Index
from fgr.params import FgrHeadParams
from fgr.scoring import search, transform
from fgr.tensor import OpCounter

logger = logging.getLogger(__name__)


def token_f1(pred, gold) -> tuple[float, float, float]:
    """Set-overlap precision/recall/F1 over token indices.

    Edge rule: both masks empty scores (1, 1, 1); empty gold with non-empty
    pred scores (0, 0, 0).
    """
    p = np.asarray(pred, dtype=bool)
    g = np.asarray(gold, dtype=bool)
    if p.shape != g.shape:
        raise ShapeMismatchError("token_f1", p.shape, g.shape)
    tp = int(np.sum(p & g))
    n_pred = int(p.sum())
    n_gold = int(g.sum())
    if n_pred == 0 and n_gold == 0:
        return 1.0, 1.0, 1.0
    if tp == 0:
        return 0.0, 0.0, 0.0
    precision = tp / n_pred
    recall = tp / n_gold
    return precision, recall, 2 * precision * recall / (precision + recall)


@dataclass
class PlausibilityReport:
    threshold: float
    per_example: dict  # id -> {"precision", "recall", "f1"}
    mean_f1: float
    example_count: int
    missing: list = field(default_factory=list)
    micro_f1: float | None = None

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "per_example": self.per_example,
            "mean_f1": self.mean_f1,
            "example_count": self.example_count,
            "missing": self.missing,
            "micro_f1": self.micro_f1,
        }


def plausibility(outputs: dict, gold: dict, threshold: float,
                 micro: bool = False) -> PlausibilityReport:
    """Macro-averaged token F1 of thresholded probabilities against gold masks.

    outputs: id -> per-token probabilities; gold: id -> 0/1 mask. Examples
    without gold are listed, warned about and excluded. micro=True also pools
    tokens across examples into one F1.
    """
    per_example: dict = {}
    missing: list = []
    f1s: list[float] = []
    pooled_tp = pooled_pred = pooled_gold = 0
    for ex_id in sorted(outputs):
        if ex_id not in gold:
            missing.append(ex_id)
            logger.warning("no gold annotation for example %s; excluded", ex_id)
            continue
        probs = np.asarray(outputs[ex_id], dtype=np.float64)
        pred = probs >= threshold
        g = np.asarray(gold[ex_id], dtype=bool)
        p, r, f1 = token_f1(pred, g)
        per_example[ex_id] = {"precision": p, "recall": r, "f1": f1}
        f1s.append(f1)
        pooled_tp += int(np.sum(pred & g))
        pooled_pred += int(pred.sum())
        pooled_gold += int(g.sum())
    if not f1s:
        raise ParameterError("no examples with gold annotations to evaluate")
    micro_f1 = None
    if micro:
        if pooled_pred == 0 and pooled_gold == 0:
            micro_f1 = 1.0
        elif pooled_tp == 0:
            micro_f1 = 0.0
        else:
            mp, mr = pooled_tp / pooled_pred, pooled_tp / pooled_gold
            micro_f1 = 2 * mp * mr / (mp + mr)
    return PlausibilityReport(
        threshold=threshold,
        per_example=per_example,
        mean_f1=float(np.mean(f1s)),
        example_count=len(f1s),
        missing=missing,
        micro_f1=micro_f1,
    )


def recall_at_k(run: dict, qrels: dict, k: int) -> float:
    """Fraction of qrels queries with a relevant id in the top k of the run."""
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if not qrels:
        raise ParameterError("empty qrels")
    hits = 0
    for qid, relevant in qrels.items():
        ranked = run.get(qid)
        if ranked is None:
            logger.warning("query %s missing from run; counted as a miss", qid)
            continue
        if set(ranked[:k]) & set(relevant):
            hits += 1
    return hits / len(qrels)


def flops_estimate(n: int, h: int, h2: int) -> int:
    """Closed-form transform cost: 4*n*h*h2 + n*h2 + n*h."""
    if n < 0 or h < 0 or h2 < 0:
        raise ParameterError("dimensions must be non-negative")
    return 4 * n * h * h2 + n * h2 + n * h


@dataclass
class BenchReport:
    h: int
    h2: int
    k: int
    reps: int
    query_count: int
    doc_tokens: list  # token counts of the benchmarked top-k docs
    analytic_flops: int
    counted_mul_adds: int
    counted_elementwise: int
    transform_ms: dict  # mean, sd, median_of_means
    search_ms: dict
    search_with_head_ms: dict
    overhead_ratio: float
    kernel_backend: str = ""

    def to_dict(self) -> dict:
        return {
            "h": self.h, "h2": self.h2, "k": self.k, "reps": self.reps,
            "query_count": self.query_count, "doc_tokens": self.doc_tokens,
            "analytic_flops": self.analytic_flops,
            "counted_mul_adds": self.counted_mul_adds,
            "counted_elementwise": self.counted_elementwise,
            "transform_ms": self.transform_ms,
            "search_ms": self.search_ms,
            "search_with_head_ms": self.search_with_head_ms,
            "overhead_ratio": self.overhead_ratio,
            "kernel_backend": self.kernel_backend,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BenchReport":
        return cls(**d)


def _timing_stats(samples_ms: list[float]) -> dict:
    mean = statistics.fmean(samples_ms)
    sd = statistics.stdev(samples_ms) if len(samples_ms) > 1 else 0.0
    chunk = max(1, len(samples_ms) // 5)
    means = [statistics.fmean(samples_ms[i : i + chunk])
             for i in range(0, len(samples_ms), chunk)]
    return {"mean": mean, "sd": sd, "median_of_means": statistics.median(means)}


def bench_overhead(index: Index, queries: list[str], head: FgrHeadParams,
                   k: int, reps: int = 30, warmup: int = 3) -> BenchReport:
    """Measure transform-only latency and with/without-head search latency.

    Also verifies, as part of the run, that the instrumented transform cost
    over the benchmarked documents equals the analytic closed form exactly.
    """
    if reps < 30:
        raise ParameterError(f"reps must be >= 30, got {reps}")
    if not queries:
        raise ParameterError("empty query set")

    top_docs = []
    for q in queries:
        for hit in search(index, q, k):
            top_docs.append(hit.record.emb)
    doc_tokens = [int(m.shape[0]) for m in top_docs]

    counter = OpCounter()
    for m in top_docs:
        transform(m, head, counter)
    analytic = sum(flops_estimate(n, head.h, head.h2) for n in doc_tokens)
    analytic_mul_adds = sum(4 * n * head.h * head.h2 for n in doc_tokens)
    if counter.mul_adds != analytic_mul_adds or counter.total != analytic:
        raise AssertionError(
            f"instrumented transform cost {counter.total} != analytic {analytic}"
        )

    for _ in range(warmup):
        for m in top_docs:
            transform(m, head)
        for q in queries:
            search(index, q, k)
            search(index, q, k, head=head)

    transform_ms, search_ms, with_head_ms = [], [], []
    for _ in range(reps):
        t0 = time.perf_counter()
        for m in top_docs:
            transform(m, head)
        transform_ms.append((time.perf_counter() - t0) * 1000.0)

        t0 = time.perf_counter()
        for q in queries:
            search(index, q, k)
        search_ms.append((time.perf_counter() - t0) * 1000.0)

        t0 = time.perf_counter()
        for q in queries:
            search(index, q, k, head=head)
        with_head_ms.append((time.perf_counter() - t0) * 1000.0)

    s_stats = _timing_stats(search_ms)
    w_stats = _timing_stats(with_head_ms)
    from fgr.backend import KERNEL_BACKEND

    return BenchReport(
        h=head.h, h2=head.h2, k=k, reps=reps, query_count=len(queries),
        doc_tokens=doc_tokens,
        analytic_flops=analytic,
        counted_mul_adds=counter.mul_adds,
        counted_elementwise=counter.elementwise,
        transform_ms=_timing_stats(transform_ms),
        search_ms=s_stats,
        search_with_head_ms=w_stats,
        overhead_ratio=w_stats["mean"] / s_stats["mean"],
        kernel_backend=KERNEL_BACKEND,
    )


def write_report(path, report) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)


def read_bench_report(path) -> BenchReport:
    with open(path, "r", encoding="utf-8") as fh:
        return BenchReport.from_dict(json.load(fh))
