"""Regenerate the golden span fixture consumed by the frontend tests.

The fixture freezes the server-side span segmentation (mask at p >= threshold,
adjacent tokens merge) for 10 hits at thresholds {0.3, 0.5, 0.7}, plus one
canned /search response for the render-order test. Deterministic; run from
the repo root:

    python3 frontend/scripts/generate_fixture.py
"""

import json
import random
from pathlib import Path

import numpy as np

from fgr.embedder import tokenize
from fgr.scoring import RelevanceProfile, select_spans

THRESHOLDS = (0.3, 0.5, 0.7)
OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "golden.json"

WORDS = (
    "amber basil cedar delta ember fjord garnet hazel iris juniper krill lotus "
    "maple nectar onyx poplar quartz raffia sable tamarind umber vessel willow"
).split()


def probs_for(rng: random.Random, n: int, style: str) -> list[float]:
    """Per-token probabilities on a 1/64 grid, plus threshold-exact values."""
    if style == "all_low":
        return [rng.randint(1, 17) / 64 for _ in range(n)]
    if style == "all_high":
        return [rng.randint(48, 63) / 64 for _ in range(n)]
    ps = [rng.randint(1, 63) / 64 for _ in range(n)]
    if style == "threshold_exact":
        ps[0] = 0.3
        ps[n // 2] = 0.5
        ps[n - 1] = 0.7
    if style == "plateau":
        start = rng.randint(0, n - 4)
        for i in range(start, start + 4):
            ps[i] = rng.randint(50, 62) / 64
    return ps


def build_hits():
    rng = random.Random(20240)
    styles = ["mixed", "plateau", "threshold_exact", "all_low", "all_high",
              "mixed", "plateau", "mixed", "threshold_exact", "plateau"]
    hits = []
    for i, style in enumerate(styles):
        n = rng.randint(6, 18)
        text = " ".join(rng.choice(WORDS) for _ in range(n))
        tok = tokenize(text)
        ps = probs_for(rng, len(tok.tokens), style)
        profile = RelevanceProfile(
            probs=np.asarray(ps, dtype=np.float64),
            argmax_query_token=np.zeros(len(ps), dtype=np.int32),
            logits=np.asarray(ps, dtype=np.float64),
        )
        spans_at = {}
        for thr in THRESHOLDS:
            spans_at[str(thr)] = [
                {"ts": s.token_start, "te": s.token_end, "cb": s.char_start,
                 "ce": s.char_end, "score": s.score}
                for s in select_spans(profile, tok, thr)
            ]
        hits.append({
            "id": f"g{i:02d}",
            "score": round(10.0 - i * 0.7, 4),
            "text": text,
            "tokens": [
                {"s": t.surface, "b": t.start, "e": t.end, "p": p}
                for t, p in zip(tok.tokens, ps)
            ],
            "spans_at": spans_at,
        })
    return hits


def fixture() -> dict:
    hits = build_hits()
    response_hits = [
        {"id": h["id"], "score": h["score"], "text": h["text"],
         "tokens": h["tokens"], "spans": h["spans_at"]["0.5"]}
        for h in hits
    ]
    return {
        "thresholds": list(THRESHOLDS),
        "hits": hits,
        "search_response": {"hits": response_hits, "latency_ms": 12.5},
    }


def main() -> None:
    OUT.parent.mkdir(parents=True, exist_ok=True)
    with open(OUT, "w", encoding="utf-8") as fh:
        json.dump(fixture(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
