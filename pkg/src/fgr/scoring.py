"""Late-interaction core: MaxSim scoring, the residual feed-forward transform,
per-token relevance probabilities and evidence-span selection.

Document ranking always uses raw (untransformed) embeddings; the head only
produces the token-level output, so retrieval order is invariant under any
head parameters. Per the resource-overhead contract, transformed embeddings
are computed on the fly for the returned top-k hits and never persisted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fgr.backend import kernels
from fgr.embedder import TokenizedText, embed, tokenize
from fgr.errors import ParameterError, ShapeMismatchError
from fgr.index import Index, PassageRecord
from fgr.params import FgrHeadParams
from fgr.tensor import OpCounter, elementwise, l2_normalize_rows, matmul, sigmoid

# sigmoid(+-36) is the closest float64 gets to the open interval's endpoints
_LOGIT_CLAMP = 36.0


@dataclass(frozen=True)
class RelevanceProfile:
    """Per-document-token relevance probabilities with the winning query token."""

    probs: np.ndarray  # float64 in (0, 1), length = document token count
    argmax_query_token: np.ndarray  # int32, same length
    logits: np.ndarray  # pre-sigmoid max similarities, float64

    def __len__(self) -> int:
        return len(self.probs)


@dataclass(frozen=True)
class Span:
    token_start: int  # inclusive
    token_end: int  # inclusive
    char_start: int
    char_end: int  # half-open
    score: float  # max probability within the span


@dataclass(frozen=True)
class SearchHit:
    id: str
    score: float
    record: PassageRecord
    profile: RelevanceProfile | None = None
    spans: list[Span] | None = None


def maxsim_score(eq: np.ndarray, ed: np.ndarray) -> float:
    """Sum over query tokens of the max dot product against document tokens."""
    if eq.ndim != 2 or ed.ndim != 2 or eq.shape[1] != ed.shape[1]:
        raise ShapeMismatchError("maxsim_score", eq.shape, ed.shape)
    if eq.shape[0] < 1 or ed.shape[0] < 1:
        raise ParameterError("maxsim_score requires at least one token on each side")
    sims = eq.astype(np.float64) @ ed.astype(np.float64).T
    return float(sims.max(axis=1).sum())


def transform(e: np.ndarray, head: FgrHeadParams, counter: OpCounter | None = None) -> np.ndarray:
    """Residual feed-forward transform: E + relu(E W1) W2, not re-normalized.

    Counted cost is 4*n*h*h2 mul-adds plus n*h2 + n*h elementwise ops.
    """
    if e.ndim != 2 or e.shape[1] != head.h:
        raise ShapeMismatchError("transform", e.shape, head.w1.shape)
    h = head.astype(e.dtype)
    up = matmul(e, h.w1, counter)
    act = elementwise("relu", up, counter)
    down = matmul(act, h.w2, counter)
    out = e + down
    if counter is not None:
        counter.add_elementwise(int(e.size))
    return out


def _profile_from_transformed(eq_hat: np.ndarray, ed_hat: np.ndarray) -> RelevanceProfile:
    nd = ed_hat.shape[0]
    logits = np.empty(nd, dtype=np.float64)
    arg = np.empty(nd, dtype=np.int32)
    q32 = np.ascontiguousarray(eq_hat, dtype=np.float32)
    d32 = np.ascontiguousarray(ed_hat, dtype=np.float32)
    kernels.token_logits(q32, d32, logits, arg)
    probs = sigmoid(np.clip(logits, -_LOGIT_CLAMP, _LOGIT_CLAMP))
    return RelevanceProfile(probs=probs, argmax_query_token=arg, logits=logits)


def token_relevance(
    eq: np.ndarray,
    ed: np.ndarray,
    head: FgrHeadParams,
    counter: OpCounter | None = None,
) -> RelevanceProfile:
    """Relevance probability per document token.

    Both query and document embeddings go through the same head; each document
    token's logit is its max dot product over the transformed query tokens
    (ties keep the lowest query index).
    """
    if eq.shape[1] != ed.shape[1]:
        raise ShapeMismatchError("token_relevance", eq.shape, ed.shape)
    eq_hat = transform(eq, head, counter)
    ed_hat = transform(ed, head, counter)
    return _profile_from_transformed(eq_hat, ed_hat)


def select_spans(
    profile: RelevanceProfile,
    tok: TokenizedText,
    threshold: float,
    max_gap: int = 0,
) -> list[Span]:
    """Merge maximal runs of tokens with prob >= threshold into spans."""
    if not 0.0 < threshold < 1.0:
        raise ParameterError(f"threshold must be in (0, 1), got {threshold}")
    probs = profile.probs
    if len(probs) != len(tok.tokens):
        raise ShapeMismatchError("select_spans", (len(probs),), (len(tok.tokens),))
    spans: list[Span] = []
    run_start: int | None = None
    last_hit = -1
    for i, p in enumerate(probs):
        if p >= threshold:
            if run_start is None or i - last_hit > max_gap + 1:
                if run_start is not None:
                    spans.append(_make_span(run_start, last_hit, probs, tok))
                run_start = i
            last_hit = i
    if run_start is not None:
        spans.append(_make_span(run_start, last_hit, probs, tok))
    return spans


def _make_span(start: int, end: int, probs: np.ndarray, tok: TokenizedText) -> Span:
    return Span(
        token_start=start,
        token_end=end,
        char_start=tok.tokens[start].start,
        char_end=tok.tokens[end].end,
        score=float(probs[start : end + 1].max()),
    )


def search(
    index: Index,
    query_text: str,
    k: int,
    head: FgrHeadParams | None = None,
    threshold: float = 0.5,
    projection: np.ndarray | None = None,
    counter: OpCounter | None = None,
) -> list[SearchHit]:
    """Exact MaxSim ranking over all passages, descending score, ties by id.

    Scores use raw embeddings only (projected through P when given, but never
    through the head). When a head is supplied, relevance profiles and spans
    are computed for the returned top-k hits only.
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    tok = tokenize(query_text)
    xq = embed(tok, index.manifest.embedder)
    if projection is not None:
        eq = l2_normalize_rows(matmul(xq, np.ascontiguousarray(projection, dtype=np.float32)))
    else:
        eq = xq
    corpus, bounds = index.packed(projection)
    scores = np.empty(index.m, dtype=np.float64)
    kernels.maxsim_scores(np.ascontiguousarray(eq), corpus, bounds, scores)

    ids = index.ids
    order = sorted(range(index.m), key=lambda i: (-scores[i], ids[i]))[:k]

    eq_hat = transform(eq, head, counter) if head is not None else None
    hits: list[SearchHit] = []
    for i in order:
        rec = index.get_passage(ids[i])
        profile = spans = None
        if head is not None:
            ed = corpus[bounds[i] : bounds[i + 1]]
            ed_hat = transform(ed, head, counter)
            profile = _profile_from_transformed(eq_hat, ed_hat)
            spans = select_spans(profile, rec.tok, threshold)
        hits.append(
            SearchHit(id=ids[i], score=float(scores[i]), record=rec, profile=profile, spans=spans)
        )
    return hits
