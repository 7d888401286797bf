"""Synthetic planted-evidence dataset for desk-scale training runs.

Each query gets its own small topic vocabulary; its positive passage embeds a
contiguous run of the query's own words inside filler text, and that run
defines the binary token targets. Teacher scores are MaxSim under a fixed
reference projection (identity) plus a margin for the positive, so the
distillation target is consistent with the planted relevance.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

import numpy as np

from fgr.embedder import EmbedderConfig, embed, tokenize
from fgr.errors import ParameterError
from fgr.scoring import maxsim_score
from fgr.train import TrainingInstance

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


@dataclass(frozen=True)
class GoldSpan:
    qid: str
    pos_id: str
    mask: tuple[int, ...]
    span_text: str


@dataclass
class SyntheticDataset:
    corpus: list[dict]  # {"id", "text"}
    queries: list[dict]  # {"id", "text"}
    qrels: dict[str, set[str]]
    instances: list[TrainingInstance]
    gold: dict[str, GoldSpan]
    embedder: EmbedderConfig


def _make_word(rng: random.Random, taken: set[str]) -> str:
    while True:
        n_syl = rng.randint(2, 3)
        word = "".join(
            rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(n_syl)
        )
        if word not in taken:
            taken.add(word)
            return word


def make_synthetic_dataset(
    seed: int,
    num_queries: int = 50,
    corpus_size: int = 500,
    h: int = 64,
    filler_vocab: int = 100,
    words_per_topic: int = 5,
    negatives: int = 3,
    margin: float = 2.0,
    passage_len: tuple[int, int] = (20, 32),
) -> SyntheticDataset:
    """Planted-evidence corpus, queries, qrels, training instances and gold."""
    if num_queries < 1 or corpus_size < num_queries + negatives:
        raise ParameterError(
            f"corpus_size {corpus_size} too small for {num_queries} queries "
            f"with {negatives} negatives"
        )
    rng = random.Random(seed)
    cfg = EmbedderConfig(dim=h, seed=seed)

    taken: set[str] = set()
    fillers = [_make_word(rng, taken) for _ in range(filler_vocab)]
    topics = [
        [_make_word(rng, taken) for _ in range(words_per_topic)]
        for _ in range(num_queries)
    ]

    positive_slots = sorted(rng.sample(range(corpus_size), num_queries))
    slot_to_query = {slot: qi for qi, slot in enumerate(positive_slots)}

    queries: list[dict] = []
    query_words: list[list[str]] = []
    for qi in range(num_queries):
        words = rng.sample(topics[qi], rng.randint(3, min(5, words_per_topic)))
        query_words.append(words)
        queries.append({"id": f"q{qi:04d}", "text": " ".join(words)})

    corpus: list[dict] = []
    gold: dict[str, GoldSpan] = {}
    qrels: dict[str, set[str]] = {}
    pos_ids: list[str] = [""] * num_queries
    for slot in range(corpus_size):
        pid = f"p{slot:05d}"
        length = rng.randint(*passage_len)
        words = [rng.choice(fillers) for _ in range(length)]
        if slot in slot_to_query:
            qi = slot_to_query[slot]
            run_len = rng.randint(2, min(4, len(query_words[qi])))
            run = rng.sample(query_words[qi], run_len)
            at = rng.randint(0, length - run_len)
            words[at : at + run_len] = run
            mask = [0] * length
            mask[at : at + run_len] = [1] * run_len
            qid = queries[qi]["id"]
            pos_ids[qi] = pid
            qrels[qid] = {pid}
            gold[qid] = GoldSpan(
                qid=qid, pos_id=pid, mask=tuple(mask), span_text=" ".join(run)
            )
        corpus.append({"id": pid, "text": " ".join(words)})

    by_id = {row["id"]: row["text"] for row in corpus}
    filler_ids = [row["id"] for row in corpus if row["id"] not in set(pos_ids)]

    instances: list[TrainingInstance] = []
    emb_cache: dict[str, np.ndarray] = {}

    def embedded(text: str) -> np.ndarray:
        m = emb_cache.get(text)
        if m is None:
            m = embed(tokenize(text), cfg)
            emb_cache[text] = m
        return m

    for qi, q in enumerate(queries):
        qid = q["id"]
        pos_id = pos_ids[qi]
        neg_ids = rng.sample(filler_ids, negatives)
        eq = embedded(q["text"])
        teacher = [maxsim_score(eq, embedded(by_id[pos_id])) + margin]
        teacher += [maxsim_score(eq, embedded(by_id[nid])) for nid in neg_ids]
        instances.append(
            TrainingInstance(
                qid=qid,
                query=q["text"],
                pos_id=pos_id,
                pos_text=by_id[pos_id],
                targets=gold[qid].mask,
                negs=tuple((nid, by_id[nid]) for nid in neg_ids),
                teacher=tuple(teacher),
            )
        )

    return SyntheticDataset(
        corpus=corpus,
        queries=queries,
        qrels=qrels,
        instances=instances,
        gold=gold,
        embedder=cfg,
    )


def write_gold(path, gold: dict[str, GoldSpan]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for g in gold.values():
            fh.write(
                json.dumps(
                    {"qid": g.qid, "pid": g.pos_id, "targets": list(g.mask), "span": g.span_text}
                )
                + "\n"
            )


def read_gold(path) -> dict[str, GoldSpan]:
    from fgr.index import read_jsonl

    out = {}
    for r in read_jsonl(path, ("qid", "pid", "targets")):
        out[r["qid"]] = GoldSpan(
            qid=r["qid"],
            pos_id=r["pid"],
            mask=tuple(int(v) for v in r["targets"]),
            span_text=r.get("span", ""),
        )
    return out


def write_jsonl_rows(path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def write_qrels(path, qrels: dict[str, set[str]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(qrels):
            fh.write(json.dumps({"qid": qid, "relevant": sorted(qrels[qid])}) + "\n")
