"""LLM-backed evidence-span annotation and span-to-token alignment.

An external chat-completions endpoint (or the deterministic mock) is prompted
to return verbatim substrings of a passage that answer a query; the returned
span strings are aligned to token targets. Unmatched spans are kept as data so
annotation quality stays auditable.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from fgr.embedder import TokenizedText, tokenize
from fgr.errors import AnnotationParseError, EmptyInputError, ParameterError

logger = logging.getLogger(__name__)

PROMPT_TEMPLATE = """\
You extract evidence for search results.
Given a query and a passage, reply with a JSON array of verbatim substrings \
of the passage that answer the query. Copy the substrings exactly as they \
appear. Reply with [] if nothing in the passage answers the query. Reply \
with the JSON array only, no other text.

Example:
Query: where do emperor penguins breed
Passage: unlike most birds, emperor penguins breed on antarctic sea ice \
during the polar winter. chicks hatch before the ice melts.
Reply: ["emperor penguins breed on antarctic sea ice during the polar winter"]

Query: {query}
Passage: {passage}
Reply:"""


@dataclass(frozen=True)
class LlmClientConfig:
    base_url: str
    model: str
    api_key_env: str = "FGR_LLM_API_KEY"
    timeout_s: float = 30.0
    max_retries: int = 2
    temperature: float = 0.0

    def __post_init__(self):
        if self.max_retries < 0:
            raise ParameterError("max_retries must be >= 0")
        if self.timeout_s <= 0:
            raise ParameterError("timeout must be positive")


@dataclass(frozen=True)
class AnnotationPair:
    qid: str
    query: str
    pid: str
    text: str


@dataclass
class AnnotationRecord:
    qid: str
    pid: str
    raw_response: str
    spans: list[str]
    targets: list[int]
    unmatched: list[str]
    retries: int = 0

    def to_dict(self) -> dict:
        return {
            "qid": self.qid,
            "pid": self.pid,
            "raw_response": self.raw_response,
            "spans": self.spans,
            "targets": self.targets,
            "unmatched": self.unmatched,
            "retries": self.retries,
        }


@dataclass
class AnnotationSummary:
    total: int = 0
    annotated: int = 0
    skipped: int = 0
    empty: int = 0
    failed: list = field(default_factory=list)  # (qid, pid, reason)
    retries: int = 0
    span_count: int = 0
    unmatched_count: int = 0

    @property
    def unmatched_rate(self) -> float:
        return self.unmatched_count / self.span_count if self.span_count else 0.0

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "annotated": self.annotated,
            "skipped": self.skipped,
            "empty": self.empty,
            "failed": self.failed,
            "retries": self.retries,
            "span_count": self.span_count,
            "unmatched_count": self.unmatched_count,
            "unmatched_rate": self.unmatched_rate,
        }


def build_prompt(query: str, passage_text: str) -> str:
    if not query.strip() or not passage_text.strip():
        raise EmptyInputError("query and passage must be non-empty")
    return PROMPT_TEMPLATE.format(query=query, passage=passage_text)


def parse_spans(response: str) -> list[str]:
    """Extract span strings: first JSON string-array, else non-empty lines."""
    decoder = json.JSONDecoder()
    idx = response.find("[")
    while idx != -1:
        try:
            value, _ = decoder.raw_decode(response[idx:])
        except json.JSONDecodeError:
            value = None
        if isinstance(value, list) and all(isinstance(v, str) for v in value):
            return value
        idx = response.find("[", idx + 1)

    lines = []
    for line in response.splitlines():
        stripped = line.strip().lstrip("-*").strip()
        stripped = stripped.lstrip("0123456789.").strip()
        stripped = stripped.strip("\"'")
        if stripped:
            lines.append(stripped)
    if not lines:
        raise AnnotationParseError(response)
    return lines


def align_spans(tok: TokenizedText, spans: list[str]) -> tuple[list[int], list[str]]:
    """Mark tokens covered by each span's first token-sequence occurrence.

    Exact surface match first, then case-insensitive; spans that match neither
    are reported as unmatched. Overlapping matches union into the targets.
    """
    surfaces = tok.surfaces
    lowered = [s.lower() for s in surfaces]
    targets = [0] * len(surfaces)
    unmatched: list[str] = []
    for span in spans:
        try:
            span_tokens = tokenize(span).surfaces
        except EmptyInputError:
            unmatched.append(span)
            continue
        start = _find_subsequence(surfaces, span_tokens)
        if start is None:
            start = _find_subsequence(lowered, [s.lower() for s in span_tokens])
        if start is None:
            unmatched.append(span)
            continue
        for i in range(start, start + len(span_tokens)):
            targets[i] = 1
    return targets, unmatched


def _find_subsequence(haystack: list[str], needle: list[str]) -> int | None:
    if not needle or len(needle) > len(haystack):
        return None
    first = needle[0]
    for i in range(len(haystack) - len(needle) + 1):
        if haystack[i] == first and haystack[i : i + len(needle)] == needle:
            return i
    return None


class HttpLlmClient:
    """Chat-completions-style client; the API key is read from the environment
    variable named in the config and never logged."""

    def __init__(self, cfg: LlmClientConfig):
        self.cfg = cfg

    def complete(self, prompt: str) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.cfg.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        resp = requests.post(
            self.cfg.base_url, json=body, headers=headers, timeout=self.cfg.timeout_s
        )
        resp.raise_for_status()
        return resp.json()["choices"][0]["message"]["content"]


class MockLlmClient:
    """Deterministic offline stand-in: looks up spans by the passage text it
    recovers from the prompt, so the prompt template is exercised too."""

    def __init__(self, spans_by_passage: dict[str, list[str]]):
        self.spans_by_passage = spans_by_passage
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        marker = "\nPassage: "
        start = prompt.rfind(marker)
        if start == -1:
            return "[]"
        start += len(marker)
        end = prompt.find("\nReply:", start)
        passage = prompt[start:end if end != -1 else None].strip()
        return json.dumps(self.spans_by_passage.get(passage, []), ensure_ascii=False)


class FlakyClient:
    """Fails a fixed number of times before delegating; for retry tests."""

    def __init__(self, inner, failures: int, exc: Exception | None = None):
        self.inner = inner
        self.remaining = failures
        self.exc = exc or ConnectionError("injected failure")
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        if self.remaining > 0:
            self.remaining -= 1
            raise self.exc
        return self.inner.complete(prompt)


def _load_done(out_path) -> set[tuple[str, str]]:
    done = set()
    if os.path.exists(out_path):
        with open(out_path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    done.add((rec["qid"], rec["pid"]))
    return done


def annotate_dataset(
    client,
    pairs: list[AnnotationPair],
    out_path,
    max_retries: int = 2,
    backoff_s: float = 0.2,
    max_in_flight: int = 1,
) -> AnnotationSummary:
    """Annotate every pair, appending JSON-lines records to out_path.

    Already-completed (qid, pid) pairs are skipped, so interrupted runs resume
    and re-running over a finished output changes nothing. Failures after the
    retry budget are recorded in the summary; the run continues.
    """
    summary = AnnotationSummary(total=len(pairs))
    done = _load_done(out_path)
    todo = [p for p in pairs if (p.qid, p.pid) not in done]
    summary.skipped = len(pairs) - len(todo)

    write_lock = threading.Lock()

    def work(pair: AnnotationPair):
        prompt = build_prompt(pair.query, pair.text)
        last_exc: Exception | None = None
        for attempt in range(max_retries + 1):
            if attempt:
                time.sleep(backoff_s * 2 ** (attempt - 1))
            try:
                raw = client.complete(prompt)
                return pair, raw, attempt, None
            except Exception as e:  # endpoint or transport failure
                last_exc = e
        return pair, None, max_retries, last_exc

    with open(out_path, "a", encoding="utf-8") as out:
        def finish(result):
            pair, raw, retries, exc = result
            summary.retries += retries
            if raw is None:
                summary.failed.append((pair.qid, pair.pid, str(exc)))
                logger.warning("annotation failed for (%s, %s): %s", pair.qid, pair.pid, exc)
                return
            try:
                spans = parse_spans(raw)
            except AnnotationParseError as e:
                summary.failed.append((pair.qid, pair.pid, str(e)))
                return
            tok = tokenize(pair.text)
            targets, unmatched = align_spans(tok, spans)
            rec = AnnotationRecord(
                qid=pair.qid, pid=pair.pid, raw_response=raw, spans=spans,
                targets=targets, unmatched=unmatched, retries=retries,
            )
            with write_lock:
                out.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")
                out.flush()
            summary.annotated += 1
            summary.span_count += len(spans)
            summary.unmatched_count += len(unmatched)
            if not spans:
                summary.empty += 1

        if max_in_flight <= 1:
            for pair in todo:
                finish(work(pair))
        else:
            with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
                for result in pool.map(work, todo):
                    finish(result)
    return summary


def read_annotations(path) -> list[AnnotationRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                records.append(AnnotationRecord(
                    qid=d["qid"], pid=d["pid"], raw_response=d["raw_response"],
                    spans=d["spans"], targets=d["targets"],
                    unmatched=d["unmatched"], retries=d.get("retries", 0),
                ))
    return records
