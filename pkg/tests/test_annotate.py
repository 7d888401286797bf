import json

import pytest

from fgr.annotate import (
    AnnotationPair,
    FlakyClient,
    MockLlmClient,
    align_spans,
    annotate_dataset,
    build_prompt,
    parse_spans,
    read_annotations,
)
from fgr.embedder import tokenize
from fgr.errors import AnnotationParseError, EmptyInputError


class TestPrompt:
    def test_passage_appears_exactly_once(self):
        passage = "a very distinctive passage body xyzzy"
        prompt = build_prompt("some query", passage)
        assert prompt.count(passage) == 1

    def test_requests_verbatim_json_array(self):
        prompt = build_prompt("q", "p")
        assert "verbatim substrings" in prompt
        assert "JSON array" in prompt

    def test_prompts_differ_only_in_slots(self):
        a = build_prompt("q1", "same passage")
        b = build_prompt("q2", "same passage")
        assert a.replace("q1", "") == b.replace("q2", "")

    def test_empty_inputs_rejected(self):
        with pytest.raises(EmptyInputError):
            build_prompt("", "p")


class TestParseSpans:
    def test_plain_array(self):
        assert parse_spans('["cat sat"]') == ["cat sat"]

    def test_array_after_preamble(self):
        assert parse_spans('Here you go:\n["a", "b"]') == ["a", "b"]

    def test_empty_array(self):
        assert parse_spans("[]") == []

    def test_line_fallback(self):
        assert parse_spans("- first span\n- second span") == ["first span", "second span"]

    def test_unparseable_carries_raw_text(self):
        with pytest.raises(AnnotationParseError) as err:
            parse_spans("   \n  ")
        assert err.value.raw == "   \n  "

    def test_non_string_array_falls_through(self):
        # [1, 2] is not a string array; the line fallback applies
        assert parse_spans("[1, 2]") == ["[1, 2]"]


class TestAlignSpans:
    def test_multi_token_span(self):
        tok = tokenize("the cat sat")
        targets, unmatched = align_spans(tok, ["cat sat"])
        assert targets == [0, 1, 1]
        assert unmatched == []

    def test_unmatched_kept(self):
        tok = tokenize("the cat sat")
        targets, unmatched = align_spans(tok, ["dog"])
        assert targets == [0, 0, 0]
        assert unmatched == ["dog"]

    def test_case_insensitive_fallback(self):
        tok = tokenize("the cat sat")
        targets, unmatched = align_spans(tok, ["The"])
        assert targets == [1, 0, 0]
        assert unmatched == []

    def test_first_occurrence_wins(self):
        tok = tokenize("cat dog cat bird")
        targets, _ = align_spans(tok, ["cat"])
        assert targets == [1, 0, 0, 0]

    def test_overlapping_spans_union(self):
        tok = tokenize("a b c d")
        targets, _ = align_spans(tok, ["a b c", "b c d"])
        assert targets == [1, 1, 1, 1]

    def test_soundness_every_hit_inside_a_match(self):
        tok = tokenize("one two three four five")
        spans = ["two three", "five"]
        targets, unmatched = align_spans(tok, spans)
        assert unmatched == []
        assert targets == [0, 1, 1, 0, 1]


def make_pairs(n=3):
    pairs = []
    spans_by_passage = {}
    for i in range(n):
        text = f"filler{i} evidence{i} run{i} trailer{i}"
        pairs.append(AnnotationPair(qid=f"q{i}", query=f"find evidence{i}",
                                    pid=f"p{i}", text=text))
        spans_by_passage[text] = [f"evidence{i} run{i}"]
    return pairs, spans_by_passage


class TestAnnotateDataset:
    def test_mock_round_trip_marks_planted_spans(self, tmp_path):
        pairs, spans = make_pairs()
        out = tmp_path / "ann.jsonl"
        summary = annotate_dataset(MockLlmClient(spans), pairs, out)
        assert summary.annotated == 3 and summary.failed == []
        assert summary.unmatched_rate == 0.0
        for rec in read_annotations(out):
            assert rec.targets == [0, 1, 1, 0]

    def test_empty_response_counted(self, tmp_path):
        pairs, _ = make_pairs(2)
        out = tmp_path / "ann.jsonl"
        summary = annotate_dataset(MockLlmClient({}), pairs, out)
        assert summary.empty == 2
        for rec in read_annotations(out):
            assert rec.targets == [0, 0, 0, 0]

    def test_retry_then_success(self, tmp_path):
        pairs, spans = make_pairs(1)
        client = FlakyClient(MockLlmClient(spans), failures=2)
        out = tmp_path / "ann.jsonl"
        summary = annotate_dataset(client, pairs, out, max_retries=2, backoff_s=0.001)
        assert summary.annotated == 1
        assert summary.retries == 2
        assert read_annotations(out)[0].retries == 2

    def test_exhausted_retries_recorded_not_raised(self, tmp_path):
        pairs, spans = make_pairs(2)
        client = FlakyClient(MockLlmClient(spans), failures=100)
        out = tmp_path / "ann.jsonl"
        summary = annotate_dataset(client, pairs, out, max_retries=1, backoff_s=0.001)
        assert len(summary.failed) == 2
        assert summary.annotated == 0

    def test_rerun_skips_completed(self, tmp_path):
        pairs, spans = make_pairs(3)
        out = tmp_path / "ann.jsonl"
        annotate_dataset(MockLlmClient(spans), pairs, out)
        before = out.read_bytes()
        summary = annotate_dataset(MockLlmClient(spans), pairs, out)
        assert summary.skipped == 3 and summary.annotated == 0
        assert out.read_bytes() == before

    def test_partial_progress_resumes(self, tmp_path):
        pairs, spans = make_pairs(3)
        out = tmp_path / "ann.jsonl"
        annotate_dataset(MockLlmClient(spans), pairs[:1], out)
        summary = annotate_dataset(MockLlmClient(spans), pairs, out)
        assert summary.skipped == 1 and summary.annotated == 2
        assert len(read_annotations(out)) == 3

    def test_mock_output_byte_identical(self, tmp_path):
        pairs, spans = make_pairs(3)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        annotate_dataset(MockLlmClient(spans), pairs, a)
        annotate_dataset(MockLlmClient(spans), pairs, b)
        assert a.read_bytes() == b.read_bytes()

    def test_concurrent_run_completes(self, tmp_path):
        pairs, spans = make_pairs(8)
        out = tmp_path / "ann.jsonl"
        summary = annotate_dataset(MockLlmClient(spans), pairs, out, max_in_flight=4)
        assert summary.annotated == 8
        got = {(r.qid, r.pid) for r in read_annotations(out)}
        assert got == {(p.qid, p.pid) for p in pairs}


def test_request_body_shape():
    # the wire shape is part of the external contract
    from fgr.annotate import HttpLlmClient, LlmClientConfig

    captured = {}

    class FakeResponse:
        def raise_for_status(self):
            pass

        def json(self):
            return {"choices": [{"message": {"content": '["x"]'}}]}

    def fake_post(url, json=None, headers=None, timeout=None):
        captured.update(url=url, body=json, headers=headers, timeout=timeout)
        return FakeResponse()

    import requests

    client = HttpLlmClient(LlmClientConfig(base_url="http://llm.local/v1/chat/completions",
                                           model="m1", api_key_env="MISSING_KEY_VAR"))
    original = requests.post
    requests.post = fake_post
    try:
        out = client.complete("the prompt")
    finally:
        requests.post = original
    assert out == '["x"]'
    assert captured["body"] == {
        "model": "m1",
        "temperature": 0.0,
        "messages": [{"role": "user", "content": "the prompt"}],
    }
    assert "Authorization" not in captured["headers"]
