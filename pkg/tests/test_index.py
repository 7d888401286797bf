import json
import os

import pytest

from conftest import SMALL_CORPUS, write_jsonl
from fgr.embedder import EmbedderConfig
from fgr.errors import DuplicateIdError, MalformedLineError, NotFoundError, StaleIndexError
from fgr.index import BLOB_NAME, MANIFEST_NAME, build_index, load_index


@pytest.fixture
def corpus_path(tmp_path):
    return write_jsonl(tmp_path / "corpus.jsonl", SMALL_CORPUS)


def test_build_and_round_trip(corpus_path, tmp_path):
    cfg = EmbedderConfig(dim=16, seed=2)
    manifest = build_index(corpus_path, cfg, tmp_path / "idx")
    assert manifest.m == len(SMALL_CORPUS)
    ix = load_index(tmp_path / "idx", cfg)
    for row in SMALL_CORPUS:
        rec = ix.get_passage(row["id"])
        assert rec.text == row["text"]
        assert rec.emb.shape[0] == len(rec.tok.tokens)


def test_duplicate_id_named(corpus_path, tmp_path):
    rows = SMALL_CORPUS + [{"id": "cat", "text": "another cat"}]
    path = write_jsonl(tmp_path / "dup.jsonl", rows)
    with pytest.raises(DuplicateIdError, match="cat"):
        build_index(path, EmbedderConfig(dim=8), tmp_path / "idx")


def test_malformed_line_reports_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "a", "text": "fine"}\nnot json at all\n')
    with pytest.raises(MalformedLineError, match=":2:"):
        build_index(path, EmbedderConfig(dim=8), tmp_path / "idx")


def test_missing_passage(corpus_path, tmp_path):
    build_index(corpus_path, EmbedderConfig(dim=8), tmp_path / "idx")
    ix = load_index(tmp_path / "idx")
    with pytest.raises(NotFoundError):
        ix.get_passage("nope")


def test_stale_config_rejected(corpus_path, tmp_path):
    build_index(corpus_path, EmbedderConfig(dim=16, seed=1), tmp_path / "idx")
    with pytest.raises(StaleIndexError):
        load_index(tmp_path / "idx", EmbedderConfig(dim=16, seed=2))


def test_missing_manifest_means_absent(corpus_path, tmp_path):
    build_index(corpus_path, EmbedderConfig(dim=8), tmp_path / "idx")
    os.remove(tmp_path / "idx" / MANIFEST_NAME)
    with pytest.raises(NotFoundError):
        load_index(tmp_path / "idx")


def test_rebuild_is_byte_identical(corpus_path, tmp_path):
    cfg = EmbedderConfig(dim=16, seed=4)
    build_index(corpus_path, cfg, tmp_path / "a")
    build_index(corpus_path, cfg, tmp_path / "b")
    blob_a = (tmp_path / "a" / BLOB_NAME).read_bytes()
    blob_b = (tmp_path / "b" / BLOB_NAME).read_bytes()
    assert blob_a == blob_b


def test_index_size_is_blobs_plus_manifest(tmp_path):
    # no extra arrays are persisted for the relevance head
    rows = [{"id": f"p{i}", "text": f"passage number {i} about topic {i % 7}"}
            for i in range(200)]
    path = write_jsonl(tmp_path / "c.jsonl", rows)
    manifest = build_index(path, EmbedderConfig(dim=16, seed=0), tmp_path / "idx")
    files = sorted(os.listdir(tmp_path / "idx"))
    assert files == sorted([BLOB_NAME, MANIFEST_NAME])
    blob_size = os.path.getsize(tmp_path / "idx" / BLOB_NAME)
    assert blob_size == sum(length for _, _, length in manifest.passages)


def test_offsets_strictly_increasing(corpus_path, tmp_path):
    manifest = build_index(corpus_path, EmbedderConfig(dim=8), tmp_path / "idx")
    offsets = [off for _, off, _ in manifest.passages]
    assert offsets == sorted(offsets)
    assert len(set(offsets)) == len(offsets)


def test_manifest_stores_embedder_config(corpus_path, tmp_path):
    cfg = EmbedderConfig(dim=16, seed=9, window=1, mix_weight=0.25, max_tokens=50)
    build_index(corpus_path, cfg, tmp_path / "idx")
    with open(tmp_path / "idx" / MANIFEST_NAME) as fh:
        manifest = json.load(fh)
    assert manifest["embedder"] == cfg.to_dict()
    assert manifest["embedder_digest"] == cfg.digest()
    ix = load_index(tmp_path / "idx")
    assert ix.manifest.embedder == cfg
