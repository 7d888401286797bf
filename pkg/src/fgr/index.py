"""Corpus ingestion and flat on-disk index of passage texts and embeddings.

Storage is one append-only blob file (per-passage records in the FGRE wire
layout, each prefixed with its id) plus a JSON manifest written last, so a
crash mid-build leaves no manifest and the index is treated as absent. Only
base embeddings are persisted; transformed embeddings are always computed on
the fly.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from fgr.embedder import (
    EmbedderConfig,
    TokenizedText,
    embed,
    embeddings_to_bytes,
    read_embeddings_stream,
    tokenize,
)
from fgr.errors import (
    DuplicateIdError,
    FgrError,
    MalformedLineError,
    NotFoundError,
    StaleIndexError,
)
from fgr.tensor import l2_normalize_rows, matmul

BLOB_NAME = "passages.bin"
MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1


@dataclass(frozen=True)
class PassageRecord:
    id: str
    tok: TokenizedText
    emb: np.ndarray

    @property
    def text(self) -> str:
        return self.tok.text


@dataclass
class IndexManifest:
    version: int
    h: int
    embedder: EmbedderConfig
    embedder_digest: str
    m: int
    passages: list  # [id, offset, length], offsets strictly increasing
    created_at: str

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "h": self.h,
            "embedder": self.embedder.to_dict(),
            "embedder_digest": self.embedder_digest,
            "m": self.m,
            "passages": self.passages,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IndexManifest":
        return cls(
            version=d["version"],
            h=d["h"],
            embedder=EmbedderConfig.from_dict(d["embedder"]),
            embedder_digest=d["embedder_digest"],
            m=d["m"],
            passages=d["passages"],
            created_at=d["created_at"],
        )


def read_jsonl(path, required_keys: tuple[str, ...]) -> list[dict]:
    """Parse a JSON-lines file, reporting the offending line on failure."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise MalformedLineError(str(path), line_no, f"invalid JSON: {e}") from e
            if not isinstance(obj, dict):
                raise MalformedLineError(str(path), line_no, "expected a JSON object")
            missing = [k for k in required_keys if k not in obj]
            if missing:
                raise MalformedLineError(str(path), line_no, f"missing keys {missing}")
            obj["_line"] = line_no
            rows.append(obj)
    return rows


def read_corpus(path) -> list[dict]:
    return read_jsonl(path, ("id", "text"))


def read_queries(path) -> list[dict]:
    return read_jsonl(path, ("id", "text"))


def read_qrels(path) -> dict[str, set[str]]:
    rows = read_jsonl(path, ("qid", "relevant"))
    return {r["qid"]: set(r["relevant"]) for r in rows}


def build_index(corpus_path, cfg: EmbedderConfig, out_dir) -> IndexManifest:
    """Tokenize, embed and persist every passage; manifest is written last."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise FgrError(f"cannot create index directory {out}: {e}") from e

    rows = read_corpus(corpus_path)
    seen: set[str] = set()
    passages: list[list] = []
    try:
        with open(out / BLOB_NAME, "wb") as blob:
            offset = 0
            for row in rows:
                pid = str(row["id"])
                if pid in seen:
                    raise DuplicateIdError(pid)
                seen.add(pid)
                try:
                    tok = tokenize(row["text"])
                except FgrError as e:
                    raise MalformedLineError(str(corpus_path), row["_line"], str(e)) from e
                emb = embed(tok, cfg)
                if len(tok.tokens) > emb.shape[0]:
                    tok = TokenizedText(text=tok.text, tokens=tok.tokens[: emb.shape[0]])
                record = _encode_record(pid, emb, tok)
                blob.write(record)
                passages.append([pid, offset, len(record)])
                offset += len(record)
    except OSError as e:
        raise FgrError(f"cannot write index blob in {out}: {e}") from e

    manifest = IndexManifest(
        version=MANIFEST_VERSION,
        h=cfg.dim,
        embedder=cfg,
        embedder_digest=cfg.digest(),
        m=len(passages),
        passages=passages,
        created_at=datetime.now(timezone.utc).isoformat(),
    )
    manifest_path = out / MANIFEST_NAME
    tmp_path = out / (MANIFEST_NAME + ".tmp")
    with open(tmp_path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh)
    tmp_path.replace(manifest_path)
    return manifest


def _encode_record(pid: str, emb: np.ndarray, tok: TokenizedText) -> bytes:
    id_bytes = pid.encode("utf-8")
    return struct.pack("<I", len(id_bytes)) + id_bytes + embeddings_to_bytes(emb, tok)


def _decode_record(buf: bytes) -> tuple[str, np.ndarray, TokenizedText]:
    (id_len,) = struct.unpack_from("<I", buf, 0)
    pid = buf[4 : 4 + id_len].decode("utf-8")
    emb, tok = read_embeddings_stream(io.BytesIO(buf[4 + id_len :]))
    return pid, emb, tok


class Index:
    """Read-only handle over a built index; safe for concurrent readers."""

    def __init__(self, directory, manifest: IndexManifest, blob: bytes):
        self.directory = Path(directory)
        self.manifest = manifest
        self._blob = blob
        self._locator = {pid: (off, length) for pid, off, length in manifest.passages}
        self._cache: dict[str, PassageRecord] = {}
        self._packed: tuple | None = None
        self._packed_key: str | None = None

    @property
    def h(self) -> int:
        return self.manifest.h

    @property
    def m(self) -> int:
        return self.manifest.m

    @property
    def ids(self) -> list[str]:
        return [p[0] for p in self.manifest.passages]

    def get_passage(self, pid: str) -> PassageRecord:
        if pid not in self._locator:
            raise NotFoundError(f"passage {pid!r} not in index")
        rec = self._cache.get(pid)
        if rec is None:
            off, length = self._locator[pid]
            got_id, emb, tok = _decode_record(self._blob[off : off + length])
            rec = PassageRecord(id=got_id, tok=tok, emb=emb)
            self._cache[pid] = rec
        return rec

    def packed(self, projection: np.ndarray | None = None):
        """Corpus embeddings concatenated row-wise for the scoring kernel.

        Returns (corpus f32 [N, h], bounds int64 [m+1]). With a projection P,
        rows are l2_normalize_rows(X @ P); the projected view is cached in
        memory only, never persisted.
        """
        key = "raw" if projection is None else hash_matrix(projection)
        if self._packed is not None and self._packed_key == key:
            return self._packed
        mats = []
        bounds = np.zeros(self.m + 1, dtype=np.int64)
        for i, pid in enumerate(self.ids):
            emb = self.get_passage(pid).emb
            if projection is not None:
                emb = l2_normalize_rows(matmul(emb, projection.astype(np.float32)))
            mats.append(emb)
            bounds[i + 1] = bounds[i] + emb.shape[0]
        corpus = np.ascontiguousarray(np.concatenate(mats, axis=0), dtype=np.float32)
        self._packed = (corpus, bounds)
        self._packed_key = key
        return self._packed


def hash_matrix(m: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(m).tobytes()).hexdigest()


def load_index(directory, expected_cfg: EmbedderConfig | None = None) -> Index:
    d = Path(directory)
    manifest_path = d / MANIFEST_NAME
    if not manifest_path.exists():
        raise NotFoundError(f"no index manifest in {d} (absent or incomplete build)")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = IndexManifest.from_dict(json.load(fh))
    if manifest.version != MANIFEST_VERSION:
        raise StaleIndexError(
            f"index version {manifest.version} unsupported (expected {MANIFEST_VERSION})"
        )
    if expected_cfg is not None and expected_cfg.digest() != manifest.embedder_digest:
        raise StaleIndexError(
            "index was built with a different embedder config "
            f"(index digest {manifest.embedder_digest[:12]}, requested {expected_cfg.digest()[:12]})"
        )
    with open(d / BLOB_NAME, "rb") as fh:
        blob = fh.read()
    return Index(d, manifest, blob)
