"""Deterministic toy contextual embedder and embedding file I/O.

Tokens get a base vector from a counter-based splitmix64 generator keyed by
(config seed, hash of the lowercased surface), mixed with the mean of their
window neighbours, then row-normalized. The output depends only on
(text, config): no global RNG, no environment-dependent hashing.

Embedding file layout (little-endian): magic "FGRE", version u32, h u32,
n u32, n*h float32 row-major, u32 length, UTF-8 JSON {text, tokens:[{s,b,e}]}.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import re
import struct
from dataclasses import dataclass
from typing import BinaryIO, NamedTuple

import numpy as np

from fgr.errors import (
    BadMagicError,
    BadVersionError,
    EmptyInputError,
    ParameterError,
    TruncatedFileError,
)
from fgr.tensor import l2_normalize_rows

logger = logging.getLogger(__name__)

MAGIC = b"FGRE"
FORMAT_VERSION = 1

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")
_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class Token(NamedTuple):
    surface: str
    start: int
    end: int


@dataclass(frozen=True)
class TokenizedText:
    text: str
    tokens: tuple[Token, ...]

    def __post_init__(self):
        prev_end = -1
        for t in self.tokens:
            if not (0 <= t.start < t.end <= len(self.text)):
                raise ParameterError(f"token offsets ({t.start},{t.end}) out of bounds")
            if t.start < prev_end:
                raise ParameterError("token offsets overlap or are not increasing")
            if self.text[t.start:t.end] != t.surface:
                raise ParameterError(f"token surface {t.surface!r} does not match text slice")
            prev_end = t.end

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]


@dataclass(frozen=True)
class EmbedderConfig:
    dim: int = 128
    seed: int = 0
    window: int = 2
    mix_weight: float = 0.5
    max_tokens: int = 180

    def __post_init__(self):
        if self.dim < 2:
            raise ParameterError(f"embedding dim must be >= 2, got {self.dim}")
        if self.max_tokens < 1:
            raise ParameterError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if not 0.0 <= self.mix_weight <= 1.0:
            raise ParameterError(f"mix_weight must be in [0, 1], got {self.mix_weight}")
        if self.window < 0:
            raise ParameterError(f"window must be >= 0, got {self.window}")

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "seed": self.seed,
            "window": self.window,
            "mix_weight": self.mix_weight,
            "max_tokens": self.max_tokens,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EmbedderConfig":
        return cls(**d)

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def tokenize(text: str) -> TokenizedText:
    """Split on whitespace with punctuation detached as single-char tokens."""
    if not text.strip():
        raise EmptyInputError("cannot tokenize empty or whitespace-only text")
    tokens = tuple(Token(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(text))
    return TokenizedText(text=text, tokens=tokens)


def _mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer over a uint64 array (wrapping arithmetic)."""
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(0xBF58476D1CE4E5B9)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _mix64_int(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def _word_key(surface: str, seed: int) -> np.uint64:
    h = hashlib.blake2b(surface.lower().encode("utf-8"), digest_size=8).digest()
    word = int.from_bytes(h, "little")
    return np.uint64(word ^ _mix64_int(seed & _MASK64))


def _base_vector(surface: str, cfg: EmbedderConfig) -> np.ndarray:
    """Deterministic pseudo-random unit-scale vector in [-1, 1)^dim."""
    key = _word_key(surface, cfg.seed)
    counters = key + np.arange(1, cfg.dim + 1, dtype=np.uint64) * np.uint64(_GAMMA)
    bits = _mix64(counters)
    return ((bits >> np.uint64(11)).astype(np.float64) * 2.0 ** -53) * 2.0 - 1.0


def embed(tok: TokenizedText, cfg: EmbedderConfig) -> np.ndarray:
    """Embed tokens as an n x dim float32 matrix with unit-norm rows."""
    tokens = tok.tokens
    if len(tokens) > cfg.max_tokens:
        logger.warning(
            "truncating %d tokens to max_tokens=%d", len(tokens), cfg.max_tokens
        )
        tokens = tokens[: cfg.max_tokens]
    n = len(tokens)
    cache: dict[str, np.ndarray] = {}
    base = np.empty((n, cfg.dim), dtype=np.float64)
    for i, t in enumerate(tokens):
        word = t.surface.lower()
        vec = cache.get(word)
        if vec is None:
            vec = _base_vector(t.surface, cfg)
            cache[word] = vec
        base[i] = vec

    mixed = base.copy()
    if cfg.mix_weight > 0.0 and cfg.window > 0 and n > 1:
        ctx_sum = np.zeros_like(base)
        ctx_cnt = np.zeros(n, dtype=np.float64)
        for delta in range(1, cfg.window + 1):
            ctx_sum[delta:] += base[:-delta]
            ctx_cnt[delta:] += 1.0
            ctx_sum[:-delta] += base[delta:]
            ctx_cnt[:-delta] += 1.0
        has_ctx = ctx_cnt > 0
        mixed[has_ctx] += cfg.mix_weight * (ctx_sum[has_ctx] / ctx_cnt[has_ctx, None])

    return l2_normalize_rows(mixed).astype(np.float32)


def _tok_to_json(tok: TokenizedText) -> bytes:
    obj = {
        "text": tok.text,
        "tokens": [{"s": t.surface, "b": t.start, "e": t.end} for t in tok.tokens],
    }
    return json.dumps(obj, ensure_ascii=False).encode("utf-8")


def _tok_from_json(raw: bytes) -> TokenizedText:
    obj = json.loads(raw.decode("utf-8"))
    tokens = tuple(Token(t["s"], t["b"], t["e"]) for t in obj["tokens"])
    return TokenizedText(text=obj["text"], tokens=tokens)


def embeddings_to_bytes(matrix: np.ndarray, tok: TokenizedText) -> bytes:
    """Serialize one embedding record in the FGRE wire layout."""
    m = np.ascontiguousarray(matrix, dtype=np.float32)
    if m.ndim != 2:
        raise ParameterError("embedding matrix must be 2-D")
    if m.shape[0] != len(tok.tokens):
        raise ParameterError(
            f"matrix has {m.shape[0]} rows but tokenization has {len(tok.tokens)} tokens"
        )
    payload = _tok_to_json(tok)
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<III", FORMAT_VERSION, m.shape[1], m.shape[0]))
    if np.little_endian:
        buf.write(m.tobytes())
    else:
        buf.write(m.byteswap().tobytes())
    buf.write(struct.pack("<I", len(payload)))
    buf.write(payload)
    return buf.getvalue()


def _read_exact(fh: BinaryIO, size: int, what: str) -> bytes:
    data = fh.read(size)
    if len(data) != size:
        raise TruncatedFileError(f"unexpected end of file while reading {what}")
    return data


def read_embeddings_stream(fh: BinaryIO) -> tuple[np.ndarray, TokenizedText]:
    magic = _read_exact(fh, 4, "magic")
    if magic != MAGIC:
        raise BadMagicError(MAGIC, magic)
    version, h, n = struct.unpack("<III", _read_exact(fh, 12, "header"))
    if version != FORMAT_VERSION:
        raise BadVersionError(FORMAT_VERSION, version)
    raw = _read_exact(fh, 4 * h * n, "embedding data")
    matrix = np.frombuffer(raw, dtype="<f4").reshape(n, h).astype(np.float32)
    (json_len,) = struct.unpack("<I", _read_exact(fh, 4, "tokenization length"))
    tok = _tok_from_json(_read_exact(fh, json_len, "tokenization"))
    if len(tok.tokens) != n:
        raise TruncatedFileError(
            f"tokenization lists {len(tok.tokens)} tokens but header declares {n} rows"
        )
    return matrix, tok


def write_embeddings(path, matrix: np.ndarray, tok: TokenizedText) -> None:
    with open(path, "wb") as fh:
        fh.write(embeddings_to_bytes(matrix, tok))


def read_embeddings(path) -> tuple[np.ndarray, TokenizedText]:
    with open(path, "rb") as fh:
        return read_embeddings_stream(fh)
