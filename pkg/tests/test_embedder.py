import io
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fgr.embedder import (
    EmbedderConfig,
    TokenizedText,
    embed,
    embeddings_to_bytes,
    read_embeddings,
    read_embeddings_stream,
    tokenize,
    write_embeddings,
)
from fgr.errors import BadMagicError, BadVersionError, EmptyInputError, TruncatedFileError


class TestTokenize:
    def test_punctuation_detached(self):
        tok = tokenize("The cat sat.")
        assert [(t.surface, t.start, t.end) for t in tok.tokens] == [
            ("The", 0, 3), ("cat", 4, 7), ("sat", 8, 11), (".", 11, 12),
        ]

    def test_single_token(self):
        tok = tokenize("a")
        assert tok.tokens == (("a", 0, 1),)

    def test_whitespace_only_rejected(self):
        with pytest.raises(EmptyInputError):
            tokenize("  ")

    def test_case_preserved(self):
        assert tokenize("The CAT").surfaces == ["The", "CAT"]

    @given(st.text(min_size=1, max_size=120))
    def test_slices_reconstruct_input(self, text):
        try:
            tok = tokenize(text)
        except EmptyInputError:
            return
        for t in tok.tokens:
            assert text[t.start:t.end] == t.surface
        # concatenating token slices plus the gaps reproduces the input
        rebuilt = []
        pos = 0
        for t in tok.tokens:
            rebuilt.append(text[pos:t.start])
            rebuilt.append(t.surface)
            pos = t.end
        rebuilt.append(text[pos:])
        assert "".join(rebuilt) == text


class TestEmbed:
    def test_bit_identical_across_runs(self):
        cfg = EmbedderConfig(dim=16, seed=42)
        tok = tokenize("time flies like an arrow")
        a = embed(tok, cfg)
        b = embed(tok, cfg)
        assert a.dtype == np.float32
        assert (a == b).all()

    def test_alpha_zero_repeated_tokens_identical(self):
        cfg = EmbedderConfig(dim=16, seed=1, mix_weight=0.0)
        m = embed(tokenize("cat dog cat dog cat"), cfg)
        assert (m[0] == m[2]).all() and (m[2] == m[4]).all()
        assert (m[1] == m[3]).all()

    def test_context_mixing_differentiates_repeats(self):
        cfg = EmbedderConfig(dim=16, seed=1, mix_weight=0.5, window=2)
        m = embed(tokenize("cat dog cat bird fish"), cfg)
        assert not (m[0] == m[2]).all()

    def test_rows_unit_norm(self):
        cfg = EmbedderConfig(dim=24, seed=3)
        m = embed(tokenize("some words to check the norm invariant holds"), cfg)
        norms = np.linalg.norm(m.astype(np.float64), axis=1)
        assert np.abs(norms - 1.0).max() < 1e-5

    def test_case_insensitive_base_vectors(self):
        cfg = EmbedderConfig(dim=16, seed=1, mix_weight=0.0)
        a = embed(tokenize("Cat"), cfg)
        b = embed(tokenize("cat"), cfg)
        assert (a == b).all()

    def test_truncation_warns(self, caplog):
        cfg = EmbedderConfig(dim=8, seed=0, max_tokens=3)
        with caplog.at_level("WARNING"):
            m = embed(tokenize("one two three four five"), cfg)
        assert m.shape[0] == 3
        assert "truncating" in caplog.text

    def test_seed_changes_output(self):
        tok = tokenize("same text")
        a = embed(tok, EmbedderConfig(dim=16, seed=1))
        b = embed(tok, EmbedderConfig(dim=16, seed=2))
        assert not (a == b).all()


class TestEmbeddingFile:
    def test_round_trip_bit_exact(self, tmp_path):
        cfg = EmbedderConfig(dim=12, seed=5)
        tok = tokenize("round trip me, please!")
        m = embed(tok, cfg)
        path = tmp_path / "e.fgre"
        write_embeddings(path, m, tok)
        m2, tok2 = read_embeddings(path)
        assert (m == m2).all()
        assert tok2 == tok

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.fgre"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(BadMagicError):
            read_embeddings(path)

    def test_wrong_version(self, tmp_path):
        tok = tokenize("x")
        raw = bytearray(embeddings_to_bytes(embed(tok, EmbedderConfig(dim=4)), tok))
        raw[4:8] = struct.pack("<I", 99)
        with pytest.raises(BadVersionError):
            read_embeddings_stream(io.BytesIO(bytes(raw)))

    def test_truncated(self, tmp_path):
        tok = tokenize("one two three")
        raw = embeddings_to_bytes(embed(tok, EmbedderConfig(dim=8)), tok)
        with pytest.raises(TruncatedFileError):
            read_embeddings_stream(io.BytesIO(raw[: len(raw) // 2]))

    def test_externally_declared_shape(self):
        # a file written by any conforming producer loads with its declared shape
        text = "seven tokens in this very short text"
        tok = tokenize(text)
        m = np.arange(7 * 128, dtype=np.float32).reshape(7, 128)
        m2, tok2 = read_embeddings_stream(io.BytesIO(embeddings_to_bytes(m, tok)))
        assert m2.shape == (7, 128)
        assert (m2 == m).all()
        assert tok2.text == text
