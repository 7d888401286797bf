"""Late-interaction passage retrieval with per-token relevance extraction."""

from fgr.backend import KERNEL_BACKEND
from fgr.embedder import EmbedderConfig, TokenizedText, embed, tokenize
from fgr.index import Index, build_index, load_index
from fgr.params import FgrHeadParams, ModelParams, init_head, init_params, load_params, save_params
from fgr.scoring import (
    RelevanceProfile,
    SearchHit,
    Span,
    maxsim_score,
    search,
    select_spans,
    token_relevance,
    transform,
)
from fgr.tensor import OpCounter

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "EmbedderConfig",
    "TokenizedText",
    "embed",
    "tokenize",
    "Index",
    "build_index",
    "load_index",
    "FgrHeadParams",
    "ModelParams",
    "init_head",
    "init_params",
    "load_params",
    "save_params",
    "RelevanceProfile",
    "SearchHit",
    "Span",
    "maxsim_score",
    "search",
    "select_spans",
    "token_relevance",
    "transform",
    "OpCounter",
    "__version__",
]
