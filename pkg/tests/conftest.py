import json

import pytest

from fgr.embedder import EmbedderConfig
from fgr.index import build_index, load_index

SMALL_CORPUS = [
    {"id": "cat", "text": "the cat sat on the mat near the door"},
    {"id": "dog", "text": "dogs chase the ball across the park every day"},
    {"id": "milk", "text": "cats drink milk and sleep in the sun"},
    {"id": "code", "text": "the program prints a table of results"},
]


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return path


@pytest.fixture(scope="session")
def small_cfg():
    return EmbedderConfig(dim=32, seed=11)


@pytest.fixture(scope="session")
def small_index(tmp_path_factory, small_cfg):
    root = tmp_path_factory.mktemp("small_index")
    corpus_path = write_jsonl(root / "corpus.jsonl", SMALL_CORPUS)
    build_index(corpus_path, small_cfg, root / "idx")
    return load_index(root / "idx", small_cfg)
