"""Command-line interface.

Every subcommand prints a one-line JSON summary on success. Exit codes:
0 success, 1 user error (bad input, bad files, usage), 2 internal error.
"""

from __future__ import annotations

import json
import sys
import traceback
from pathlib import Path

import click
import numpy as np

from fgr.errors import FgrError


def _emit(payload: dict) -> None:
    click.echo(json.dumps(payload, ensure_ascii=False))


def _table(headers: list[str], rows: list[list]) -> None:
    """Print an aligned two-axis table (metrics and resource reports)."""
    cells = [headers] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    for r, row in enumerate(cells):
        click.echo("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if r == 0:
            click.echo("  ".join("-" * w for w in widths))


def _load_embedder(path) -> "EmbedderConfig":
    from fgr.embedder import EmbedderConfig

    with open(path, "r", encoding="utf-8") as fh:
        return EmbedderConfig.from_dict(json.load(fh))


@click.group()
def cli():
    """Late-interaction search with per-token relevance extraction."""


@cli.command("index")
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--dim", default=128, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--window", default=2, show_default=True)
@click.option("--mix-weight", default=0.5, show_default=True)
@click.option("--max-tokens", default=180, show_default=True)
def index_cmd(corpus, out, dim, seed, window, mix_weight, max_tokens):
    """Tokenize, embed and persist a JSON-lines corpus."""
    from fgr.embedder import EmbedderConfig
    from fgr.index import MANIFEST_NAME, build_index

    cfg = EmbedderConfig(dim=dim, seed=seed, window=window,
                         mix_weight=mix_weight, max_tokens=max_tokens)
    manifest = build_index(corpus, cfg, out)
    _emit({"manifest": str(Path(out) / MANIFEST_NAME), "passages": manifest.m,
           "h": manifest.h})


@cli.command("make-dataset")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--seed", default=7, show_default=True)
@click.option("--queries", "num_queries", default=50, show_default=True)
@click.option("--corpus-size", default=500, show_default=True)
@click.option("--dim", default=64, show_default=True)
def make_dataset_cmd(out, seed, num_queries, corpus_size, dim):
    """Generate the synthetic planted-evidence corpus, queries and dataset."""
    from fgr.synth import make_synthetic_dataset, write_gold, write_jsonl_rows, write_qrels
    from fgr.train import write_dataset

    ds = make_synthetic_dataset(seed=seed, num_queries=num_queries,
                                corpus_size=corpus_size, h=dim)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_jsonl_rows(out_dir / "corpus.jsonl", ds.corpus)
    write_jsonl_rows(out_dir / "queries.jsonl", ds.queries)
    write_qrels(out_dir / "qrels.jsonl", ds.qrels)
    write_dataset(out_dir / "dataset.jsonl", ds.instances)
    write_gold(out_dir / "gold.jsonl", ds.gold)
    with open(out_dir / "embedder.json", "w", encoding="utf-8") as fh:
        json.dump(ds.embedder.to_dict(), fh)
    _emit({"out": str(out_dir), "queries": len(ds.queries),
           "passages": len(ds.corpus), "instances": len(ds.instances)})


@cli.command("train")
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--embedder", "embedder_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Embedder config JSON (written by make-dataset / stored in the index manifest).")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", default=0, show_default=True)
@click.option("--h2", default=128, show_default=True)
@click.option("--lr", default=0.5, show_default=True)
@click.option("--epochs", default=300, show_default=True)
@click.option("--batch-size", default=8, show_default=True)
@click.option("--lam", default=1.0, show_default=True, help="BCE weight in the joint loss.")
@click.option("--tau-teacher", default=1.0, show_default=True)
@click.option("--tau-student", default=1.0, show_default=True)
@click.option("--curve-out", type=click.Path(dir_okay=False), default=None,
              help="Optional JSON file for the per-epoch loss curve.")
def train_cmd(data, embedder_path, out, seed, h2, lr, epochs, batch_size, lam,
              tau_teacher, tau_student, curve_out):
    """Train {P, W1, W2} on a JSON-lines dataset with plain SGD."""
    from fgr.params import FgrHeadParams, ModelParams, save_params
    from fgr.train import TrainConfig, read_dataset, train

    cfg = TrainConfig(lam=lam, tau_teacher=tau_teacher, tau_student=tau_student,
                      lr=lr, epochs=epochs, batch_size=batch_size, seed=seed,
                      h2=h2, embedder=_load_embedder(embedder_path))
    dataset = read_dataset(data)
    result = train(dataset, cfg)
    save_params(out, ModelParams(
        projection=result.params.projection.astype(np.float32),
        head=FgrHeadParams(result.params.head.w1.astype(np.float32),
                           result.params.head.w2.astype(np.float32)),
    ))
    if curve_out:
        with open(curve_out, "w", encoding="utf-8") as fh:
            json.dump(result.curve, fh)
    _emit({"params": out, "epochs": epochs, "final": result.curve[-1]})


@cli.command("annotate")
@click.option("--queries", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--qrels", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--endpoint", default=None, help="Chat-completions URL of the annotating LLM.")
@click.option("--model", default="annotator", show_default=True)
@click.option("--api-key-env", default="FGR_LLM_API_KEY", show_default=True)
@click.option("--mock-map", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON-lines {pid, spans} lookup served by the deterministic mock client.")
@click.option("--max-retries", default=2, show_default=True)
@click.option("--backoff", default=0.2, show_default=True)
@click.option("--concurrency", default=1, show_default=True)
def annotate_cmd(queries, corpus, qrels, out, endpoint, model, api_key_env,
                 mock_map, max_retries, backoff, concurrency):
    """Annotate qrels-positive (query, passage) pairs with evidence spans."""
    from fgr.annotate import (AnnotationPair, HttpLlmClient, LlmClientConfig,
                              MockLlmClient, annotate_dataset)
    from fgr.index import read_corpus, read_jsonl, read_qrels

    corpus_rows = {r["id"]: r["text"] for r in read_corpus(corpus)}
    query_rows = {r["id"]: r["text"] for r in read_corpus(queries)}
    rels = read_qrels(qrels)
    pairs = []
    for qid in sorted(rels):
        for pid in sorted(rels[qid]):
            if qid in query_rows and pid in corpus_rows:
                pairs.append(AnnotationPair(qid=qid, query=query_rows[qid],
                                            pid=pid, text=corpus_rows[pid]))
    if mock_map:
        spans_by_passage = {}
        for row in read_jsonl(mock_map, ("pid", "spans")):
            if row["pid"] in corpus_rows:
                spans_by_passage[corpus_rows[row["pid"]]] = row["spans"]
        client = MockLlmClient(spans_by_passage)
    elif endpoint:
        client = HttpLlmClient(LlmClientConfig(base_url=endpoint, model=model,
                                               api_key_env=api_key_env,
                                               max_retries=max_retries))
    else:
        raise click.UsageError("provide either --endpoint or --mock-map")
    summary = annotate_dataset(client, pairs, out, max_retries=max_retries,
                               backoff_s=backoff, max_in_flight=concurrency)
    _emit({"out": out, **summary.to_dict()})


@cli.command("eval-plausibility")
@click.option("--index", "index_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--queries", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gold", required=True, type=click.Path(exists=True, dir_okay=False),
              help="JSON-lines {qid, pid, targets} token masks.")
@click.option("--params", "params_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--h2", default=768, show_default=True, help="Head width when no params file is given.")
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--micro", is_flag=True, help="Also report the pooled (micro) F1.")
@click.option("--out", default=None, type=click.Path(dir_okay=False))
def eval_plausibility_cmd(index_dir, queries, gold, params_path, h2, threshold, micro, out):
    """Token-level F1 of model relevance profiles against gold masks."""
    from fgr.evalmetrics import plausibility, write_report
    from fgr.index import load_index, read_corpus
    from fgr.synth import read_gold

    index = load_index(index_dir)
    head, projection = _head_and_projection(index, params_path, h2)
    query_rows = {r["id"]: r["text"] for r in read_corpus(queries)}
    gold_rows = read_gold(gold)

    outputs: dict[str, list[float]] = {}
    gold_masks: dict[str, list[int]] = {}
    for qid, g in gold_rows.items():
        if qid not in query_rows:
            continue
        profile = _profile_for(index, query_rows[qid], g.pos_id, head, projection)
        key = f"{qid}:{g.pos_id}"
        outputs[key] = [float(p) for p in profile.probs]
        gold_masks[key] = list(g.mask)
    report = plausibility(outputs, gold_masks, threshold, micro=micro)
    if out:
        write_report(out, report)
    row = ["this run", f"{report.mean_f1 * 100:.2f}", report.example_count, threshold]
    _table(["Model", "Token F1", "Examples", "Threshold"], [row])
    _emit({"mean_f1": report.mean_f1, "examples": report.example_count,
           "threshold": threshold, "micro_f1": report.micro_f1,
           **({"report": out} if out else {})})


@cli.command("eval-recall")
@click.option("--index", "index_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--queries", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--qrels", "qrels_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--k", default=10, show_default=True)
@click.option("--params", "params_path", default=None, type=click.Path(exists=True, dir_okay=False))
def eval_recall_cmd(index_dir, queries, qrels_path, k, params_path):
    """Recall@k of MaxSim retrieval over the index."""
    from fgr.evalmetrics import recall_at_k
    from fgr.index import load_index, read_corpus, read_qrels
    from fgr.params import load_params
    from fgr.scoring import search

    index = load_index(index_dir)
    projection = None
    if params_path:
        params = load_params(params_path)
        projection = params.projection
    rels = read_qrels(qrels_path)
    run = {}
    for row in read_corpus(queries):
        hits = search(index, row["text"], k, projection=projection)
        run[row["id"]] = [h.id for h in hits]
    recall = recall_at_k(run, rels, k)
    _table(["Model", f"R@{k}", "Queries"],
           [["this run", f"{recall * 100:.2f}", len(run)]])
    _emit({"recall_at_k": recall, "k": k, "queries": len(run)})


@cli.command("bench")
@click.option("--index", "index_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--queries", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--k", default=100, show_default=True)
@click.option("--reps", default=30, show_default=True)
@click.option("--params", "params_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--h2", default=768, show_default=True)
@click.option("--max-queries", default=10, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def bench_cmd(index_dir, queries, k, reps, params_path, h2, max_queries, out):
    """Latency and FLOP benchmark of the with/without-head search paths."""
    from fgr.evalmetrics import bench_overhead, write_report
    from fgr.index import load_index, read_corpus

    index = load_index(index_dir)
    head, _ = _head_and_projection(index, params_path, h2)
    texts = [r["text"] for r in read_corpus(queries)[:max_queries]]
    report = bench_overhead(index, texts, head, k, reps=reps)
    write_report(out, report)
    _table(["Resource", "Head"], [
        ["Index increase", "0"],
        ["FLOPs (top-k docs)", report.analytic_flops],
        ["Transform time (ms)",
         f"{report.transform_ms['mean']:.4f} ± {report.transform_ms['sd']:.4f}"],
        ["Search overhead", f"{report.overhead_ratio:.3f}x"],
    ])
    _emit({"report": out, "overhead_ratio": report.overhead_ratio,
           "transform_ms_mean": report.transform_ms["mean"],
           "analytic_flops": report.analytic_flops})


@cli.command("bench-kernels")
@click.option("--out", default=None, type=click.Path(dir_okay=False))
@click.option("--reps", default=20, show_default=True)
def bench_kernels_cmd(out, reps):
    """Compare the compiled kernels against the numpy fallback."""
    from fgr.kernel_bench import bench_kernels

    report = bench_kernels(reps=reps)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
    _emit({**({"report": out} if out else {}),
           "compiled_available": report["compiled_available"],
           "timings_ms": report["timings_ms"]})


@cli.command("serve")
@click.option("--index", "index_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--params", "params_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True)
@click.option("--k", default=10, show_default=True)
@click.option("--threshold", default=0.5, show_default=True)
def serve_cmd(index_dir, params_path, host, port, k, threshold):
    """Run the HTTP search service (FGR_PARAMS env var overrides --params)."""
    from fgr.service import ServiceConfig, serve

    cfg = ServiceConfig(index_dir=index_dir, params_path=params_path, host=host,
                        port=port, default_k=k, default_threshold=threshold)
    _emit({"serving": f"http://{host}:{port}", "index": index_dir})
    serve(cfg)


def _head_and_projection(index, params_path, h2):
    from fgr.params import init_head, load_params

    if params_path:
        params = load_params(params_path)
        if params.h != index.h:
            raise FgrError(f"params dim {params.h} does not match index dim {index.h}")
        return params.head, params.projection
    return init_head(index.h, h2, seed=0), None


def _profile_for(index, query_text, pid, head, projection):
    from fgr.embedder import embed, tokenize
    from fgr.scoring import token_relevance
    from fgr.tensor import l2_normalize_rows, matmul

    xq = embed(tokenize(query_text), index.manifest.embedder)
    emb = index.get_passage(pid).emb
    if projection is not None:
        p32 = np.ascontiguousarray(projection, dtype=np.float32)
        xq = l2_normalize_rows(matmul(xq, p32))
        emb = l2_normalize_rows(matmul(emb, p32))
    return token_relevance(xq, emb, head)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as e:
        return int(e.exit_code)
    except click.ClickException as e:
        e.show()
        return 1
    except FgrError as e:
        click.echo(f"error [{e.code}]: {e}", err=True)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
