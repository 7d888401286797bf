"""Joint distillation + token-BCE training with manual backpropagation.

The trainable set is {P, W1, W2}: the encoder projection P feeds the ranking
scores (and through them the KL term), while the head weights W1/W2 only see
the token-level BCE term, which is applied exclusively to the positive passage
of each instance. All training math runs in float64 so the analytic gradients
can be checked against central finite differences.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from fgr.embedder import EmbedderConfig, embed, tokenize
from fgr.errors import ParameterError, ShapeMismatchError, TrainingDivergedError
from fgr.params import FgrHeadParams, ModelParams, init_params
from fgr.scoring import RelevanceProfile
from fgr.tensor import sigmoid, softmax_and_log_softmax

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingInstance:
    qid: str
    query: str
    pos_id: str
    pos_text: str
    targets: tuple[int, ...]  # one 0/1 per positive-passage token
    negs: tuple[tuple[str, str], ...]  # (id, text), K-1 entries
    teacher: tuple[float, ...]  # K scores, positive first

    def __post_init__(self):
        if len(self.teacher) != 1 + len(self.negs):
            raise ParameterError(
                f"instance {self.qid}: {len(self.teacher)} teacher scores for "
                f"{1 + len(self.negs)} passages"
            )
        if len(self.negs) < 1:
            raise ParameterError(f"instance {self.qid}: need at least one negative")


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 1.0
    tau_teacher: float = 1.0
    tau_student: float = 1.0
    lr: float = 0.5
    epochs: int = 300
    batch_size: int = 8
    seed: int = 0
    h2: int = 128
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)

    def __post_init__(self):
        if self.lam < 0:
            raise ParameterError(f"lambda must be >= 0, got {self.lam}")
        if self.tau_teacher <= 0 or self.tau_student <= 0:
            raise ParameterError("temperatures must be positive")
        if self.lr < 0:
            raise ParameterError(f"learning rate must be >= 0, got {self.lr}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ParameterError("epochs and batch_size must be >= 1")


@dataclass
class Gradients:
    p: np.ndarray
    w1: np.ndarray
    w2: np.ndarray


@dataclass(frozen=True)
class PreparedInstance:
    """Instance with frozen toy embeddings precomputed (float64)."""

    inst: TrainingInstance
    xq: np.ndarray
    xpassages: tuple[np.ndarray, ...]  # positive first
    targets: np.ndarray
    teacher: np.ndarray


def prepare_instance(inst: TrainingInstance, cfg: EmbedderConfig) -> PreparedInstance:
    xq = embed(tokenize(inst.query), cfg).astype(np.float64)
    texts = [inst.pos_text] + [t for _, t in inst.negs]
    xs = tuple(embed(tokenize(t), cfg).astype(np.float64) for t in texts)
    targets = np.asarray(inst.targets, dtype=np.float64)
    if targets.shape[0] != xs[0].shape[0]:
        raise ShapeMismatchError("targets", targets.shape, xs[0].shape)
    return PreparedInstance(
        inst=inst, xq=xq, xpassages=xs, targets=targets,
        teacher=np.asarray(inst.teacher, dtype=np.float64),
    )


def bce_loss(profile: RelevanceProfile, targets) -> float:
    """Mean token binary cross-entropy, computed from pre-sigmoid logits."""
    t = np.asarray(targets, dtype=np.float64)
    x = profile.logits
    if t.shape != x.shape:
        raise ShapeMismatchError("bce_loss", t.shape, x.shape)
    return float(np.mean(t * np.logaddexp(0.0, -x) + (1.0 - t) * np.logaddexp(0.0, x)))


def kl_loss(student_scores, teacher_scores, tau_teacher: float = 1.0,
            tau_student: float = 1.0) -> float:
    """KL(softmax(teacher / tau_t) || softmax(student / tau_s))."""
    s = np.asarray(student_scores, dtype=np.float64)
    t = np.asarray(teacher_scores, dtype=np.float64)
    if s.shape != t.shape:
        raise ShapeMismatchError("kl_loss", s.shape, t.shape)
    if s.size < 2:
        raise ParameterError("distillation needs at least two passages")
    t_probs, t_log = softmax_and_log_softmax(t, tau_teacher)
    _, s_log = softmax_and_log_softmax(s, tau_student)
    return float(np.sum(t_probs * (t_log - s_log)))


def _row_normalize_forward(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(y, axis=1)
    if np.any(norms == 0.0):
        raise ParameterError("projection produced an all-zero embedding row")
    return y / norms[:, None], norms


def _row_normalize_backward(e: np.ndarray, norms: np.ndarray, de: np.ndarray) -> np.ndarray:
    # exact Jacobian of x / ||x||: (I - ee^T) / ||x||
    return (de - np.sum(de * e, axis=1, keepdims=True) * e) / norms[:, None]


def _head_forward(e: np.ndarray, w1: np.ndarray, w2: np.ndarray):
    a = e @ w1
    act = np.maximum(a, 0.0)
    return e + act @ w2, a, act


def _head_backward(e, w1, w2, a, act, d_out):
    dw2 = act.T @ d_out
    d_act = d_out @ w2.T
    d_a = d_act * (a > 0.0)  # relu subgradient 0 at the kink
    dw1 = e.T @ d_a
    de = d_out + d_a @ w1.T
    return de, dw1, dw2


def _forward_backward(prepared: list[PreparedInstance], params: ModelParams,
                      cfg: TrainConfig, want_grads: bool):
    """One pass over a batch; returns (mean losses, gradients or None)."""
    p = params.projection
    w1, w2 = params.head.w1, params.head.w2
    h = p.shape[0]
    grads = Gradients(np.zeros_like(p), np.zeros_like(w1), np.zeros_like(w2)) \
        if want_grads else None

    kl_sum = 0.0
    bce_sum = 0.0
    for pi in prepared:
        yq = pi.xq @ p
        eq, nq_norms = _row_normalize_forward(yq)

        passes = []
        scores = np.empty(len(pi.xpassages), dtype=np.float64)
        for k, xd in enumerate(pi.xpassages):
            yd = xd @ p
            ed, nd_norms = _row_normalize_forward(yd)
            sims = eq @ ed.T
            best_j = np.argmax(sims, axis=1)  # first max on ties
            scores[k] = float(np.take_along_axis(sims, best_j[:, None], axis=1).sum())
            passes.append((xd, ed, nd_norms, best_j))

        t_probs, t_log = softmax_and_log_softmax(pi.teacher, cfg.tau_teacher)
        s_probs, s_log = softmax_and_log_softmax(scores, cfg.tau_student)
        kl = float(np.sum(t_probs * (t_log - s_log)))
        kl_sum += kl

        # BCE on the positive passage only
        xpos, epos, npos_norms, _ = passes[0]
        eq_hat, aq, actq = _head_forward(eq, w1, w2)
        ed_hat, ad, actd = _head_forward(epos, w1, w2)
        sims_hat = eq_hat @ ed_hat.T
        best_i = np.argmax(sims_hat, axis=0)  # per doc token, first max on ties
        logits = np.take_along_axis(sims_hat, best_i[None, :], axis=0)[0]
        t = pi.targets
        bce = float(np.mean(t * np.logaddexp(0.0, -logits)
                            + (1.0 - t) * np.logaddexp(0.0, logits)))
        bce_sum += bce

        if grads is None:
            continue

        d_eq = np.zeros_like(eq)

        # KL path: d kl / d score_k = (S_k - T_k) / tau_s
        d_scores = (s_probs - t_probs) / cfg.tau_student
        for k, (xd, ed, nd_norms, best_j) in enumerate(passes):
            g = d_scores[k]
            if g == 0.0:
                continue
            d_ed = np.zeros_like(ed)
            # score_k = sum_i eq[i] . ed[best_j[i]]
            np.add.at(d_ed, best_j, g * eq)
            d_eq += g * ed[best_j]
            dy = _row_normalize_backward(ed, nd_norms, d_ed)
            grads.p += xd.T @ dy

        # BCE path (skipped entirely at lambda = 0 so head grads are exact zeros)
        if cfg.lam > 0.0:
            probs = sigmoid(logits)
            d_logits = cfg.lam * (probs - t) / t.shape[0]
            d_eq_hat = np.zeros_like(eq_hat)
            np.add.at(d_eq_hat, best_i, d_logits[:, None] * ed_hat)
            d_ed_hat = d_logits[:, None] * eq_hat[best_i]

            de_q, dw1_q, dw2_q = _head_backward(eq, w1, w2, aq, actq, d_eq_hat)
            de_d, dw1_d, dw2_d = _head_backward(epos, w1, w2, ad, actd, d_ed_hat)
            grads.w1 += dw1_q + dw1_d
            grads.w2 += dw2_q + dw2_d
            d_eq += de_q
            dy_pos = _row_normalize_backward(epos, npos_norms, de_d)
            grads.p += xpos.T @ dy_pos

        dyq = _row_normalize_backward(eq, nq_norms, d_eq)
        grads.p += pi.xq.T @ dyq

    b = float(len(prepared))
    breakdown = {
        "kl": kl_sum / b,
        "bce": bce_sum / b,
        "joint": kl_sum / b + cfg.lam * (bce_sum / b),
    }
    if grads is not None:
        grads.p /= b
        grads.w1 /= b
        grads.w2 /= b
    return breakdown, grads


def joint_loss(batch: list[PreparedInstance], params: ModelParams,
               cfg: TrainConfig) -> tuple[float, dict]:
    if not batch:
        raise ParameterError("joint_loss of an empty batch")
    breakdown, _ = _forward_backward(batch, params, cfg, want_grads=False)
    return breakdown["joint"], breakdown


def gradients(batch: list[PreparedInstance], params: ModelParams,
              cfg: TrainConfig) -> Gradients:
    if not batch:
        raise ParameterError("gradients of an empty batch")
    _, grads = _forward_backward(batch, params, cfg, want_grads=True)
    return grads


@dataclass
class TrainResult:
    params: ModelParams
    curve: list[dict]  # per-epoch {"epoch", "joint", "kl", "bce"}


def train(dataset: list[TrainingInstance], cfg: TrainConfig,
          init: ModelParams | None = None) -> TrainResult:
    """Plain SGD on the joint objective; deterministic given cfg.seed."""
    if not dataset:
        raise ParameterError("cannot train on an empty dataset")
    h = cfg.embedder.dim
    params = init if init is not None else init_params(h, cfg.h2, seed=cfg.seed)
    params = ModelParams(
        projection=params.projection.astype(np.float64).copy(),
        head=FgrHeadParams(
            params.head.w1.astype(np.float64).copy(),
            params.head.w2.astype(np.float64).copy(),
        ),
    )
    prepared = [prepare_instance(inst, cfg.embedder) for inst in dataset]

    rng = np.random.default_rng(cfg.seed)
    order = np.arange(len(prepared))
    curve: list[dict] = []
    for epoch in range(cfg.epochs):
        rng.shuffle(order)
        epoch_kl = epoch_bce = 0.0
        n_batches = 0
        for b0 in range(0, len(order), cfg.batch_size):
            batch = [prepared[i] for i in order[b0 : b0 + cfg.batch_size]]
            breakdown, grads = _forward_backward(batch, params, cfg, want_grads=True)
            if not np.isfinite(breakdown["joint"]):
                raise TrainingDivergedError(epoch, n_batches)
            params.projection -= cfg.lr * grads.p
            params.head.w1 -= cfg.lr * grads.w1
            params.head.w2 -= cfg.lr * grads.w2
            epoch_kl += breakdown["kl"]
            epoch_bce += breakdown["bce"]
            n_batches += 1
        entry = {
            "epoch": epoch,
            "kl": epoch_kl / n_batches,
            "bce": epoch_bce / n_batches,
            "joint": (epoch_kl + cfg.lam * epoch_bce) / n_batches,
        }
        curve.append(entry)
        logger.debug("epoch %d: %s", epoch, entry)
    return TrainResult(params=params, curve=curve)


def write_dataset(path, dataset: list[TrainingInstance]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in dataset:
            fh.write(json.dumps({
                "qid": inst.qid,
                "query": inst.query,
                "pos": {"id": inst.pos_id, "text": inst.pos_text,
                        "targets": list(inst.targets)},
                "negs": [{"id": nid, "text": ntext} for nid, ntext in inst.negs],
                "teacher": list(inst.teacher),
            }, ensure_ascii=False) + "\n")


def read_dataset(path) -> list[TrainingInstance]:
    from fgr.index import read_jsonl

    rows = read_jsonl(path, ("qid", "query", "pos", "negs", "teacher"))
    out = []
    for r in rows:
        out.append(TrainingInstance(
            qid=r["qid"],
            query=r["query"],
            pos_id=r["pos"]["id"],
            pos_text=r["pos"]["text"],
            targets=tuple(int(v) for v in r["pos"]["targets"]),
            negs=tuple((n["id"], n["text"]) for n in r["negs"]),
            teacher=tuple(float(v) for v in r["teacher"]),
        ))
    return out
