"""Training: batch sampling, candidate construction, loss, optimization.

Batches either mix tasks (uniform shuffle) or stay within one task, which
is what gives the attention hard negatives: sibling nodes of one schema
instead of easy cross-task contrasts. Candidate sets during training are
the gold-matching nodes of the batch (dedup'd) or the full single-task
schema. The loss is action-level NLL through the attention propagation,
so multiple nodes sharing a next action are learned jointly.

Reproducibility contract: epoch batch plans are a pure function of
(seed, epoch), optimizer state lives in named tensors, and a checkpoint
restores training to the exact step.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .corpus import Example, Split, serialize_context
from .encoder import (
    EncoderConfig,
    EncoderParams,
    backward_from_cache,
    forward_with_cache,
)
from .errors import (
    DivergenceError,
    GoldNodeMissing,
    UnknownAction,
)
from .model import (
    AblationFlags,
    ActionVocabulary,
    BaselineHead,
    BaselineModel,
    SamModel,
    TrainableEncoder,
    init_head,
)
from .schema import SchemaGraph, Variant, candidate_nodes, next_action, node_text_repr, to_system_only
from .text import Vocab, build_vocab, tokenize
from .util import derive_rng, load_tensors, save_tensors

LOSS_EPS = 1e-12
ADAM_EPS = 1e-8
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    model_kind: str = "sam"  # "sam" | "baseline"
    flags: AblationFlags = AblationFlags()
    epochs: int = 50
    batch_size: int = 8
    learning_rate: float = 1e-3
    seed: int = 13
    optimizer: str = "adam"  # "adam" | "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    candidate_mode: str = "batch_gold"  # "batch_gold" | "full_task"
    head_mix: float = 0.5
    max_context_tokens: int = 96
    vocab_size: int = 4000
    dim: int = 64
    layers: int = 2
    heads: int = 4
    ffn_dim: int = 0
    max_positions: int = 256

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate < 0:
            raise ValueError("epochs >= 1, batch_size >= 1, learning_rate >= 0 required")
        if self.model_kind not in ("sam", "baseline"):
            raise ValueError(f"unknown model kind {self.model_kind!r}")
        if self.candidate_mode not in ("batch_gold", "full_task"):
            raise ValueError(f"unknown candidate mode {self.candidate_mode!r}")

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            dim=self.dim,
            layers=self.layers,
            heads=self.heads,
            ffn_dim=self.ffn_dim,
            max_positions=self.max_positions,
        )

    def to_dict(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "flags": list(self.flags.astuple()),
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "optimizer": self.optimizer,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "candidate_mode": self.candidate_mode,
            "head_mix": self.head_mix,
            "max_context_tokens": self.max_context_tokens,
            "vocab_size": self.vocab_size,
            "dim": self.dim,
            "layers": self.layers,
            "heads": self.heads,
            "ffn_dim": self.ffn_dim,
            "max_positions": self.max_positions,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["flags"] = AblationFlags(*d.get("flags", [True, True, True, True]))
        return cls(**d)


@dataclass(frozen=True)
class Batch:
    examples: tuple[Example, ...]
    task_scope: str  # task id, or "mixed"


def sample_batches_random(examples: list[Example], batch_size: int, rng: np.random.Generator) -> list[Batch]:
    """One epoch of mixed-task batches: shuffled order, chunked without replacement."""
    order = rng.permutation(len(examples))
    batches = []
    for start in range(0, len(examples), batch_size):
        chunk = tuple(examples[i] for i in order[start : start + batch_size])
        batches.append(Batch(examples=chunk, task_scope="mixed"))
    return batches


def sample_batches_same_task(examples: list[Example], batch_size: int, rng: np.random.Generator) -> list[Batch]:
    """One epoch of single-task batches.

    Each task's examples are shuffled and chunked, then the chunk pool is
    shuffled: task pick frequency tracks example counts and every example
    appears exactly once per epoch.
    """
    by_task: dict[str, list[int]] = {}
    for i, ex in enumerate(examples):
        by_task.setdefault(ex.task_id, []).append(i)
    pool: list[Batch] = []
    for task in sorted(by_task):
        idxs = np.array(by_task[task])
        idxs = idxs[rng.permutation(len(idxs))]
        for start in range(0, len(idxs), batch_size):
            chunk = tuple(examples[i] for i in idxs[start : start + batch_size])
            pool.append(Batch(examples=chunk, task_scope=task))
    order = rng.permutation(len(pool))
    return [pool[i] for i in order]


def plan_epoch(examples: list[Example], config: TrainConfig, epoch: int) -> list[Batch]:
    rng = derive_rng(config.seed, "epoch-plan", epoch)
    if config.model_kind == "sam" and config.flags.same_task_sampling:
        return sample_batches_same_task(examples, config.batch_size, rng)
    return sample_batches_random(examples, config.batch_size, rng)


@dataclass(frozen=True)
class CandidateSpec:
    task_id: str
    node_id: str
    text: str
    next_action: str


def training_graphs(
    schemas: dict[str, SchemaGraph], flags: AblationFlags
) -> dict[str, SchemaGraph]:
    """Schema variant demanded by ablation flag [1]."""
    if flags.user_aware_schema:
        return dict(schemas)
    return {
        t: (to_system_only(g) if g.variant is Variant.USER_AWARE else g)
        for t, g in schemas.items()
    }


def graph_candidate_specs(graph: SchemaGraph) -> list[CandidateSpec]:
    return [
        CandidateSpec(
            task_id=graph.task_id,
            node_id=nid,
            text=node_text_repr(graph, nid).text,
            next_action=next_action(graph, nid),
        )
        for nid in candidate_nodes(graph)
    ]


def build_candidates(
    batch: Batch, graphs: dict[str, SchemaGraph], mode: str
) -> list[CandidateSpec]:
    """Gold-matching nodes of the batch, or the full single-task schema."""
    if mode == "full_task":
        if batch.task_scope == "mixed":
            raise ValueError("full_task candidates require a single-task batch")
        return graph_candidate_specs(graphs[batch.task_scope])
    specs: list[CandidateSpec] = []
    seen: set[tuple[str, str]] = set()
    for ex in batch.examples:
        graph = graphs.get(ex.task_id)
        if graph is None:
            raise GoldNodeMissing(f"no schema registered for task {ex.task_id!r}")
        matches = [
            s for s in graph_candidate_specs(graph) if s.next_action == ex.gold_action
        ]
        if not matches:
            raise GoldNodeMissing(
                f"gold action {ex.gold_action!r} has no node in schema {ex.task_id!r}"
            )
        for spec in matches:
            key = (spec.task_id, spec.node_id)
            if key not in seen:
                seen.add(key)
                specs.append(spec)
    return specs


def nll_loss(probs: np.ndarray, vocab: ActionVocabulary, gold: str) -> float:
    """-log(P(gold) + eps); the floor keeps zero-probability golds finite."""
    if gold not in vocab:
        raise UnknownAction(f"gold action {gold!r} not in vocabulary")
    return float(-np.log(probs[vocab.index[gold]] + LOSS_EPS))


class _TokenCache:
    """Pre-tokenized id arrays for contexts and node texts."""

    def __init__(self, params: EncoderParams, max_context_tokens: int):
        self.params = params
        self.max_context_tokens = max_context_tokens
        self._contexts: dict[tuple[str, int], np.ndarray] = {}
        self._nodes: dict[tuple[str, str], np.ndarray] = {}

    def context_ids(self, ex: Example) -> np.ndarray:
        key = (ex.dialog_id, ex.turn_index)
        if key not in self._contexts:
            seq = tokenize(serialize_context(ex.context), self.params.vocab)
            ids = self.params.token_ids(seq)
            self._contexts[key] = ids[-self.max_context_tokens :]
        return self._contexts[key]

    def node_ids(self, spec: CandidateSpec) -> np.ndarray:
        key = (spec.task_id, spec.node_id)
        if key not in self._nodes:
            seq = tokenize(spec.text, self.params.vocab)
            self._nodes[key] = self.params.token_ids(seq)
        return self._nodes[key]


def _softmax_vec(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


@dataclass
class StepStats:
    loss: float
    grads: dict[str, np.ndarray]


def sam_batch_step(
    params: EncoderParams,
    head: BaselineHead | None,
    flags: AblationFlags,
    vocab: ActionVocabulary,
    batch: Batch,
    specs: list[CandidateSpec],
    cache: _TokenCache,
    head_mix: float,
) -> StepStats:
    """Mean loss and full gradients for one schema-model batch."""
    n_items = len(batch.examples)
    scale = 1.0 / n_items
    grads: dict[str, np.ndarray] = {f"enc.{k}": np.zeros_like(v) for k, v in params.tensors.items()}
    if head is not None:
        grads["head.w"] = np.zeros_like(head.w)
        grads["head.b"] = np.zeros_like(head.b)

    cand_forward = []
    for spec in specs:
        ids = cache.node_ids(spec)
        mask = np.ones(len(ids), dtype=bool)
        out, pooled, fc = forward_with_cache(params, ids, mask)
        cand_forward.append({"spec": spec, "ids": ids, "out": out, "pooled": pooled, "cache": fc})
    widths = [cf["out"].shape[0] for cf in cand_forward]
    s_cat = np.concatenate([cf["out"] for cf in cand_forward], axis=0) if cand_forward else None
    offsets = np.cumsum([0] + widths)
    action_idx = np.array([vocab.index[cf["spec"].next_action] for cf in cand_forward])

    d_s_cat = np.zeros_like(s_cat)
    d_cand_pooled = [np.zeros_like(cf["pooled"]) for cf in cand_forward]
    total_loss = 0.0

    for ex in batch.examples:
        ids = cache.context_ids(ex)
        mask = np.ones(len(ids), dtype=bool)
        H, pooled, ctx_cache = forward_with_cache(params, ids, mask)
        gold_idx = vocab.index[ex.gold_action] if ex.gold_action in vocab else None
        if gold_idx is None:
            raise UnknownAction(f"gold action {ex.gold_action!r} not in vocabulary")

        if flags.word_level_attention:
            scores = H @ s_cat.T  # (N, M_tot), everything unmasked here
            e = np.exp(scores - scores.max())
            alpha = e / e.sum()
            p = np.array([alpha[:, offsets[i] : offsets[i + 1]].sum() for i in range(len(specs))])
        else:
            raw = np.array([float(pooled @ cf["pooled"]) for cf in cand_forward])
            p = _softmax_vec(raw)

        p_schema = np.zeros(len(vocab))
        np.add.at(p_schema, action_idx, p)

        if flags.no_linear_head:
            p_final = p_schema
        else:
            logits = head.w @ pooled + head.b
            p_clf_local = _softmax_vec(logits)
            p_clf = np.zeros(len(vocab))
            for a, prob in zip(head.vocab.actions, p_clf_local):
                p_clf[vocab.index[a]] += prob
            p_final = head_mix * p_schema + (1.0 - head_mix) * p_clf

        loss = -np.log(p_final[gold_idx] + LOSS_EPS)
        total_loss += loss

        dP_gold = -1.0 / (p_final[gold_idx] + LOSS_EPS)
        d_p_schema_gold = dP_gold * (head_mix if not flags.no_linear_head else 1.0)
        # dL/dp_i is nonzero only for nodes whose next action is the gold one
        g_per_node = np.where(action_idx == gold_idx, d_p_schema_gold, 0.0)

        pooled_upstream = np.zeros_like(pooled)
        if not flags.no_linear_head:
            d_p_clf_gold = dP_gold * (1.0 - head_mix)
            # local softmax backward: only the gold column of the expanded dist matters
            gold_action = vocab.actions[gold_idx]
            if gold_action in head.vocab:
                gi = head.vocab.index[gold_action]
                dz = d_p_clf_gold * p_clf_local[gi] * (-p_clf_local)
                dz[gi] += d_p_clf_gold * p_clf_local[gi]
            else:
                dz = np.zeros_like(p_clf_local)
            grads["head.w"] += scale * np.outer(dz, pooled)
            grads["head.b"] += scale * dz
            pooled_upstream += scale * (head.w.T @ dz)

        if flags.word_level_attention:
            g_cells = np.repeat(g_per_node, widths)  # (M_tot,)
            s_dot = float((alpha * g_cells[None, :]).sum())
            d_scores = alpha * (g_cells[None, :] - s_dot)
            dH = scale * (d_scores @ s_cat)
            d_s_cat += scale * (d_scores.T @ H)
            grads_ctx = backward_from_cache(params, ctx_cache, dH, pooled_upstream if pooled_upstream.any() else None)
        else:
            s_dot = float(p @ g_per_node)
            d_raw = p * (g_per_node - s_dot)
            ctx_pooled_up = pooled_upstream + scale * sum(
                d_raw[i] * cand_forward[i]["pooled"] for i in range(len(specs))
            )
            for i in range(len(specs)):
                d_cand_pooled[i] += scale * d_raw[i] * pooled
            grads_ctx = backward_from_cache(
                params, ctx_cache, np.zeros_like(H), ctx_pooled_up
            )
        for k, v in grads_ctx.tensors.items():
            grads[f"enc.{k}"] += v

    for i, cf in enumerate(cand_forward):
        upstream = d_s_cat[offsets[i] : offsets[i + 1]]
        pooled_up = d_cand_pooled[i] if d_cand_pooled[i].any() else None
        if not upstream.any() and pooled_up is None:
            continue
        g = backward_from_cache(params, cf["cache"], upstream, pooled_up)
        for k, v in g.tensors.items():
            grads[f"enc.{k}"] += v

    return StepStats(loss=total_loss / n_items, grads=grads)


def baseline_batch_step(
    params: EncoderParams,
    head: BaselineHead,
    batch: Batch,
    cache: _TokenCache,
) -> StepStats:
    """Mean cross-entropy and gradients for the pure classifier."""
    n_items = len(batch.examples)
    scale = 1.0 / n_items
    grads: dict[str, np.ndarray] = {f"enc.{k}": np.zeros_like(v) for k, v in params.tensors.items()}
    grads["head.w"] = np.zeros_like(head.w)
    grads["head.b"] = np.zeros_like(head.b)
    total_loss = 0.0
    for ex in batch.examples:
        ids = cache.context_ids(ex)
        mask = np.ones(len(ids), dtype=bool)
        _, pooled, ctx_cache = forward_with_cache(params, ids, mask)
        logits = head.w @ pooled + head.b
        probs = _softmax_vec(logits)
        gi = head.vocab.index.get(ex.gold_action)
        if gi is None:
            raise UnknownAction(f"gold action {ex.gold_action!r} not in vocabulary")
        total_loss += -np.log(probs[gi] + LOSS_EPS)
        # d(-log(p_g + eps))/dz = f * p - f * onehot(g),  f = p_g / (p_g + eps)
        factor = probs[gi] / (probs[gi] + LOSS_EPS)
        dz = factor * probs
        dz[gi] -= factor
        grads["head.w"] += scale * np.outer(dz, pooled)
        grads["head.b"] += scale * dz
        pooled_up = scale * (head.w.T @ dz)
        g = backward_from_cache(params, ctx_cache, np.zeros((len(ids), params.config.dim)), pooled_up)
        for k, v in g.tensors.items():
            grads[f"enc.{k}"] += v
    return StepStats(loss=total_loss / n_items, grads=grads)


class Optimizer:
    """Adam (or plain SGD) over a flat dict of named tensors."""

    def __init__(self, config: TrainConfig, tensors: dict[str, np.ndarray]):
        self.config = config
        self.tensors = tensors
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in tensors.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        lr = self.config.learning_rate
        if self.config.optimizer == "sgd":
            for k, g in grads.items():
                self.tensors[k] -= lr * g
            return
        self.t += 1
        b1, b2 = self.config.beta1, self.config.beta2
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * (g * g)
            m_hat = self.m[k] / (1 - b1**self.t)
            v_hat = self.v[k] / (1 - b2**self.t)
            self.tensors[k] -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


@dataclass
class TrainResult:
    model: SamModel | BaselineModel
    metrics_log: list[dict]
    config: TrainConfig
    action_vocab: ActionVocabulary


def training_vocabulary(
    config: TrainConfig, split: Split, graphs: dict[str, SchemaGraph]
) -> tuple[Vocab, ActionVocabulary]:
    """Token and action vocabularies from training-side data only.

    Holdout schemas and dialogs contribute nothing; unseen holdout words
    fall back to greedy subword decomposition at test time.
    """
    train_tasks = sorted({ex.task_id for ex in split.train})
    texts: list[str] = [serialize_context(ex.context) for ex in split.train]
    actions: list[str] = []
    for ex in split.train:
        actions.append(ex.gold_action)
    for task in train_tasks:
        graph = graphs[task]
        for n in graph.nodes:
            texts.append(n.text)
        actions.extend(graph.actions())
    return build_vocab(texts, config.vocab_size), ActionVocabulary.from_actions(sorted(set(actions)))


def _setup(
    config: TrainConfig, split: Split, graphs: dict[str, SchemaGraph]
) -> tuple[EncoderParams, BaselineHead | None, ActionVocabulary, dict[str, SchemaGraph]]:
    from .encoder import init_params

    token_vocab, action_vocab = training_vocabulary(config, split, graphs)
    params = init_params(config.encoder_config(), token_vocab, config.seed)
    needs_head = config.model_kind == "baseline" or not config.flags.no_linear_head
    head = init_head(action_vocab, config.dim, config.seed) if needs_head else None
    train_graphs = (
        training_graphs(graphs, config.flags) if config.model_kind == "sam" else dict(graphs)
    )
    return params, head, action_vocab, train_graphs


def _flat_tensors(params: EncoderParams, head: BaselineHead | None) -> dict[str, np.ndarray]:
    flat = {f"enc.{k}": v for k, v in params.tensors.items()}
    if head is not None:
        flat["head.w"] = head.w
        flat["head.b"] = head.b
    return flat


def _result_model(
    config: TrainConfig,
    params: EncoderParams,
    head: BaselineHead | None,
    action_vocab: ActionVocabulary,
) -> SamModel | BaselineModel:
    encoder = TrainableEncoder(params)
    if config.model_kind == "baseline":
        return BaselineModel(
            encoder=encoder, head=head, max_context_tokens=config.max_context_tokens
        )
    return SamModel(
        encoder=encoder,
        flags=config.flags,
        head=head,
        head_mix=config.head_mix,
        max_context_tokens=config.max_context_tokens,
    )


def save_checkpoint(
    path: str,
    config: TrainConfig,
    params: EncoderParams,
    head: BaselineHead | None,
    optimizer: Optimizer,
    action_vocab: ActionVocabulary,
    epoch: int,
    batch_index: int,
) -> None:
    tensors = dict(_flat_tensors(params, head))
    for k, v in optimizer.m.items():
        tensors[f"adam.m.{k}"] = v
    for k, v in optimizer.v.items():
        tensors[f"adam.v.{k}"] = v
    meta = {
        "kind": "train-checkpoint",
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "action_vocab": list(action_vocab.actions),
        "token_vocab": params.vocab.tokens,
        "epoch": epoch,
        "batch_index": batch_index,
        "optimizer_t": optimizer.t,
        "rng": {"derivation": ["epoch-plan", "per-epoch from seed"], "seed": config.seed},
    }
    save_tensors(path, tensors, meta)


def load_checkpoint(path: str):
    tensors, meta = load_tensors(path)
    if meta.get("kind") != "train-checkpoint":
        raise ValueError(f"{path} is not a training checkpoint")
    config = TrainConfig.from_dict(meta["config"])
    token_vocab = Vocab(meta["token_vocab"][2:])
    params = EncoderParams(
        config=config.encoder_config(),
        vocab=token_vocab,
        tensors={k[4:]: v for k, v in tensors.items() if k.startswith("enc.")},
    )
    action_vocab = ActionVocabulary.from_actions(meta["action_vocab"])
    head = None
    if "head.w" in tensors:
        head = BaselineHead(w=tensors["head.w"], b=tensors["head.b"], vocab=action_vocab)
    optimizer = Optimizer(config, _flat_tensors(params, head))
    optimizer.t = meta["optimizer_t"]
    for k in optimizer.m:
        optimizer.m[k] = tensors[f"adam.m.{k}"]
        optimizer.v[k] = tensors[f"adam.v.{k}"]
    return config, params, head, action_vocab, optimizer, meta["epoch"], meta["batch_index"]


def _dev_accuracy(
    model: SamModel | BaselineModel,
    dev: tuple[Example, ...],
    graphs: dict[str, SchemaGraph],
) -> float:
    from .experiments import evaluate_model

    preds, golds, _ = evaluate_model(model, list(dev), graphs)
    return sum(p == g for p, g in zip(preds, golds)) / len(golds)


def train(
    config: TrainConfig,
    split: Split,
    schemas: dict[str, SchemaGraph],
    run_dir: str | None = None,
    dev: tuple[Example, ...] | None = None,
    resume_from: str | None = None,
    stop_after_steps: int | None = None,
) -> TrainResult:
    """Deterministic gradient training; emits per-epoch loss (and dev accuracy).

    With run_dir set, writes `epoch_{k}.ckpt`, `best.ckpt` (by dev accuracy
    when dev is given, else the final state), and `metrics.jsonl`.
    resume_from restores a checkpoint and continues step-identically.
    """
    if not split.train:
        raise ValueError("empty training split")
    train_examples = list(split.train)

    if resume_from is not None:
        config, params, head, action_vocab, optimizer, start_epoch, start_batch = load_checkpoint(
            resume_from
        )
        train_graphs = (
            training_graphs(schemas, config.flags) if config.model_kind == "sam" else dict(schemas)
        )
    else:
        params, head, action_vocab, train_graphs = _setup(config, split, schemas)
        optimizer = Optimizer(config, _flat_tensors(params, head))
        start_epoch, start_batch = 0, 0

    cache = _TokenCache(params, config.max_context_tokens)
    metrics_log: list[dict] = []
    best_acc = -1.0
    steps_done = 0

    if run_dir is not None:
        os.makedirs(run_dir, exist_ok=True)

    for epoch in range(start_epoch, config.epochs):
        batches = plan_epoch(train_examples, config, epoch)
        first_batch = start_batch if epoch == start_epoch else 0
        epoch_losses: list[float] = []
        for b_idx in range(first_batch, len(batches)):
            batch = batches[b_idx]
            if config.model_kind == "baseline":
                stats = baseline_batch_step(params, head, batch, cache)
            else:
                specs = build_candidates(batch, train_graphs, config.candidate_mode)
                stats = sam_batch_step(
                    params, head, config.flags, action_vocab, batch, specs, cache, config.head_mix
                )
            if not np.isfinite(stats.loss):
                raise DivergenceError(
                    f"non-finite loss {stats.loss} at epoch {epoch} batch {b_idx}"
                )
            optimizer.step(stats.grads)
            epoch_losses.append(stats.loss)
            steps_done += 1
            if stop_after_steps is not None and steps_done >= stop_after_steps:
                if run_dir is not None:
                    save_checkpoint(
                        os.path.join(run_dir, "interrupt.ckpt"),
                        config, params, head, optimizer, action_vocab, epoch, b_idx + 1,
                    )
                return TrainResult(
                    model=_result_model(config, params, head, action_vocab),
                    metrics_log=metrics_log,
                    config=config,
                    action_vocab=action_vocab,
                )

        entry: dict = {
            "epoch": epoch,
            "split": "train",
            "loss": float(np.mean(epoch_losses)) if epoch_losses else None,
            "accuracy": None,
            "f1": None,
        }
        if dev:
            model = _result_model(config, params, head, action_vocab)
            acc = _dev_accuracy(model, dev, schemas)
            entry["accuracy"] = acc
            if run_dir is not None and acc > best_acc:
                best_acc = acc
                save_checkpoint(
                    os.path.join(run_dir, "best.ckpt"),
                    config, params, head, optimizer, action_vocab, epoch + 1, 0,
                )
        metrics_log.append(entry)
        if run_dir is not None:
            save_checkpoint(
                os.path.join(run_dir, f"epoch_{epoch}.ckpt"),
                config, params, head, optimizer, action_vocab, epoch + 1, 0,
            )
            with open(os.path.join(run_dir, "metrics.jsonl"), "a") as f:
                f.write(json.dumps(entry, sort_keys=True) + "\n")

    if run_dir is not None and not dev:
        save_checkpoint(
            os.path.join(run_dir, "best.ckpt"),
            config, params, head, optimizer, action_vocab, config.epochs, 0,
        )
    return TrainResult(
        model=_result_model(config, params, head, action_vocab),
        metrics_log=metrics_log,
        config=config,
        action_vocab=action_vocab,
    )
