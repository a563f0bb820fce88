"""Next-action models: baseline classifier and schema attention.

The baseline maps a pooled context vector through a linear layer and
softmax. The schema attention model scores every (context token, node
token) pair with a raw dot product, normalizes jointly across all
candidate nodes, sums each node's attention mass, and propagates node
mass to actions through each node's unique successor. Ablation flags
select the schema variant, word- vs sentence-level attention, and whether
a classifier head is mixed in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

from .corpus import Turn, serialize_context
from .encoder import (
    EncodedSequence,
    EncoderConfig,
    EncoderParams,
    encode,
    hashed_encode,
)
from .errors import (
    DimensionMismatch,
    EmptyCandidates,
    EmptyContext,
    MissingHead,
    UnknownAction,
)
from .schema import SchemaGraph, Variant, candidate_nodes, next_action, node_text_repr, to_system_only
from .text import TokenSeq, Vocab, tokenize
from .util import fingerprint, load_tensors, save_tensors

MODEL_FORMAT_VERSION = 1

PROB_ATOL = 1e-9


@dataclass(frozen=True)
class AblationFlags:
    """The four deltas separating the full model from the legacy schema model.

    All true = full schema attention model; all false = the legacy
    combined model (system-only schema, sentence attention, mixed batches,
    classifier head mixed in).
    """

    user_aware_schema: bool = True  # [1]
    word_level_attention: bool = True  # [2]
    same_task_sampling: bool = True  # [3]
    no_linear_head: bool = True  # [4]

    def name(self) -> str:
        if all(self.astuple()):
            return "sam"
        removed = "".join(
            str(i + 1) for i, on in enumerate(self.astuple()) if not on
        )
        return f"sam-{removed}" if removed != "1234" else "berts"

    def astuple(self) -> tuple[bool, bool, bool, bool]:
        return (
            self.user_aware_schema,
            self.word_level_attention,
            self.same_task_sampling,
            self.no_linear_head,
        )


def parse_flags(name: str) -> AblationFlags:
    """'sam', 'sam-13', 'berts' -> flags. 'baseline' is not a flags model."""
    name = name.strip().lower()
    if name == "sam":
        return AblationFlags()
    if name == "berts":
        return AblationFlags(False, False, False, False)
    if name.startswith("sam-"):
        digits = name[4:]
        if digits and all(c in "1234" for c in digits):
            on = [str(i) not in digits for i in (1, 2, 3, 4)]
            return AblationFlags(*on)
    raise ValueError(f"unknown model flags {name!r}")


@dataclass(frozen=True)
class ActionVocabulary:
    actions: tuple[str, ...]
    index: dict[str, int] = field(compare=False, default_factory=dict)

    @classmethod
    def from_actions(cls, actions: Iterable[str]) -> "ActionVocabulary":
        seen: dict[str, None] = {}
        for a in actions:
            seen.setdefault(a, None)
        ordered = tuple(seen)
        return cls(actions=ordered, index={a: i for i, a in enumerate(ordered)})

    def union(self, other: Iterable[str]) -> "ActionVocabulary":
        return ActionVocabulary.from_actions([*self.actions, *other])

    def __len__(self) -> int:
        return len(self.actions)

    def __contains__(self, action: str) -> bool:
        return action in self.index


@dataclass(frozen=True)
class ActionDistribution:
    probs: np.ndarray
    vocab: ActionVocabulary

    def prob_of(self, action: str) -> float:
        return float(self.probs[self.vocab.index[action]]) if action in self.vocab else 0.0

    def top(self) -> str:
        order = sorted(range(len(self.vocab)), key=lambda i: (-self.probs[i], self.vocab.actions[i]))
        return self.vocab.actions[order[0]]


@dataclass(frozen=True)
class CandidateEntry:
    node_id: str
    task_id: str
    text: str
    next_action: str
    encoding: EncodedSequence


@dataclass(frozen=True)
class CandidateSet:
    entries: tuple[CandidateEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class AttentionResult:
    """Raw scores, normalized cells, and per-node mass of one alignment."""

    scores: tuple[np.ndarray, ...]  # per entry, (N, M_i) raw dot products
    alpha: tuple[np.ndarray, ...]  # same shapes, jointly normalized, 0 at masked cells
    p: np.ndarray  # (|entries|,) per-node mass


class TextEncoder(Protocol):
    """Pluggable encoder contract: per-token matrix plus pooled vector."""

    dim: int

    def encode_text(self, text: str) -> EncodedSequence: ...


@dataclass
class TrainableEncoder:
    params: EncoderParams

    @property
    def dim(self) -> int:
        return self.params.config.dim

    def tokenize_text(self, text: str) -> TokenSeq:
        return tokenize(text, self.params.vocab)

    def encode_text(self, text: str) -> EncodedSequence:
        return encode(self.params, self.tokenize_text(text))


@dataclass
class HashedEncoder:
    seed: int
    dim: int = 16

    def tokenize_text(self, text: str) -> TokenSeq:
        return tokenize(text)

    def encode_text(self, text: str) -> EncodedSequence:
        return hashed_encode(self.seed, tokenize(text), dim=self.dim)


@dataclass
class BaselineHead:
    w: np.ndarray  # (|A|, d)
    b: np.ndarray  # (|A|,)
    vocab: ActionVocabulary

    def __post_init__(self):
        if self.w.shape[0] != len(self.vocab) or self.b.shape != (len(self.vocab),):
            raise DimensionMismatch(
                f"head shapes {self.w.shape}/{self.b.shape} inconsistent with |A|={len(self.vocab)}"
            )


def init_head(vocab: ActionVocabulary, dim: int, seed: int) -> BaselineHead:
    from .util import derive_rng

    rng = derive_rng(seed, "head-init")
    w = rng.normal(0.0, np.sqrt(1.0 / dim), (len(vocab), dim))
    return BaselineHead(w=w, b=np.zeros(len(vocab)), vocab=vocab)


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max()
    e = np.exp(shifted)
    return e / e.sum()


def head_logits(head: BaselineHead, pooled: np.ndarray) -> np.ndarray:
    if pooled.shape != (head.w.shape[1],):
        raise DimensionMismatch(
            f"pooled vector has dim {pooled.shape}, head expects {head.w.shape[1]}"
        )
    return head.w @ pooled + head.b


def baseline_forward(
    encoder: TextEncoder, head: BaselineHead, context: Sequence[Turn] | str
) -> ActionDistribution:
    """softmax(W h + b) over the head's action vocabulary."""
    text = context if isinstance(context, str) else serialize_context(tuple(context))
    enc = encoder.encode_text(text)
    probs = softmax(head_logits(head, enc.pooled))
    return ActionDistribution(probs=probs, vocab=head.vocab)


def build_candidate_set(
    graph: SchemaGraph, encoder: TextEncoder, flags: AblationFlags | None = None
) -> CandidateSet:
    """Encode the graph's candidate nodes (system-only variant if flags ask)."""
    if flags is not None and not flags.user_aware_schema and graph.variant is Variant.USER_AWARE:
        graph = to_system_only(graph)
    entries = []
    for node_id in candidate_nodes(graph):
        text = node_text_repr(graph, node_id).text
        entries.append(
            CandidateEntry(
                node_id=node_id,
                task_id=graph.task_id,
                text=text,
                next_action=next_action(graph, node_id),
                encoding=encoder.encode_text(text),
            )
        )
    return CandidateSet(entries=tuple(entries))


def schema_attention(H: EncodedSequence, candidates: CandidateSet) -> AttentionResult:
    """Word-level cross attention with one joint softmax across all nodes.

    Raw score of cell (j, k) of node i is the dot product of context token
    j and node token k. Masked cells are excluded from normalization and
    get zero attention.
    """
    if len(candidates) == 0:
        raise EmptyCandidates("no candidate nodes to attend to")
    n_real = int(H.mask.sum())
    if n_real == 0:
        raise EmptyContext("context has no unmasked tokens")
    dim = H.matrix.shape[1] if H.matrix.size else 0
    for e in candidates.entries:
        if e.encoding.matrix.shape[1] != dim:
            raise DimensionMismatch(
                f"candidate {e.node_id} dim {e.encoding.matrix.shape[1]} != context dim {dim}"
            )

    widths = [e.encoding.matrix.shape[0] for e in candidates.entries]
    s_cat = np.concatenate([e.encoding.matrix for e in candidates.entries], axis=0)
    m_cat = np.concatenate([e.encoding.mask for e in candidates.entries], axis=0)
    scores_full = H.matrix @ s_cat.T  # (N, M_tot)
    cell_mask = H.mask[:, None] & m_cat[None, :]
    if not cell_mask.any():
        raise EmptyCandidates("all candidate tokens are masked")

    shifted = np.where(cell_mask, scores_full, -np.inf)
    top = shifted.max()
    exp = np.where(cell_mask, np.exp(shifted - top), 0.0)
    alpha_full = exp / exp.sum()

    scores: list[np.ndarray] = []
    alphas: list[np.ndarray] = []
    p = np.zeros(len(candidates))
    offset = 0
    for i, w in enumerate(widths):
        block = slice(offset, offset + w)
        raw = np.where(cell_mask[:, block], scores_full[:, block], 0.0)
        scores.append(raw)
        alphas.append(alpha_full[:, block])
        p[i] = alpha_full[:, block].sum()
        offset += w
    return AttentionResult(scores=tuple(scores), alpha=tuple(alphas), p=p)


def sentence_attention(H: EncodedSequence, candidates: CandidateSet) -> AttentionResult:
    """Pooled-vector attention: softmax over nodes of pooled dot products."""
    if len(candidates) == 0:
        raise EmptyCandidates("no candidate nodes to attend to")
    if int(H.mask.sum()) == 0:
        raise EmptyContext("context has no unmasked tokens")
    raw = np.array([float(H.pooled @ e.encoding.pooled) for e in candidates.entries])
    p = softmax(raw)
    scores = tuple(np.full((1, 1), r) for r in raw)
    alphas = tuple(np.full((1, 1), pi) for pi in p)
    return AttentionResult(scores=scores, alpha=alphas, p=p)


def propagate_to_actions(
    att: AttentionResult, candidates: CandidateSet, vocab: ActionVocabulary
) -> ActionDistribution:
    """P(a) = sum of node mass over candidates whose successor action is a."""
    probs = np.zeros(len(vocab))
    for mass, entry in zip(att.p, candidates.entries):
        if entry.next_action not in vocab:
            raise UnknownAction(f"action {entry.next_action!r} not in vocabulary")
        probs[vocab.index[entry.next_action]] += mass
    return ActionDistribution(probs=probs, vocab=vocab)


def mix_with_head(
    schema_dist: ActionDistribution,
    head: BaselineHead,
    pooled: np.ndarray,
    mix: float,
) -> ActionDistribution:
    """mix * schema + (1 - mix) * classifier, classifier expanded into the vocab."""
    vocab = schema_dist.vocab
    clf = softmax(head_logits(head, pooled))
    expanded = np.zeros(len(vocab))
    for a, prob in zip(head.vocab.actions, clf):
        if a not in vocab:
            raise UnknownAction(
                f"classifier action {a!r} missing from the combined vocabulary"
            )
        expanded[vocab.index[a]] += prob
    return ActionDistribution(probs=mix * schema_dist.probs + (1.0 - mix) * expanded, vocab=vocab)


def sam_forward(
    H: EncodedSequence,
    candidates: CandidateSet,
    vocab: ActionVocabulary,
    flags: AblationFlags,
    head: BaselineHead | None = None,
    head_mix: float = 0.5,
) -> ActionDistribution:
    """Full schema-model forward over pre-encoded context and candidates.

    Callers are responsible for building `candidates` from the schema
    variant the flags demand (see build_candidate_set).
    """
    att = (
        schema_attention(H, candidates)
        if flags.word_level_attention
        else sentence_attention(H, candidates)
    )
    dist = propagate_to_actions(att, candidates, vocab)
    if not flags.no_linear_head:
        if head is None:
            raise MissingHead("flags request a classifier head but none was given")
        dist = mix_with_head(dist, head, H.pooled, head_mix)
    return dist


@dataclass(frozen=True)
class Prediction:
    action: str
    probability: float
    template: str | None
    alignments: tuple[tuple[str, str, float], ...]  # (node_id, node_text, mass)


def rank_actions(dist: ActionDistribution) -> list[tuple[str, float]]:
    order = sorted(
        range(len(dist.vocab)), key=lambda i: (-dist.probs[i], dist.vocab.actions[i])
    )
    return [(dist.vocab.actions[i], float(dist.probs[i])) for i in order]


def truncate_seq(seq: TokenSeq, max_tokens: int) -> TokenSeq:
    """Keep the most recent tokens; dialog endings carry the signal."""
    if len(seq) <= max_tokens:
        return seq
    return TokenSeq(tokens=seq.tokens[-max_tokens:], spans=seq.spans[-max_tokens:])


def encode_context(
    encoder: TrainableEncoder | HashedEncoder,
    context: Sequence[Turn],
    max_tokens: int,
) -> EncodedSequence:
    seq = truncate_seq(encoder.tokenize_text(serialize_context(tuple(context))), max_tokens)
    if isinstance(encoder, TrainableEncoder):
        return encode(encoder.params, seq)
    return hashed_encode(encoder.seed, seq, dim=encoder.dim)


@dataclass
class SamModel:
    """Bundle of everything needed to predict: encoder, flags, optional head."""

    encoder: TrainableEncoder | HashedEncoder
    flags: AblationFlags
    head: BaselineHead | None = None
    head_mix: float = 0.5
    max_context_tokens: int = 96
    kind: str = "sam"

    def context_encoding(self, context: Sequence[Turn]) -> EncodedSequence:
        return encode_context(self.encoder, context, self.max_context_tokens)


@dataclass
class BaselineModel:
    encoder: TrainableEncoder | HashedEncoder
    head: BaselineHead
    max_context_tokens: int = 96
    kind: str = "baseline"

    def context_encoding(self, context: Sequence[Turn]) -> EncodedSequence:
        return encode_context(self.encoder, context, self.max_context_tokens)


def predict(
    model: SamModel | BaselineModel,
    context: Sequence[Turn],
    graph: SchemaGraph | None,
    top_alignments: int = 3,
) -> list[Prediction]:
    """Ranked actions (probability desc, name asc) with aligned-node explanations."""
    templates: dict[str, str] = graph.action_templates() if graph is not None else {}
    if isinstance(model, BaselineModel):
        enc = model.context_encoding(context)
        dist = ActionDistribution(
            probs=softmax(head_logits(model.head, enc.pooled)), vocab=model.head.vocab
        )
        return [Prediction(a, p, templates.get(a), ()) for a, p in rank_actions(dist)]
    if graph is None:
        raise ValueError("schema model needs a graph to predict")
    candidates = build_candidate_set(graph, model.encoder, model.flags)
    vocab = ActionVocabulary.from_actions(graph.actions())
    if not model.flags.no_linear_head and model.head is not None:
        vocab = vocab.union(model.head.vocab.actions)
    H = model.context_encoding(context)
    att = (
        schema_attention(H, candidates)
        if model.flags.word_level_attention
        else sentence_attention(H, candidates)
    )
    dist = propagate_to_actions(att, candidates, vocab)
    if not model.flags.no_linear_head:
        if model.head is None:
            raise MissingHead("combined model needs a head")
        dist = mix_with_head(dist, model.head, H.pooled, model.head_mix)
    node_order = sorted(
        range(len(candidates)),
        key=lambda i: (-att.p[i], candidates.entries[i].node_id),
    )[:top_alignments]
    alignments = tuple(
        (candidates.entries[i].node_id, candidates.entries[i].text, float(att.p[i]))
        for i in node_order
    )
    return [Prediction(a, p, templates.get(a), alignments) for a, p in rank_actions(dist)]


def schema_fingerprint(graphs: Iterable[SchemaGraph]) -> str:
    from .schema import dump_schema

    return fingerprint(sorted(dump_schema(g) for g in graphs))


def save_model(path: str, model: SamModel | BaselineModel, schema_fp: str = "") -> None:
    """Versioned checkpoint bundle: encoder + head + vocab + flags + fingerprint."""
    if not isinstance(model.encoder, TrainableEncoder):
        raise ValueError("only trainable-encoder models can be checkpointed")
    params = model.encoder.params
    tensors = {f"enc.{k}": v for k, v in params.tensors.items()}
    head = model.head
    if head is not None:
        tensors["head.w"] = head.w
        tensors["head.b"] = head.b
    meta = {
        "kind": "model-bundle",
        "format_version": MODEL_FORMAT_VERSION,
        "model_kind": model.kind,
        "flags": list(model.flags.astuple()) if isinstance(model, SamModel) else None,
        "head_mix": model.head_mix if isinstance(model, SamModel) else None,
        "head_actions": list(head.vocab.actions) if head is not None else None,
        "max_context_tokens": model.max_context_tokens,
        "schema_fingerprint": schema_fp,
        "encoder_config": {
            "dim": params.config.dim,
            "layers": params.config.layers,
            "heads": params.config.heads,
            "ffn_dim": params.config.ffn_dim,
            "max_positions": params.config.max_positions,
            "dtype": params.config.dtype,
        },
        "token_vocab": params.vocab.tokens,
    }
    save_tensors(path, tensors, meta)


def load_model(path: str) -> SamModel | BaselineModel:
    tensors, meta = load_tensors(path)
    if meta.get("kind") != "model-bundle":
        raise ValueError(f"{path} is not a model bundle")
    if meta.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported bundle version {meta.get('format_version')}")
    cfg = EncoderConfig(**meta["encoder_config"])
    vocab = Vocab(meta["token_vocab"][2:])
    params = EncoderParams(
        config=cfg,
        vocab=vocab,
        tensors={k[4:]: v for k, v in tensors.items() if k.startswith("enc.")},
    )
    encoder = TrainableEncoder(params)
    head = None
    if meta.get("head_actions") is not None:
        head = BaselineHead(
            w=tensors["head.w"],
            b=tensors["head.b"],
            vocab=ActionVocabulary.from_actions(meta["head_actions"]),
        )
    if meta["model_kind"] == "baseline":
        if head is None:
            raise ValueError("baseline bundle missing its head")
        return BaselineModel(
            encoder=encoder, head=head, max_context_tokens=meta["max_context_tokens"]
        )
    flags = AblationFlags(*meta["flags"])
    return SamModel(
        encoder=encoder,
        flags=flags,
        head=head,
        head_mix=meta["head_mix"] if meta.get("head_mix") is not None else 0.5,
        max_context_tokens=meta["max_context_tokens"],
    )
