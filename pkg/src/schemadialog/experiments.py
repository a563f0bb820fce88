"""Experiment harness: standard and zero-shot transfer evaluation.

A run iterates (model row x holdout x seed): build the split, train from
scratch, evaluate on the holdout test set, and assemble a deterministic
report. Zero-shot hygiene is asserted inside the runner: the training set
never contains the holdout task/domain (by id and by dialog), while the
holdout schema is handed to the model only at evaluation time.

Report JSON is canonical (sorted keys, no volatile fields); wall-clock
runtimes go to a sidecar so repeated runs are byte-identical.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, replace

import numpy as np

from .corpus import Corpus, Example, Split, split_leave_one_domain, split_leave_one_task, split_standard
from .errors import UnknownHoldout
from .metrics import MetricReport, significance, weighted_f1
from .model import (
    ActionVocabulary,
    BaselineModel,
    SamModel,
    build_candidate_set,
    mix_with_head,
    parse_flags,
    propagate_to_actions,
    rank_actions,
    schema_attention,
    sentence_attention,
    softmax,
    head_logits,
)
from .schema import SchemaGraph
from .training import TrainConfig, train
from .util import canonical_json, fingerprint

DEFAULT_ROWS = ("sam", "sam-1", "sam-2", "sam-3", "sam-4", "sam-234", "baseline")
DEFAULT_SEEDS = (13, 42, 1234)


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str  # "standard" | "task_transfer" | "domain_transfer"
    rows: tuple[str, ...] = DEFAULT_ROWS
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    holdouts: tuple[str, ...] | None = None  # default: every task/domain
    train: TrainConfig = TrainConfig()
    train_fraction: float = 0.8

    def __post_init__(self):
        if self.kind not in ("standard", "task_transfer", "domain_transfer"):
            raise ValueError(f"unknown experiment kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "rows": list(self.rows),
            "seeds": list(self.seeds),
            "holdouts": list(self.holdouts) if self.holdouts is not None else None,
            "train": self.train.to_dict(),
            "train_fraction": self.train_fraction,
        }


def evaluate_model(
    model: SamModel | BaselineModel,
    examples: list[Example],
    graphs: dict[str, SchemaGraph],
) -> tuple[list[str], list[str], set[str]]:
    """Predicted and gold action names, plus the set of predicted labels.

    Candidate encodings are computed once per task and reused; model
    parameters are immutable during evaluation.
    """
    preds: list[str] = []
    golds: list[str] = []
    support: set[str] = set()
    cand_cache: dict[str, tuple] = {}
    for ex in examples:
        golds.append(ex.gold_action)
        if isinstance(model, BaselineModel):
            enc = model.context_encoding(ex.context)
            probs = softmax(head_logits(model.head, enc.pooled))
            order = sorted(
                range(len(model.head.vocab)),
                key=lambda i: (-probs[i], model.head.vocab.actions[i]),
            )
            top = model.head.vocab.actions[order[0]]
        else:
            if ex.task_id not in cand_cache:
                graph = graphs[ex.task_id]
                candidates = build_candidate_set(graph, model.encoder, model.flags)
                vocab = ActionVocabulary.from_actions(graph.actions())
                if not model.flags.no_linear_head and model.head is not None:
                    vocab = vocab.union(model.head.vocab.actions)
                cand_cache[ex.task_id] = (candidates, vocab)
            candidates, vocab = cand_cache[ex.task_id]
            H = model.context_encoding(ex.context)
            att = (
                schema_attention(H, candidates)
                if model.flags.word_level_attention
                else sentence_attention(H, candidates)
            )
            dist = propagate_to_actions(att, candidates, vocab)
            if not model.flags.no_linear_head and model.head is not None:
                dist = mix_with_head(dist, model.head, H.pooled, model.head_mix)
            top = rank_actions(dist)[0][0]
        preds.append(top)
        support.add(top)
    return preds, golds, support


def _split_for(
    spec: ExperimentSpec, corpus: Corpus, holdout: str | None, seed: int
) -> Split:
    if spec.kind == "standard":
        return split_standard(corpus, spec.train_fraction, seed)
    if spec.kind == "task_transfer":
        return split_leave_one_task(corpus, holdout)
    return split_leave_one_domain(corpus, holdout)


def check_hygiene(split: Split, holdout: str | None, kind: str) -> list[str]:
    """Zero-shot leakage checks; returns human-readable violations (empty = clean)."""
    problems: list[str] = []
    train_dialogs = {ex.dialog_id for ex in split.train}
    test_dialogs = {ex.dialog_id for ex in split.test}
    overlap = train_dialogs & test_dialogs
    if overlap:
        problems.append(f"dialog ids on both sides: {sorted(overlap)[:5]}")
    if kind == "task_transfer":
        bad = [ex.dialog_id for ex in split.train if ex.task_id == holdout]
        if bad:
            problems.append(f"train examples carry holdout task {holdout!r}: {bad[:5]}")
    if kind == "domain_transfer":
        bad = [ex.dialog_id for ex in split.train if ex.domain_id == holdout]
        if bad:
            problems.append(f"train examples carry holdout domain {holdout!r}: {bad[:5]}")
    return problems


def _metric_entry(report: MetricReport, support: set[str]) -> dict:
    entry = report.to_dict()
    entry["predicted_support"] = sorted(support)
    return entry


def run_experiment(
    spec: ExperimentSpec,
    corpus: Corpus,
    schemas: dict[str, SchemaGraph],
    out_dir: str | None = None,
) -> dict:
    """Full grid; returns the deterministic report dict.

    On a failed holdout the partial report is dumped (when out_dir is set)
    and the error re-raised, per the fail-loud contract.
    """
    for task in corpus.tasks:
        if task not in schemas:
            raise UnknownHoldout(f"no schema registered for corpus task {task!r}")
    if spec.holdouts is not None:
        holdouts: list[str | None] = list(spec.holdouts)
    elif spec.kind == "standard":
        holdouts = [None]
    elif spec.kind == "task_transfer":
        holdouts = list(corpus.tasks)
    else:
        holdouts = list(corpus.domains)

    started = time.time()
    report: dict = {
        "kind": spec.kind,
        "spec": spec.to_dict(),
        "config_fingerprint": fingerprint(spec.to_dict()),
        "rows": {},
        "hygiene": {"violations": [], "checked_splits": 0},
        "holdout_actions": {},
        "aggregation": "support-weighted mean over holdouts; mean and std over seeds",
        "significance_test": "two-sample t-test (pooled variance) over per-seed aggregates",
    }
    runtimes: dict = {"rows": {}}

    for holdout in holdouts:
        if holdout is None:
            continue
        tasks = (
            [holdout]
            if spec.kind == "task_transfer"
            else [t for t in corpus.tasks if corpus.task_domain[t] == holdout]
        )
        report["holdout_actions"][holdout] = sorted(
            {a for t in tasks for a in schemas[t].actions()}
        )

    try:
        for row in spec.rows:
            row_report: dict = {"per_holdout": {}, "per_seed_aggregate": {}}
            row_runtime = 0.0
            for holdout in holdouts:
                key = holdout if holdout is not None else "all"
                row_report["per_holdout"][key] = {}
                for seed in spec.seeds:
                    t0 = time.time()
                    split = _split_for(spec, corpus, holdout, seed)
                    problems = check_hygiene(split, holdout, spec.kind)
                    report["hygiene"]["checked_splits"] += 1
                    if problems:
                        report["hygiene"]["violations"].extend(
                            f"{row}/{key}/{seed}: {p}" for p in problems
                        )
                        raise AssertionError(f"zero-shot hygiene violated: {problems}")
                    config = _row_config(spec.train, row, seed)
                    result = train(config, split, schemas)
                    preds, golds, support = evaluate_model(
                        result.model, list(split.test), schemas
                    )
                    metrics = weighted_f1(preds, golds)
                    row_report["per_holdout"][key][str(seed)] = _metric_entry(
                        metrics, support
                    )
                    row_runtime += time.time() - t0
            for seed in spec.seeds:
                total_n = 0
                acc_sum = 0.0
                f1_sum = 0.0
                for key, seeds_map in row_report["per_holdout"].items():
                    m = seeds_map[str(seed)]
                    total_n += m["n"]
                    acc_sum += m["accuracy"] * m["n"]
                    f1_sum += m["weighted_f1"] * m["n"]
                row_report["per_seed_aggregate"][str(seed)] = {
                    "accuracy": acc_sum / total_n,
                    "weighted_f1": f1_sum / total_n,
                    "n": total_n,
                }
            f1s = [row_report["per_seed_aggregate"][str(s)]["weighted_f1"] for s in spec.seeds]
            accs = [row_report["per_seed_aggregate"][str(s)]["accuracy"] for s in spec.seeds]
            row_report["mean_weighted_f1"] = float(np.mean(f1s))
            row_report["std_weighted_f1"] = float(np.std(f1s, ddof=1)) if len(f1s) > 1 else 0.0
            row_report["mean_accuracy"] = float(np.mean(accs))
            report["rows"][row] = row_report
            runtimes["rows"][row] = row_runtime
    except Exception:
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, "report.partial.json"), "w") as f:
                f.write(canonical_json(report))
        raise

    if len(spec.seeds) >= 2:
        per_seed = {
            row: [
                report["rows"][row]["per_seed_aggregate"][str(s)]["weighted_f1"]
                for s in spec.seeds
            ]
            for row in spec.rows
        }
        report["significance"] = {
            f"{a}|{b}": p for (a, b), p in significance(per_seed).items()
        }
    else:
        report["significance"] = {}

    runtimes["total"] = time.time() - started
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w") as f:
            f.write(report_json(report))
        with open(os.path.join(out_dir, "report.runtime.json"), "w") as f:
            f.write(canonical_json(runtimes))
        with open(os.path.join(out_dir, "report.txt"), "w") as f:
            f.write(format_table(report))
    return report


def _row_config(base: TrainConfig, row: str, seed: int) -> TrainConfig:
    if row == "baseline":
        return replace(base, model_kind="baseline", seed=seed)
    return replace(base, model_kind="sam", flags=parse_flags(row), seed=seed)


def report_json(report: dict) -> str:
    return canonical_json(report)


def format_table(report: dict) -> str:
    """Aligned text table, one row per model."""
    lines = [f"experiment: {report['kind']}"]
    header = f"{'model':<12} {'F1 score':>9} {'Accuracy':>9} {'seed std':>9}"
    lines.append(header)
    lines.append("-" * len(header))
    for row, data in report["rows"].items():
        lines.append(
            f"{row:<12} {100 * data['mean_weighted_f1']:>9.2f} "
            f"{100 * data['mean_accuracy']:>9.2f} {100 * data['std_weighted_f1']:>9.2f}"
        )
    if report.get("significance"):
        lines.append("")
        lines.append("pairwise t-test p-values (per-seed weighted F1):")
        for pair, p in sorted(report["significance"].items()):
            lines.append(f"  {pair:<26} {p:.4g}")
    return "\n".join(lines) + "\n"
