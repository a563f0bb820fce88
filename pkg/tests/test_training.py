from __future__ import annotations

import json
import math

import numpy as np
import pytest

from schemadialog.corpus import Corpus, Dialog, Example, Speaker, Split, Turn
from schemadialog.errors import GoldNodeMissing, UnknownAction
from schemadialog.model import AblationFlags, ActionVocabulary
from schemadialog.schema import load_schema
from schemadialog.training import (
    Batch,
    TrainConfig,
    _setup,
    _TokenCache,
    baseline_batch_step,
    build_candidates,
    load_checkpoint,
    nll_loss,
    plan_epoch,
    sam_batch_step,
    sample_batches_random,
    sample_batches_same_task,
    train,
)
from schemadialog.util import derive_rng

MICRO_SCHEMA = json.dumps({
    "task": "t", "domain": "d", "variant": "user_aware", "start": "sys_a",
    "nodes": [
        {"id": "sys_a", "kind": "system", "text": "what color ?", "action": "ask_color"},
        {"id": "u1", "kind": "user", "text": "red please"},
        {"id": "u2", "kind": "user", "text": "blue thanks"},
        {"id": "sys_b", "kind": "system", "text": "red it is .", "action": "say_red"},
        {"id": "sys_c", "kind": "system", "text": "blue it is .", "action": "say_blue"},
    ],
    "edges": [
        ["sys_a", "u1"], ["sys_a", "u2"], ["u1", "sys_b"], ["u2", "sys_c"],
    ],
})


def example(text, gold, dialog_id="d0", turn=1):
    return Example(
        context=(Turn(Speaker.USER, text),),
        gold_action=gold,
        task_id="t",
        domain_id="d",
        dialog_id=dialog_id,
        turn_index=turn,
    )


def micro_split():
    train_ex = (
        example("red please", "say_red", "d0"),
        example("blue thanks", "say_blue", "d1"),
    )
    return Split(train=train_ex, test=train_ex, kind="standard")


def micro_config(**kw):
    defaults = dict(
        model_kind="sam",
        epochs=1,
        batch_size=2,
        learning_rate=1e-2,
        seed=5,
        dim=8,
        layers=1,
        heads=2,
        ffn_dim=12,
        max_positions=32,
        vocab_size=100,
    )
    defaults.update(kw)
    return TrainConfig(**defaults)


def tiny_examples(n_per_task, tasks):
    out = []
    for t in tasks:
        for i in range(n_per_task):
            out.append(example(f"text {i}", "a", dialog_id=f"{t}_{i}"))
            out[-1] = Example(**{**out[-1].__dict__, "task_id": t})
    return out


class TestSamplers:
    def test_single_batch_when_size_exceeds(self):
        examples = tiny_examples(3, ["t1"])
        rng = derive_rng(0, "x")
        batches = sample_batches_random(examples, 10, rng)
        assert len(batches) == 1
        assert len(batches[0].examples) == 3
        assert batches[0].task_scope == "mixed"

    def test_epoch_partition_random(self):
        examples = tiny_examples(7, ["t1", "t2"])
        rng = derive_rng(1, "x")
        batches = sample_batches_random(examples, 4, rng)
        seen = [ex.dialog_id for b in batches for ex in b.examples]
        assert sorted(seen) == sorted(ex.dialog_id for ex in examples)

    def test_fixed_seed_identical_batches(self):
        examples = tiny_examples(10, ["t1", "t2"])
        a = sample_batches_random(examples, 3, derive_rng(3, "s"))
        b = sample_batches_random(examples, 3, derive_rng(3, "s"))
        assert a == b

    def test_same_task_scope_invariant(self):
        examples = tiny_examples(9, ["t1", "t2", "t3"])
        batches = sample_batches_same_task(examples, 4, derive_rng(2, "s"))
        for batch in batches:
            tasks = {ex.task_id for ex in batch.examples}
            assert len(tasks) == 1
            assert batch.task_scope in tasks

    def test_same_task_epoch_partition(self):
        examples = tiny_examples(10, ["t1", "t2"])
        batches = sample_batches_same_task(examples, 3, derive_rng(2, "s"))
        seen = [ex.dialog_id for b in batches for ex in b.examples]
        assert sorted(seen) == sorted(ex.dialog_id for ex in examples)

    def test_task_pick_frequency_tracks_example_count(self):
        # 90/10 split, batch size 5 divides both: frequency is exact per epoch
        examples = tiny_examples(90, ["big"]) + tiny_examples(10, ["small"])
        picks = {"big": 0, "small": 0}
        n_batches = 0
        epoch = 0
        while n_batches < 10_000:
            batches = sample_batches_same_task(examples, 5, derive_rng(7, "freq", epoch))
            for b in batches:
                picks[b.task_scope] += 1
                n_batches += 1
            epoch += 1
        freq_big = picks["big"] / n_batches
        assert abs(freq_big - 0.9) < 0.02

    def test_mixed_batches_usually_cover_both_tasks(self):
        examples = tiny_examples(500, ["t1", "t2"])
        both = 0
        batches = sample_batches_random(examples, 8, derive_rng(11, "cover"))
        for b in batches:
            if len({ex.task_id for ex in b.examples}) == 2:
                both += 1
        assert both / len(batches) > 0.95


class TestBuildCandidates:
    def setup_method(self):
        self.graphs = {"t": load_schema(MICRO_SCHEMA)}

    def test_batch_gold_distinct(self):
        batch = Batch(
            examples=(example("red please", "say_red"), example("blue thanks", "say_blue")),
            task_scope="t",
        )
        specs = build_candidates(batch, self.graphs, "batch_gold")
        assert {s.node_id for s in specs} == {"u1", "u2"}

    def test_batch_gold_dedupes(self):
        batch = Batch(
            examples=(example("red please", "say_red"), example("red again", "say_red")),
            task_scope="t",
        )
        specs = build_candidates(batch, self.graphs, "batch_gold")
        assert [s.node_id for s in specs] == ["u1"]

    def test_shared_action_includes_both_nodes(self):
        doc = json.loads(MICRO_SCHEMA)
        # second node leading to the same say_red action
        doc["nodes"].append({"id": "u3", "kind": "user", "text": "crimson"})
        doc["edges"].append(["sys_b", "u3"])
        doc["nodes"].append({"id": "sys_b2", "kind": "system", "text": "red it is .", "action": "say_red"})
        # route u3 to an equivalent system node sharing the action/template
        doc["edges"].append(["u3", "sys_b2"])
        graphs = {"t": load_schema(json.dumps(doc))}
        batch = Batch(examples=(example("crimson", "say_red"),), task_scope="t")
        specs = build_candidates(batch, graphs, "batch_gold")
        assert {s.node_id for s in specs} == {"u1", "u3"}

    def test_full_task_ignores_batch_content(self):
        batch = Batch(examples=(example("red please", "say_red"),), task_scope="t")
        specs = build_candidates(batch, self.graphs, "full_task")
        assert {s.node_id for s in specs} == {"u1", "u2"}

    def test_full_task_requires_single_scope(self):
        batch = Batch(examples=(example("x", "say_red"),), task_scope="mixed")
        with pytest.raises(ValueError):
            build_candidates(batch, self.graphs, "full_task")

    def test_gold_node_missing(self):
        batch = Batch(examples=(example("x", "say_green"),), task_scope="t")
        with pytest.raises(GoldNodeMissing):
            build_candidates(batch, self.graphs, "batch_gold")

    def test_schema_consistent_corpus_never_raises(self, synthetic_small):
        # agreement with the corpus module's schema-consistency guarantee:
        # every generated gold action has a matching node
        from schemadialog.corpus import make_examples

        corpus, graphs = synthetic_small
        examples = make_examples(corpus)
        batch = Batch(examples=tuple(examples), task_scope="mixed")
        specs = build_candidates(batch, graphs, "batch_gold")
        assert specs


class TestLoss:
    def test_certain_prediction_zero_loss(self):
        vocab = ActionVocabulary.from_actions(["a", "b"])
        assert nll_loss(np.array([1.0, 0.0]), vocab, "a") == pytest.approx(0.0, abs=1e-11)

    def test_uniform_four(self):
        vocab = ActionVocabulary.from_actions(["a", "b", "c", "d"])
        loss = nll_loss(np.full(4, 0.25), vocab, "b")
        assert loss == pytest.approx(math.log(4), rel=1e-9)

    def test_zero_probability_floor(self):
        vocab = ActionVocabulary.from_actions(["a", "b"])
        loss = nll_loss(np.array([1.0, 0.0]), vocab, "b")
        assert loss == pytest.approx(-math.log(1e-12), rel=1e-9)

    def test_unknown_action(self):
        vocab = ActionVocabulary.from_actions(["a"])
        with pytest.raises(UnknownAction):
            nll_loss(np.array([1.0]), vocab, "zz")


def fd_check(config, flags, model_kind="sam", samples=8, step=1e-5):
    """Full end-to-end loss gradient vs central finite differences."""
    split = micro_split()
    graphs = {"t": load_schema(MICRO_SCHEMA)}
    cfg = micro_config(model_kind=model_kind, flags=flags)
    params, head, action_vocab, train_graphs = _setup(cfg, split, graphs)
    cache = _TokenCache(params, cfg.max_context_tokens)
    batch = Batch(examples=split.train, task_scope="t")
    specs = build_candidates(batch, train_graphs, cfg.candidate_mode) if model_kind == "sam" else None

    def compute():
        if model_kind == "baseline":
            return baseline_batch_step(params, head, batch, cache)
        return sam_batch_step(
            params, head, flags, action_vocab, batch, specs, cache, cfg.head_mix
        )

    stats = compute()
    tensors = {f"enc.{k}": v for k, v in params.tensors.items()}
    if head is not None:
        tensors["head.w"] = head.w
        tensors["head.b"] = head.b
    rng = np.random.default_rng(0)
    worst = 0.0
    for name, tensor in tensors.items():
        flat = tensor.reshape(-1)
        g = stats.grads[name].reshape(-1)
        idxs = rng.choice(flat.size, size=min(samples, flat.size), replace=False)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + step
            lp = compute().loss
            flat[i] = orig - step
            lm = compute().loss
            flat[i] = orig
            fd = (lp - lm) / (2 * step)
            denom = max(abs(g[i]) + abs(fd), 1e-6)
            worst = max(worst, abs(g[i] - fd) / denom)
    return worst


class TestGradients:
    def test_sam_word_level(self):
        assert fd_check(None, AblationFlags()) < 1e-4

    def test_sam_sentence_level(self):
        assert fd_check(None, AblationFlags(word_level_attention=False)) < 1e-4

    def test_sam_combined_head(self):
        assert fd_check(None, AblationFlags(no_linear_head=False)) < 1e-4

    def test_legacy_combination(self):
        assert fd_check(None, AblationFlags(False, False, False, False)) < 1e-4

    def test_baseline(self):
        assert fd_check(None, AblationFlags(), model_kind="baseline") < 1e-4


class TestTrainLoop:
    def test_zero_learning_rate_leaves_params_bitwise(self):
        split = micro_split()
        graphs = {"t": load_schema(MICRO_SCHEMA)}
        cfg = micro_config(learning_rate=0.0, epochs=2)
        fresh_params, _, _, _ = _setup(cfg, split, graphs)
        result = train(cfg, split, graphs)
        for k, v in result.model.encoder.params.tensors.items():
            assert np.array_equal(v, fresh_params.tensors[k]), k

    def test_loss_decreases_on_toy_task(self):
        split = micro_split()
        graphs = {"t": load_schema(MICRO_SCHEMA)}
        cfg = micro_config(epochs=4, learning_rate=5e-3)
        result = train(cfg, split, graphs)
        losses = [m["loss"] for m in result.metrics_log]
        assert losses[-1] < losses[0]

    def test_determinism_bitwise(self):
        split = micro_split()
        graphs = {"t": load_schema(MICRO_SCHEMA)}
        cfg = micro_config(epochs=2)
        a = train(cfg, split, graphs)
        b = train(cfg, split, graphs)
        for k in a.model.encoder.params.tensors:
            assert np.array_equal(
                a.model.encoder.params.tensors[k], b.model.encoder.params.tensors[k]
            ), k

    def test_resume_from_mid_epoch_is_step_identical(self, tmp_path):
        split = micro_split()
        graphs = {"t": load_schema(MICRO_SCHEMA)}
        cfg = micro_config(epochs=3, batch_size=1)
        full = train(cfg, split, graphs)

        part_dir = str(tmp_path / "part")
        train(cfg, split, graphs, run_dir=part_dir, stop_after_steps=3)
        resumed = train(
            cfg, split, graphs, resume_from=f"{part_dir}/interrupt.ckpt"
        )
        for k in full.model.encoder.params.tensors:
            assert np.array_equal(
                full.model.encoder.params.tensors[k],
                resumed.model.encoder.params.tensors[k],
            ), k

    def test_checkpoint_files_and_metrics_log(self, tmp_path):
        split = micro_split()
        graphs = {"t": load_schema(MICRO_SCHEMA)}
        cfg = micro_config(epochs=2)
        run_dir = str(tmp_path / "run")
        train(cfg, split, graphs, run_dir=run_dir, dev=split.test)
        import os

        assert os.path.exists(f"{run_dir}/epoch_0.ckpt")
        assert os.path.exists(f"{run_dir}/epoch_1.ckpt")
        assert os.path.exists(f"{run_dir}/best.ckpt")
        with open(f"{run_dir}/metrics.jsonl") as f:
            lines = [json.loads(line) for line in f]
        assert len(lines) == 2
        assert {"epoch", "split", "loss", "accuracy", "f1"} <= set(lines[0])

    def test_checkpoint_round_trip(self, tmp_path):
        split = micro_split()
        graphs = {"t": load_schema(MICRO_SCHEMA)}
        cfg = micro_config(epochs=1)
        run_dir = str(tmp_path / "run")
        train(cfg, split, graphs, run_dir=run_dir)
        config, params, head, vocab, optimizer, epoch, batch_idx = load_checkpoint(
            f"{run_dir}/epoch_0.ckpt"
        )
        assert config == cfg
        assert epoch == 1
        assert batch_idx == 0
        assert optimizer.t > 0

    def test_plan_epoch_respects_flag3(self):
        split = micro_split()
        examples = list(split.train) * 4
        cfg_same = micro_config()
        cfg_mixed = micro_config(flags=AblationFlags(same_task_sampling=False))
        same = plan_epoch(examples, cfg_same, 0)
        mixed = plan_epoch(examples, cfg_mixed, 0)
        assert all(b.task_scope == "t" for b in same)
        assert all(b.task_scope == "mixed" for b in mixed)
