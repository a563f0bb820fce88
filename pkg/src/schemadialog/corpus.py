"""Dialog corpora: ingestion, next-action examples, and train/test splits.

Corpus format (UTF-8 JSON, one file per corpus):

    {"dialogs": [{"id": str, "task": str, "domain": str,
                  "turns": [{"speaker": "user"|"system"|"db",
                             "text": str, "action": str?}, ...]}, ...]}

Every system turn of every dialog yields one prediction example whose
context is the turns before it, serialized with speaker tags.
"""

from __future__ import annotations

import enum
import io
import json
from dataclasses import dataclass
from functools import cached_property

from .errors import DegenerateSplit, ParseError, UnknownHoldout, UnknownTask
from .util import canonical_json, derive_rng

SPEAKER_TAG = {"user": "[USER]", "system": "[SYSTEM]", "db": "[DB]"}


class Speaker(enum.Enum):
    USER = "user"
    SYSTEM = "system"
    DB = "db"


@dataclass(frozen=True)
class Turn:
    speaker: Speaker
    text: str
    action: str | None = None  # present iff speaker == SYSTEM


@dataclass(frozen=True)
class Dialog:
    dialog_id: str
    task_id: str
    domain_id: str
    turns: tuple[Turn, ...]


@dataclass(frozen=True)
class Corpus:
    dialogs: tuple[Dialog, ...]

    @cached_property
    def tasks(self) -> list[str]:
        seen: dict[str, None] = {}
        for d in self.dialogs:
            seen.setdefault(d.task_id, None)
        return list(seen)

    @cached_property
    def domains(self) -> list[str]:
        seen: dict[str, None] = {}
        for d in self.dialogs:
            seen.setdefault(d.domain_id, None)
        return list(seen)

    @cached_property
    def task_domain(self) -> dict[str, str]:
        return {d.task_id: d.domain_id for d in self.dialogs}

    def __len__(self) -> int:
        return len(self.dialogs)


@dataclass(frozen=True)
class Example:
    """Predict gold_action given the turns before turn_index."""

    context: tuple[Turn, ...]
    gold_action: str
    task_id: str
    domain_id: str
    dialog_id: str
    turn_index: int


@dataclass(frozen=True)
class Split:
    train: tuple[Example, ...]
    test: tuple[Example, ...]
    kind: str  # "standard" | "leave_one_task" | "leave_one_domain"
    holdout: str | None = None


def serialize_context(turns: tuple[Turn, ...] | list[Turn]) -> str:
    """Speaker-tagged flat string, e.g. '[USER] hi [SYSTEM] what is your name?'."""
    return " ".join(f"{SPEAKER_TAG[t.speaker.value]} {t.text}" for t in turns)


def load_corpus(
    source: bytes | str | io.IOBase, registry: set[str] | None = None
) -> Corpus:
    """Parse a corpus file; with a task registry, unknown task ids are rejected."""
    if isinstance(source, io.IOBase):
        source = source.read()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"corpus file is not UTF-8: {e}") from e
    try:
        raw = json.loads(source)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed JSON: {e.msg}", locus=f"line {e.lineno}") from e
    if not isinstance(raw, dict) or "dialogs" not in raw:
        raise ParseError("corpus must be an object with a 'dialogs' list")
    dialogs: list[Dialog] = []
    seen_ids: set[str] = set()
    for i, entry in enumerate(raw["dialogs"]):
        locus = f"dialogs[{i}]"
        for key in ("id", "task", "domain", "turns"):
            if key not in entry:
                raise ParseError(f"dialog missing required field {key!r}", locus=locus)
        if entry["id"] in seen_ids:
            raise ParseError(f"duplicate dialog id {entry['id']!r}", locus=locus)
        seen_ids.add(entry["id"])
        turns: list[Turn] = []
        for j, t in enumerate(entry["turns"]):
            tl = f"{locus}.turns[{j}]"
            try:
                speaker = Speaker(t["speaker"])
            except (KeyError, ValueError):
                raise ParseError(f"bad speaker {t.get('speaker')!r}", locus=tl) from None
            text = t.get("text")
            if not isinstance(text, str) or not text:
                raise ParseError("turn text must be a non-empty string", locus=tl)
            action = t.get("action")
            if speaker is Speaker.SYSTEM and not action:
                raise ParseError("system turn missing action", locus=tl)
            if speaker is not Speaker.SYSTEM and action is not None:
                raise ParseError("non-system turn must not carry an action", locus=tl)
            turns.append(Turn(speaker=speaker, text=text, action=action))
        if not any(t.speaker is Speaker.SYSTEM for t in turns):
            raise ParseError("dialog has no system turn", locus=locus)
        if registry is not None and entry["task"] not in registry:
            raise UnknownTask(
                f"dialog {entry['id']!r} references unregistered task {entry['task']!r}"
            )
        dialogs.append(
            Dialog(
                dialog_id=str(entry["id"]),
                task_id=str(entry["task"]),
                domain_id=str(entry["domain"]),
                turns=tuple(turns),
            )
        )
    return Corpus(dialogs=tuple(dialogs))


def dump_corpus(corpus: Corpus) -> str:
    doc = {
        "dialogs": [
            {
                "id": d.dialog_id,
                "task": d.task_id,
                "domain": d.domain_id,
                "turns": [
                    {
                        "speaker": t.speaker.value,
                        "text": t.text,
                        **({"action": t.action} if t.action is not None else {}),
                    }
                    for t in d.turns
                ],
            }
            for d in corpus.dialogs
        ]
    }
    return canonical_json(doc)


def make_examples(corpus: Corpus) -> list[Example]:
    """One example per system turn, in dialog order then turn order."""
    examples: list[Example] = []
    for dialog in corpus.dialogs:
        for idx, turn in enumerate(dialog.turns):
            if turn.speaker is Speaker.SYSTEM:
                examples.append(
                    Example(
                        context=dialog.turns[:idx],
                        gold_action=turn.action,  # type: ignore[arg-type]
                        task_id=dialog.task_id,
                        domain_id=dialog.domain_id,
                        dialog_id=dialog.dialog_id,
                        turn_index=idx,
                    )
                )
    return examples


def split_standard(corpus: Corpus, train_fraction: float, seed: int) -> Split:
    """Dialog-level random split, stratified by task. Deterministic per seed."""
    if not (0.0 < train_fraction < 1.0):
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    by_task: dict[str, list[Dialog]] = {}
    for d in corpus.dialogs:
        by_task.setdefault(d.task_id, []).append(d)
    train_ids: set[str] = set()
    for task in sorted(by_task):
        dialogs = by_task[task]
        if len(dialogs) < 2:
            raise DegenerateSplit(f"task {task!r} has {len(dialogs)} dialog(s), needs >= 2")
        rng = derive_rng(seed, "standard-split", task)
        order = rng.permutation(len(dialogs))
        n_train = max(1, min(len(dialogs) - 1, round(train_fraction * len(dialogs))))
        for pos in order[:n_train]:
            train_ids.add(dialogs[pos].dialog_id)
    train_examples: list[Example] = []
    test_examples: list[Example] = []
    for ex in make_examples(corpus):
        (train_examples if ex.dialog_id in train_ids else test_examples).append(ex)
    return Split(train=tuple(train_examples), test=tuple(test_examples), kind="standard")


def split_leave_one_task(corpus: Corpus, holdout_task: str) -> Split:
    if holdout_task not in corpus.tasks:
        raise UnknownHoldout(f"task {holdout_task!r} not in corpus (has {corpus.tasks})")
    train = [ex for ex in make_examples(corpus) if ex.task_id != holdout_task]
    test = [ex for ex in make_examples(corpus) if ex.task_id == holdout_task]
    return Split(train=tuple(train), test=tuple(test), kind="leave_one_task", holdout=holdout_task)


def split_leave_one_domain(corpus: Corpus, holdout_domain: str) -> Split:
    if holdout_domain not in corpus.domains:
        raise UnknownHoldout(f"domain {holdout_domain!r} not in corpus (has {corpus.domains})")
    train = [ex for ex in make_examples(corpus) if ex.domain_id != holdout_domain]
    test = [ex for ex in make_examples(corpus) if ex.domain_id == holdout_domain]
    return Split(
        train=tuple(train), test=tuple(test), kind="leave_one_domain", holdout=holdout_domain
    )
