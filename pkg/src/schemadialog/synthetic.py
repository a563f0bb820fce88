"""Synthetic mini-corpus: schemas plus schema-consistent dialogs.

Desk-scale stand-in for a real multi-task dialog corpus. Each task is a
slot-filling flow over slot types drawn from a shared pool, so language
understanding (value words, question phrasing) transfers across tasks
while action names stay mostly task-specific. Three action names are
shared across every task (hello, query, goodbye); the rest are unique per
task, which is what gives a pure classifier a floor but not a ceiling in
zero-shot transfer.

Dialog phenomena, all encoded in the schema so every generated dialog is
schema-consistent:
  - cooperative turn-by-turn answers,
  - out-of-turn multi-slot answers (the system then skips a question),
  - subject changes (user restarts the request at stage 2).

Questions after the first stage use generic phrasing that differs only in
a filler word, and the opening user node is the single child of the
greeting node: both choices make the user-node text (not just system
text) carry real signal, which is what separates the user-aware schema
from its system-only ablation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Corpus, Dialog, Speaker, Turn
from .errors import ConfigError
from .schema import NodeKind, SchemaGraph, SchemaNode, Variant
from .util import derive_rng

SLOT_TYPES: list[tuple[str, list[str]]] = [
    ("date", ["monday", "friday", "june", "march", "sunday"]),
    ("time", ["noon", "morning", "evening", "midnight", "dawn"]),
    ("name", ["alice", "bob", "carol", "dave", "erin"]),
    ("city", ["rome", "paris", "oslo", "tokyo", "cairo"]),
    ("count", ["one", "two", "three", "four", "five"]),
    ("color", ["red", "blue", "green", "amber", "violet"]),
    ("code", ["alpha", "bravo", "delta", "echo", "zulu"]),
    ("item", ["pasta", "sushi", "tacos", "curry", "stew"]),
]

TASK_NOUNS = [
    "booking", "balance", "forecast", "repair", "quiz", "ride",
    "parcel", "banquet", "rental", "audit", "tour", "upgrade",
]

DOMAIN_NAMES = ["services", "accounts", "travel", "events", "support", "leisure"]

STAGE_FILLERS = ["the next", "another", "one more", "a final", "the remaining"]


@dataclass(frozen=True)
class SyntheticConfig:
    tasks: int = 6
    domains: int = 2
    slots_per_task: int = 3
    dialogs_per_task: int = 40
    out_of_turn_rate: float = 0.2
    subject_change_rate: float = 0.1

    def validate(self) -> None:
        if self.tasks < 4:
            raise ConfigError(f"need >= 4 tasks, got {self.tasks}")
        if self.domains < 2:
            raise ConfigError(f"need >= 2 domains, got {self.domains}")
        if self.domains > self.tasks:
            raise ConfigError("more domains than tasks")
        if self.tasks > len(TASK_NOUNS):
            raise ConfigError(f"at most {len(TASK_NOUNS)} tasks supported")
        if not (2 <= self.slots_per_task <= 5):
            raise ConfigError("slots_per_task must be in [2, 5]")
        if self.dialogs_per_task < 1:
            raise ConfigError("dialogs_per_task must be >= 1")
        for rate in (self.out_of_turn_rate, self.subject_change_rate):
            if not (0.0 <= rate <= 1.0):
                raise ConfigError(f"rate {rate} outside [0, 1]")


def _task_slots(config: SyntheticConfig, task_index: int) -> list[tuple[str, list[str]]]:
    pool = min(len(SLOT_TYPES), max(config.tasks, config.slots_per_task + 1))
    return [SLOT_TYPES[(task_index + j) % pool] for j in range(config.slots_per_task)]


def _task_domain(config: SyntheticConfig, task_index: int) -> str:
    per_domain = -(-config.tasks // config.domains)  # ceil
    return DOMAIN_NAMES[task_index // per_domain]


def build_task_schema(config: SyntheticConfig, task_index: int) -> SchemaGraph:
    noun = TASK_NOUNS[task_index]
    task_id = noun
    slots = _task_slots(config, task_index)
    k = config.slots_per_task

    nodes: list[SchemaNode] = []
    edges: list[tuple[str, str]] = []

    def sys(node_id: str, text: str, action: str) -> None:
        nodes.append(SchemaNode(id=node_id, kind=NodeKind.SYSTEM, text=text, action=action))

    def usr(node_id: str, text: str, parent: str, target: str) -> None:
        nodes.append(SchemaNode(id=node_id, kind=NodeKind.USER, text=text))
        edges.append((parent, node_id))
        edges.append((node_id, target))

    first_slot = slots[0][0]
    sys("sys_hello", "welcome ! what can i do for you today ?", "hello")
    for j, (slot, _) in enumerate(slots, start=1):
        if j == 1:
            text = f"sure . please tell me the {slot} for the {noun} ."
        else:
            text = f"ok . {STAGE_FILLERS[j - 2]} detail please ?"
        sys(f"sys_ask_{j}", text, f"ask_{slot}_{task_id}")
    sys(
        "sys_restart",
        f"no problem , starting over . tell me the {first_slot} once more .",
        f"restart_{task_id}",
    )
    sys("sys_query", "alright , let me look that up for you .", "query")
    sys("sys_inform", f"here is what i found : [DATA] for your {noun} .", f"inform_{task_id}")
    sys("sys_bye", "goodbye and have a nice day !", "goodbye")

    def ask_or_query(stage: int) -> str:
        return f"sys_ask_{stage}" if stage <= k else "sys_query"

    usr("u_open", f"hello , i need to arrange a {noun} please .", "sys_hello", "sys_ask_1")
    for j, (slot, _) in enumerate(slots, start=1):
        usr(f"u_ans_{j}", f"the {slot} is [{slot.upper()}] .", f"sys_ask_{j}", ask_or_query(j + 1))
        if j < k:
            next_slot = slots[j][0]
            usr(
                f"u_multi_{j}",
                f"[{slot.upper()}] for the {slot} and [{next_slot.upper()}]"
                f" for the {next_slot} , both at once .",
                f"sys_ask_{j}",
                ask_or_query(j + 2),
            )
        if j == 2:
            usr(
                "u_restart",
                "wait , that is wrong . forget everything and begin again .",
                "sys_ask_2",
                "sys_restart",
            )
            usr(
                "u_restart_ans",
                f"the {first_slot} is [{first_slot.upper()}] .",
                "sys_restart",
                "sys_ask_2",
            )
    nodes.append(
        SchemaNode(
            id="db_result",
            kind=NodeKind.DB,
            text=f"RESULT: the {noun} record shows [DATA] .",
        )
    )
    edges.append(("sys_query", "db_result"))
    edges.append(("db_result", "sys_inform"))
    usr("u_thanks", "great , that is all . thank you !", "sys_inform", "sys_bye")

    return SchemaGraph(
        task_id=task_id,
        domain_id=_task_domain(config, task_index),
        start="sys_hello",
        nodes=tuple(nodes),
        edges=tuple(edges),
        variant=Variant.USER_AWARE,
    )


def _fill(template: str, slots: list[tuple[str, list[str]]], values: dict[str, str]) -> str:
    out = template
    for slot, _ in slots:
        out = out.replace(f"[{slot.upper()}]", values[slot])
    return out


def generate_dialog(
    config: SyntheticConfig,
    graph: SchemaGraph,
    slots: list[tuple[str, list[str]]],
    dialog_id: str,
    seed: int,
) -> Dialog:
    """Walk the schema; every system turn's action is next_action of the matched node."""
    rng = derive_rng(seed, "synthetic-dialog", graph.task_id, dialog_id)
    values = {slot: words[rng.integers(0, len(words))] for slot, words in slots}
    k = config.slots_per_task

    turns: list[Turn] = []

    def emit_user(node_id: str) -> None:
        turns.append(
            Turn(Speaker.USER, _fill(graph.node(node_id).text, slots, values))
        )

    def emit_system(node_id: str) -> None:
        node = graph.node(node_id)
        turns.append(Turn(Speaker.SYSTEM, node.text, action=node.action))

    def emit_db(node_id: str) -> None:
        turns.append(Turn(Speaker.DB, graph.node(node_id).text))

    emit_user("u_open")
    emit_system("sys_ask_1")
    stage = 1
    restarted = False
    while stage <= k:
        can_restart = stage == 2 and not restarted
        can_multi = stage < k
        if can_restart and rng.random() < config.subject_change_rate:
            emit_user("u_restart")
            emit_system("sys_restart")
            restarted = True
            # resample values: the retold first slot differs from the original
            values.update({slot: words[rng.integers(0, len(words))] for slot, words in slots})
            emit_user("u_restart_ans")
            emit_system("sys_ask_2")
            stage = 2
            continue
        if can_multi and rng.random() < config.out_of_turn_rate:
            emit_user(f"u_multi_{stage}")
            nxt = stage + 2
        else:
            emit_user(f"u_ans_{stage}")
            nxt = stage + 1
        if nxt <= k:
            emit_system(f"sys_ask_{nxt}")
        else:
            emit_system("sys_query")
        stage = nxt
    emit_db("db_result")
    emit_system("sys_inform")
    emit_user("u_thanks")
    emit_system("sys_bye")

    return Dialog(
        dialog_id=dialog_id,
        task_id=graph.task_id,
        domain_id=graph.domain_id,
        turns=tuple(turns),
    )


def generate_synthetic(config: SyntheticConfig, seed: int) -> tuple[Corpus, list[SchemaGraph]]:
    """Deterministic (config, seed) -> (corpus, user-aware schemas)."""
    config.validate()
    graphs = [build_task_schema(config, i) for i in range(config.tasks)]
    dialogs: list[Dialog] = []
    for i, graph in enumerate(graphs):
        slots = _task_slots(config, i)
        for d in range(config.dialogs_per_task):
            dialog_id = f"{graph.task_id}_{d:04d}"
            dialogs.append(generate_dialog(config, graph, slots, dialog_id, seed))
    return Corpus(dialogs=tuple(dialogs)), graphs
