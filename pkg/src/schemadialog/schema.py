"""Task-schema graphs: explicit dialog-policy representations.

A schema graph has three node kinds: system responses (each carrying a
unique action), user utterances, and database responses. User/db nodes sit
between system nodes and are deterministic: exactly one incoming and one
outgoing edge, both to system nodes. Prediction works by aligning a dialog
history against the user/db ("candidate") nodes and reading the action off
each candidate's unique successor.

File format (UTF-8 JSON, canonical key order for byte-stable round trips):

    {"task": str, "domain": str, "variant": "user_aware"|"system_only",
     "start": node_id,
     "nodes": [{"id": str, "kind": "system"|"user"|"db", "text": str,
                "action": str?}, ...],
     "edges": [[from_id, to_id], ...]}
"""

from __future__ import annotations

import enum
import io
import json
from dataclasses import dataclass, replace
from functools import cached_property

from .errors import InvalidGraph, NotCandidateNode, ParseError
from .util import canonical_json

SYSTEM_ONLY_PLACEHOLDER = "[user response]"

SPEAKER_TAGS = {"system": "[SYSTEM]", "user": "[USER]", "db": "[DB]"}


class NodeKind(enum.Enum):
    SYSTEM = "system"
    USER = "user"
    DB = "db"


class Variant(enum.Enum):
    USER_AWARE = "user_aware"
    SYSTEM_ONLY = "system_only"


@dataclass(frozen=True)
class SchemaNode:
    id: str
    kind: NodeKind
    text: str
    action: str | None = None  # present iff kind == SYSTEM


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    locus: str  # node id or "from->to" edge
    rule: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    diagnostics: tuple[Diagnostic, ...]

    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == "error"]

    def rules(self) -> set[str]:
        return {d.rule for d in self.diagnostics if d.severity == "error"}


@dataclass(frozen=True)
class SchemaGraph:
    """Immutable once constructed; validate() before structural queries."""

    task_id: str
    domain_id: str
    start: str
    nodes: tuple[SchemaNode, ...]
    edges: tuple[tuple[str, str], ...]
    variant: Variant = Variant.USER_AWARE

    def node(self, node_id: str) -> SchemaNode:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise KeyError(f"no node {node_id!r} in task {self.task_id!r}") from None

    def has_node(self, node_id: str) -> bool:
        return node_id in self._by_id

    @cached_property
    def _by_id(self) -> dict[str, SchemaNode]:
        return {n.id: n for n in self.nodes}

    def successors(self, node_id: str) -> list[str]:
        return [t for (s, t) in self.edges if s == node_id]

    def predecessors(self, node_id: str) -> list[str]:
        return [s for (s, t) in self.edges if t == node_id]

    def actions(self) -> list[str]:
        """Actions of system nodes, in document order, deduplicated."""
        seen: dict[str, None] = {}
        for n in self.nodes:
            if n.kind is NodeKind.SYSTEM and n.action is not None:
                seen.setdefault(n.action, None)
        return list(seen)

    def action_templates(self) -> dict[str, str]:
        out: dict[str, str] = {}
        for n in self.nodes:
            if n.kind is NodeKind.SYSTEM and n.action is not None and n.action not in out:
                out[n.action] = n.text
        return out


def load_schema(source: bytes | str | io.IOBase) -> SchemaGraph:
    """Parse a schema file. Structural parsing only; run validate() separately."""
    if isinstance(source, io.IOBase):
        source = source.read()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"schema file is not UTF-8: {e}") from e
    try:
        raw = json.loads(source)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed JSON: {e.msg}", locus=f"line {e.lineno}, col {e.colno}") from e
    if not isinstance(raw, dict):
        raise ParseError("top level must be an object")
    for key in ("task", "domain", "start", "nodes", "edges"):
        if key not in raw:
            raise ParseError(f"missing required field {key!r}")
    variant_raw = raw.get("variant", "user_aware")
    try:
        variant = Variant(variant_raw)
    except ValueError:
        raise ParseError(f"unknown variant {variant_raw!r}") from None

    nodes: list[SchemaNode] = []
    seen_ids: set[str] = set()
    for i, entry in enumerate(raw["nodes"]):
        locus = f"nodes[{i}]"
        if not isinstance(entry, dict):
            raise ParseError("node entry must be an object", locus=locus)
        for key in ("id", "kind", "text"):
            if key not in entry:
                raise ParseError(f"node missing required field {key!r}", locus=locus)
        node_id = entry["id"]
        if not isinstance(node_id, str) or not node_id:
            raise ParseError("node id must be a non-empty string", locus=locus)
        if node_id in seen_ids:
            raise ParseError(f"duplicate node id {node_id!r}", locus=locus)
        seen_ids.add(node_id)
        try:
            kind = NodeKind(entry["kind"])
        except ValueError:
            raise ParseError(f"unknown node kind {entry['kind']!r}", locus=locus) from None
        action = entry.get("action")
        if kind is NodeKind.SYSTEM and not action:
            raise ParseError(f"system node {node_id!r} missing action", locus=locus)
        if kind is not NodeKind.SYSTEM and action is not None:
            raise ParseError(f"non-system node {node_id!r} must not carry an action", locus=locus)
        if not isinstance(entry["text"], str) or not entry["text"]:
            raise ParseError(f"node {node_id!r} has empty text", locus=locus)
        nodes.append(SchemaNode(id=node_id, kind=kind, text=entry["text"], action=action))

    edges: list[tuple[str, str]] = []
    for i, pair in enumerate(raw["edges"]):
        locus = f"edges[{i}]"
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            raise ParseError("edge must be a [from, to] pair", locus=locus)
        edges.append((str(pair[0]), str(pair[1])))

    return SchemaGraph(
        task_id=str(raw["task"]),
        domain_id=str(raw["domain"]),
        start=str(raw["start"]),
        nodes=tuple(nodes),
        edges=tuple(edges),
        variant=variant,
    )


def dump_schema(graph: SchemaGraph) -> str:
    """Canonical serialization; load(dump(g)) round-trips byte-stably."""
    doc = {
        "task": graph.task_id,
        "domain": graph.domain_id,
        "variant": graph.variant.value,
        "start": graph.start,
        "nodes": [
            {
                "id": n.id,
                "kind": n.kind.value,
                "text": n.text,
                **({"action": n.action} if n.action is not None else {}),
            }
            for n in graph.nodes
        ],
        "edges": [[s, t] for (s, t) in graph.edges],
    }
    return canonical_json(doc)


def validate(graph: SchemaGraph) -> ValidationReport:
    """Check every structural invariant; violations are reported, never raised."""
    diags: list[Diagnostic] = []
    ids = {n.id for n in graph.nodes}

    def err(locus: str, rule: str, message: str) -> None:
        diags.append(Diagnostic("error", locus, rule, message))

    def warn(locus: str, rule: str, message: str) -> None:
        diags.append(Diagnostic("warning", locus, rule, message))

    for s, t in graph.edges:
        for end in (s, t):
            if end not in ids:
                err(f"{s}->{t}", "dangling-edge", f"edge references unknown node {end!r}")

    out_map: dict[str, list[str]] = {n.id: [] for n in graph.nodes}
    in_map: dict[str, list[str]] = {n.id: [] for n in graph.nodes}
    for s, t in graph.edges:
        if s in out_map:
            out_map[s].append(t)
        if t in in_map:
            in_map[t].append(s)

    for n in graph.nodes:
        if n.kind is NodeKind.SYSTEM:
            continue
        outs = out_map[n.id]
        if len(outs) != 1:
            err(n.id, "determinism/outgoing",
                f"{n.kind.value} node {n.id!r} has {len(outs)} outgoing edges, needs exactly 1")
        elif outs[0] in ids and graph.node(outs[0]).kind is not NodeKind.SYSTEM:
            err(n.id, "determinism/outgoing",
                f"{n.kind.value} node {n.id!r} must point to a system node")
        ins = in_map[n.id]
        if len(ins) != 1:
            err(n.id, "determinism/incoming",
                f"{n.kind.value} node {n.id!r} has {len(ins)} incoming edges, needs exactly 1")
        elif ins[0] in ids and graph.node(ins[0]).kind is not NodeKind.SYSTEM:
            err(n.id, "determinism/incoming",
                f"{n.kind.value} node {n.id!r} must be entered from a system node")

    by_action: dict[str, list[SchemaNode]] = {}
    for n in graph.nodes:
        if n.kind is NodeKind.SYSTEM and n.action is not None:
            by_action.setdefault(n.action, []).append(n)
    for action, nodes in by_action.items():
        templates = {n.text for n in nodes}
        if len(templates) > 1:
            err(nodes[1].id, "action-template-bijection",
                f"action {action!r} maps to {len(templates)} distinct templates")
    by_template: dict[str, set[str]] = {}
    for n in graph.nodes:
        if n.kind is NodeKind.SYSTEM and n.action is not None:
            by_template.setdefault(n.text, set()).add(n.action)
    for template, actions in by_template.items():
        if len(actions) > 1:
            err(sorted(actions)[0], "action-template-bijection",
                f"template {template[:40]!r} maps to {len(actions)} distinct actions")

    if graph.start not in ids:
        err(graph.start, "connectivity", f"start node {graph.start!r} does not exist")
    else:
        reachable = {graph.start}
        frontier = [graph.start]
        adjacency: dict[str, list[str]] = {}
        for s, t in graph.edges:
            adjacency.setdefault(s, []).append(t)
        while frontier:
            cur = frontier.pop()
            for nxt in adjacency.get(cur, []):
                if nxt in ids and nxt not in reachable:
                    reachable.add(nxt)
                    frontier.append(nxt)
        for n in graph.nodes:
            if n.id not in reachable:
                err(n.id, "connectivity", f"node {n.id!r} unreachable from start")

    if not any(n.kind is not NodeKind.SYSTEM for n in graph.nodes):
        warn(graph.start, "no-candidates", "graph has no user or db nodes; nothing to attend to")

    ok = not any(d.severity == "error" for d in diags)
    return ValidationReport(ok=ok, diagnostics=tuple(diags))


def _require_valid(graph: SchemaGraph) -> None:
    report = validate(graph)
    if not report.ok:
        first = report.errors()[0]
        raise InvalidGraph(f"invalid graph {graph.task_id!r}: [{first.rule}] {first.message}")


def candidate_nodes(graph: SchemaGraph) -> list[str]:
    """User/db node ids in document order. Graph must validate."""
    _require_valid(graph)
    return [n.id for n in graph.nodes if n.kind is not NodeKind.SYSTEM]


@dataclass(frozen=True)
class NodeText:
    node: str
    text: str


def node_text_repr(graph: SchemaGraph, node_id: str) -> NodeText:
    """Speaker-tagged concatenation of the predecessor system text and own text."""
    node = graph.node(node_id)
    if node.kind is NodeKind.SYSTEM:
        raise NotCandidateNode(f"{node_id!r} is a system node")
    tag = SPEAKER_TAGS[node.kind.value]
    preds = graph.predecessors(node_id)
    prev_text = ""
    if preds:
        prev = graph.node(preds[0])
        prev_text = f"{SPEAKER_TAGS['system']} {prev.text} "
    return NodeText(node=node_id, text=f"{prev_text}{tag} {node.text}")


def next_action(graph: SchemaGraph, node_id: str) -> str:
    """Action of the candidate node's unique successor system node."""
    node = graph.node(node_id)
    if node.kind is NodeKind.SYSTEM:
        raise NotCandidateNode(f"{node_id!r} is a system node")
    succs = graph.successors(node_id)
    if len(succs) != 1:
        raise InvalidGraph(f"candidate {node_id!r} has {len(succs)} successors")
    succ = graph.node(succs[0])
    if succ.kind is not NodeKind.SYSTEM or succ.action is None:
        raise InvalidGraph(f"successor of {node_id!r} is not an actioned system node")
    return succ.action


def to_system_only(graph: SchemaGraph) -> SchemaGraph:
    """Legacy-style variant: blank user text except at branch points.

    A branch point is a system node with >= 2 user children; there the
    distinguishing user text is retained. Structure, actions, and the
    candidate-node set are unchanged, so next_action is preserved.
    Idempotent.
    """
    _require_valid(graph)
    user_children: dict[str, int] = {}
    for s, t in graph.edges:
        if graph.has_node(s) and graph.has_node(t):
            if graph.node(s).kind is NodeKind.SYSTEM and graph.node(t).kind is NodeKind.USER:
                user_children[s] = user_children.get(s, 0) + 1

    def keeps_text(node: SchemaNode) -> bool:
        if node.kind is not NodeKind.USER:
            return True
        preds = graph.predecessors(node.id)
        return bool(preds) and user_children.get(preds[0], 0) >= 2

    new_nodes = tuple(
        n if keeps_text(n) else replace(n, text=SYSTEM_ONLY_PLACEHOLDER) for n in graph.nodes
    )
    return replace(graph, nodes=new_nodes, variant=Variant.SYSTEM_ONLY)
