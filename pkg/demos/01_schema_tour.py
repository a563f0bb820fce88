#!/usr/bin/env python3
"""Tour of the schema-graph layer.

Loads the bank-balance policy graph, validates it, walks the candidate
nodes with their text representations and next actions, derives the
system-only variant, and shows how the validator reacts to a broken graph.

Run from the repo root:  python3 demos/01_schema_tour.py
"""

import json
import pathlib

from schemadialog import (
    candidate_nodes,
    dump_schema,
    load_schema,
    next_action,
    node_text_repr,
    to_system_only,
    validate,
)

FIXTURE = pathlib.Path(__file__).parent.parent / "tests" / "fixtures" / "bank_balance.json"


def main():
    graph = load_schema(FIXTURE.read_bytes())
    print(f"task: {graph.task_id} (domain {graph.domain_id})")
    print(f"nodes: {len(graph.nodes)}, edges: {len(graph.edges)}")

    report = validate(graph)
    print(f"valid: {report.ok}")

    print("\ncandidate nodes (user/db), their alignment text, and next action:")
    for node_id in candidate_nodes(graph):
        rep = node_text_repr(graph, node_id)
        print(f"  {node_id:18s} -> {next_action(graph, node_id):22s} | {rep.text[:70]}")

    print("\nsystem-only variant (legacy ablation): user text blanked off-branch")
    legacy = to_system_only(graph)
    for node_id in ("u_balance", "u_account", "u_forgot_account"):
        print(f"  {node_id:18s} | {legacy.node(node_id).text}")

    print("\nbreaking the graph: a second outgoing edge from a user node")
    doc = json.loads(dump_schema(graph))
    doc["edges"].append(["u_name", "ask_pin"])
    broken = load_schema(json.dumps(doc))
    for diag in validate(broken).diagnostics:
        print(f"  {diag.severity}: [{diag.rule}] {diag.locus}: {diag.message}")


if __name__ == "__main__":
    main()
