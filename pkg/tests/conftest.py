from __future__ import annotations

import os

import pytest

from schemadialog.schema import SchemaGraph, load_schema
from schemadialog.synthetic import SyntheticConfig, generate_synthetic

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

MINIMAL_SCHEMA = """
{
  "task": "mini", "domain": "demo", "variant": "user_aware", "start": "hello",
  "nodes": [
    {"id": "hello", "kind": "system", "text": "Hello!", "action": "hello"},
    {"id": "u_hi", "kind": "user", "text": "hi"},
    {"id": "ask_name", "kind": "system", "text": "What is your name?", "action": "ask_name"}
  ],
  "edges": [["hello", "u_hi"], ["u_hi", "ask_name"]]
}
"""


def fixture_bytes(name: str) -> bytes:
    with open(os.path.join(FIXTURES, name), "rb") as f:
        return f.read()


@pytest.fixture(scope="session")
def bank_graph() -> SchemaGraph:
    return load_schema(fixture_bytes("bank_balance.json"))


@pytest.fixture(scope="session")
def spaceship_graph() -> SchemaGraph:
    return load_schema(fixture_bytes("spaceship_codes.json"))


@pytest.fixture(scope="session")
def minimal_graph() -> SchemaGraph:
    return load_schema(MINIMAL_SCHEMA)


@pytest.fixture(scope="session")
def synthetic_small():
    """4 tasks x 6 dialogs: fast enough for unit tests."""
    config = SyntheticConfig(tasks=4, domains=2, dialogs_per_task=6)
    corpus, graphs = generate_synthetic(config, seed=13)
    return corpus, {g.task_id: g for g in graphs}
