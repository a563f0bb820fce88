from __future__ import annotations

import json

import pytest

from schemadialog.errors import InvalidGraph, NotCandidateNode, ParseError
from schemadialog.schema import (
    SYSTEM_ONLY_PLACEHOLDER,
    NodeKind,
    Variant,
    candidate_nodes,
    dump_schema,
    load_schema,
    next_action,
    node_text_repr,
    to_system_only,
    validate,
)

from conftest import MINIMAL_SCHEMA


class TestLoadSchema:
    def test_minimal_three_nodes(self, minimal_graph):
        assert len(minimal_graph.nodes) == 3
        assert len(minimal_graph.edges) == 2
        assert minimal_graph.task_id == "mini"

    def test_duplicate_node_id_names_offender(self):
        doc = json.loads(MINIMAL_SCHEMA)
        doc["nodes"].append({"id": "u_hi", "kind": "user", "text": "again"})
        with pytest.raises(ParseError, match="u_hi"):
            load_schema(json.dumps(doc))

    def test_unknown_kind(self):
        doc = json.loads(MINIMAL_SCHEMA)
        doc["nodes"][0]["kind"] = "robot"
        with pytest.raises(ParseError, match="robot"):
            load_schema(json.dumps(doc))

    def test_missing_field(self):
        with pytest.raises(ParseError, match="nodes"):
            load_schema('{"task": "t", "domain": "d", "start": "s", "edges": []}')

    def test_malformed_json_has_position(self):
        with pytest.raises(ParseError, match="line"):
            load_schema("{not json")

    def test_system_node_requires_action(self):
        doc = json.loads(MINIMAL_SCHEMA)
        del doc["nodes"][0]["action"]
        with pytest.raises(ParseError, match="action"):
            load_schema(json.dumps(doc))

    def test_bank_fixture_forgot_path(self, bank_graph):
        # the "forgot account number" user node leads to the backup security question
        succs = bank_graph.successors("u_forgot_account")
        assert succs == ["ask_dob"]
        assert bank_graph.node("ask_dob").action == "ask_date_of_birth"


class TestValidate:
    def test_bank_fixture_valid(self, bank_graph):
        report = validate(bank_graph)
        assert report.ok
        assert report.errors() == []

    def test_user_node_two_outgoing(self, minimal_graph):
        doc = json.loads(dump_schema(minimal_graph))
        doc["nodes"].append(
            {"id": "ask_age", "kind": "system", "text": "Age?", "action": "ask_age"}
        )
        doc["edges"].append(["u_hi", "ask_age"])
        report = validate(load_schema(json.dumps(doc)))
        assert not report.ok
        errors = [d for d in report.errors() if d.rule == "determinism/outgoing"]
        assert errors and errors[0].locus == "u_hi"

    def test_action_template_bijection(self, minimal_graph):
        doc = json.loads(dump_schema(minimal_graph))
        doc["nodes"].append(
            {"id": "ask_name2", "kind": "system", "text": "Name please?", "action": "ask_name"}
        )
        doc["edges"].append(["ask_name", "ask_name2"])
        report = validate(load_schema(json.dumps(doc)))
        assert not report.ok
        assert "action-template-bijection" in report.rules()

    def test_dangling_edge(self, minimal_graph):
        doc = json.loads(dump_schema(minimal_graph))
        doc["edges"].append(["u_hi", "ghost"])
        report = validate(load_schema(json.dumps(doc)))
        assert "dangling-edge" in report.rules()

    def test_unreachable_node(self, minimal_graph):
        doc = json.loads(dump_schema(minimal_graph))
        doc["nodes"].append(
            {"id": "island", "kind": "system", "text": "Lost.", "action": "lost"}
        )
        report = validate(load_schema(json.dumps(doc)))
        assert "connectivity" in report.rules()

    def test_system_only_chain_warns_no_candidates(self):
        doc = {
            "task": "t", "domain": "d", "variant": "system_only", "start": "a",
            "nodes": [
                {"id": "a", "kind": "system", "text": "A", "action": "act_a"},
                {"id": "b", "kind": "system", "text": "B", "action": "act_b"},
            ],
            "edges": [["a", "b"]],
        }
        graph = load_schema(json.dumps(doc))
        report = validate(graph)
        assert report.ok
        assert any(d.rule == "no-candidates" for d in report.diagnostics)
        assert candidate_nodes(graph) == []


class TestCandidateNodes:
    def test_minimal_single_user_node(self, minimal_graph):
        assert candidate_nodes(minimal_graph) == ["u_hi"]

    def test_bank_document_order(self, bank_graph):
        # all user and db nodes, in the order the file lists them
        expected = [
            n.id for n in bank_graph.nodes if n.kind is not NodeKind.SYSTEM
        ]
        assert candidate_nodes(bank_graph) == expected
        assert "db_balance" in candidate_nodes(bank_graph)

    def test_invalid_graph_rejected(self, minimal_graph):
        doc = json.loads(dump_schema(minimal_graph))
        doc["edges"].append(["u_hi", "ghost"])
        with pytest.raises(InvalidGraph):
            candidate_nodes(load_schema(json.dumps(doc)))


class TestNodeTextRepr:
    def test_spaceship_code_node(self, spaceship_graph):
        rep = node_text_repr(spaceship_graph, "u_number")
        assert rep.text == "[SYSTEM] Please enter the code. [USER] [NUMBER]"

    def test_bank_forgot_account(self, bank_graph):
        rep = node_text_repr(bank_graph, "u_forgot_account")
        assert rep.text == (
            "[SYSTEM] Could you tell me your account number, please? "
            "[USER] I don't know my account number."
        )

    def test_db_node_tag(self, bank_graph):
        rep = node_text_repr(bank_graph, "db_balance")
        assert rep.text == "[SYSTEM] Let me look that up for you. [DB] RESULT: balance [AMOUNT]"

    def test_empty_prev_start_adjacent(self):
        doc = {
            "task": "t", "domain": "d", "variant": "user_aware", "start": "u",
            "nodes": [
                {"id": "u", "kind": "user", "text": "hi"},
                {"id": "s", "kind": "system", "text": "Hello!", "action": "hello"},
            ],
            "edges": [["u", "s"]],
        }
        graph = load_schema(json.dumps(doc))
        assert node_text_repr(graph, "u").text == "[USER] hi"

    def test_pure_function(self, bank_graph):
        a = node_text_repr(bank_graph, "u_pin").text
        b = node_text_repr(bank_graph, "u_pin").text
        assert a == b

    def test_system_node_rejected(self, bank_graph):
        with pytest.raises(NotCandidateNode):
            node_text_repr(bank_graph, "ask_pin")


class TestNextAction:
    def test_forgot_account_to_security_question(self, bank_graph):
        assert next_action(bank_graph, "u_forgot_account") == "ask_date_of_birth"

    def test_minimal(self, minimal_graph):
        assert next_action(minimal_graph, "u_hi") == "ask_name"

    def test_system_node_rejected(self, minimal_graph):
        with pytest.raises(NotCandidateNode):
            next_action(minimal_graph, "hello")


class TestToSystemOnly:
    def _linear_chain(self):
        doc = {
            "task": "chain", "domain": "d", "variant": "user_aware", "start": "s1",
            "nodes": [
                {"id": "s1", "kind": "system", "text": "One?", "action": "a1"},
                {"id": "u1", "kind": "user", "text": "first answer"},
                {"id": "s2", "kind": "system", "text": "Two?", "action": "a2"},
                {"id": "u2", "kind": "user", "text": "second answer"},
                {"id": "s3", "kind": "system", "text": "Done.", "action": "a3"},
            ],
            "edges": [["s1", "u1"], ["u1", "s2"], ["s2", "u2"], ["u2", "s3"]],
        }
        return load_schema(json.dumps(doc))

    def test_linear_chain_all_blanked(self):
        graph = to_system_only(self._linear_chain())
        assert graph.variant is Variant.SYSTEM_ONLY
        for nid in ("u1", "u2"):
            assert graph.node(nid).text == SYSTEM_ONLY_PLACEHOLDER

    def test_branch_texts_retained(self, bank_graph):
        so = to_system_only(bank_graph)
        # account-number branch: both user children keep their distinguishing text
        assert so.node("u_account").text == "[ACCOUNT NUMBER]"
        assert so.node("u_forgot_account").text == "I don't know my account number."
        # single-child nodes are blanked
        assert so.node("u_balance").text == SYSTEM_ONLY_PLACEHOLDER
        assert so.node("u_name").text == SYSTEM_ONLY_PLACEHOLDER
        # db nodes never blank
        assert so.node("db_balance").text == bank_graph.node("db_balance").text

    def test_idempotent(self, bank_graph):
        once = to_system_only(bank_graph)
        twice = to_system_only(once)
        assert once == twice

    def test_preserves_structure_and_actions(self, bank_graph):
        so = to_system_only(bank_graph)
        assert candidate_nodes(so) == candidate_nodes(bank_graph)
        assert so.edges == bank_graph.edges
        assert so.action_templates() == bank_graph.action_templates()
        for nid in candidate_nodes(bank_graph):
            assert next_action(so, nid) == next_action(bank_graph, nid)


class TestRoundTrip:
    def test_dump_load_dump_byte_stable(self, bank_graph, minimal_graph, spaceship_graph):
        for graph in (bank_graph, minimal_graph, spaceship_graph):
            text = dump_schema(graph)
            again = dump_schema(load_schema(text))
            assert text == again

    def test_reload_equal(self, bank_graph):
        assert load_schema(dump_schema(bank_graph)) == bank_graph
