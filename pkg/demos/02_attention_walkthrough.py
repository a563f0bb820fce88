#!/usr/bin/env python3
"""Word-level schema attention, step by step.

Uses the parameter-free hashed encoder (identical tokens get identical
vectors, so raw dot products already favor exact matches) to align a bank
dialog against the schema, then propagates node mass into an action
distribution. The dialog deliberately mirrors the forgotten-account-number
situation: the right answer is to fall back to a security question rather
than ask for the PIN.

Run from the repo root:  python3 demos/02_attention_walkthrough.py
"""

import pathlib

from schemadialog import (
    ActionVocabulary,
    HashedEncoder,
    Speaker,
    Turn,
    build_candidate_set,
    load_schema,
    predict,
    propagate_to_actions,
    schema_attention,
)
from schemadialog.model import SamModel, AblationFlags
from schemadialog.corpus import serialize_context

FIXTURE = pathlib.Path(__file__).parent.parent / "tests" / "fixtures" / "bank_balance.json"

CONTEXT = [
    Turn(Speaker.USER, "Hi, can you help me check my balance?"),
    Turn(Speaker.SYSTEM, "Could I get your full name, please?", action="ask_name"),
    Turn(Speaker.USER, "Jane Doe"),
    Turn(Speaker.SYSTEM, "Could you tell me your account number, please?",
         action="ask_account_number"),
    Turn(Speaker.USER, "I don't remember it or my PIN number unfortunately."),
]


def main():
    graph = load_schema(FIXTURE.read_bytes())
    encoder = HashedEncoder(seed=0, dim=16)

    print("dialog context:")
    print(" ", serialize_context(CONTEXT))

    candidates = build_candidate_set(graph, encoder)
    H = encoder.encode_text(serialize_context(CONTEXT))
    att = schema_attention(H, candidates)

    print("\nper-node attention mass (joint softmax over all word pairs):")
    order = sorted(range(len(candidates)), key=lambda i: -att.p[i])
    for i in order:
        entry = candidates.entries[i]
        print(f"  {att.p[i]:.3f}  {entry.node_id:18s} -> {entry.next_action}")

    vocab = ActionVocabulary.from_actions(graph.actions())
    dist = propagate_to_actions(att, candidates, vocab)
    print(f"\naction distribution sums to {dist.probs.sum():.9f}")

    model = SamModel(encoder=encoder, flags=AblationFlags())
    top = predict(model, CONTEXT, graph)[0]
    print(f"predicted action: {top.action} (p={top.probability:.3f})")
    print(f"system template:  {top.template}")
    print("strongest aligned node:", top.alignments[0][1])


if __name__ == "__main__":
    main()
