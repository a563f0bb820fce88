#!/usr/bin/env python3
"""End-to-end service session, in process.

Trains a small model on a synthetic corpus, stands up the dialog service
(no network; the same object the HTTP app wraps), and plays a cooperative
dialog: task selection, slot answers, the database stub firing after the
query action, and the final inform. Prints each prediction with its
alignment explanation.

Run from the repo root:  python3 demos/04_service_session.py
"""

from schemadialog import SyntheticConfig, generate_synthetic, split_standard
from schemadialog.service import DialogService
from schemadialog.training import TrainConfig, train

TASK = "booking"


def main():
    corpus, graphs = generate_synthetic(
        SyntheticConfig(tasks=4, domains=2, dialogs_per_task=12), seed=3
    )
    schemas = {g.task_id: g for g in graphs}
    config = TrainConfig(
        epochs=3, batch_size=8, learning_rate=3e-3, seed=13,
        dim=32, layers=1, heads=2, ffn_dim=64,
        max_positions=64, max_context_tokens=32, vocab_size=500,
    )
    result = train(config, split_standard(corpus, 0.8, 13), schemas)
    service = DialogService(schemas=schemas, model=result.model, model_id="demo")

    session = service.create_session(TASK)
    print(f"session {session.session_id[:8]} on task {TASK!r}")
    print(f"SYSTEM: {session.history[0].text}")

    slots = [schemas[TASK].node(f"sys_ask_{j}").action.split("_")[1] for j in (1, 2, 3)]
    values = {"date": "march", "time": "noon", "name": "alice",
              "city": "rome", "count": "two", "color": "red"}
    script = [f"hello , i need to arrange a {TASK} please ."]
    script += [f"the {slot} is {values[slot]} ." for slot in slots]
    script += ["ok what did you find ?", "great , that is all . thank you !"]

    for text in script:
        print(f"\nUSER:   {text}")
        response = service.post_utterance(session.session_id, text)
        top = response["ranked"][0]
        print(f"SYSTEM: {top['template']}   [{top['action']}, p={top['probability']:.2f}]")
        if response["alignments"]:
            best = response["alignments"][0]
            print(f"        aligned: {best['node_id']} (p={best['mass']:.2f})")
        last = response["session"]["history"][-1]
        if last.get("db_result"):
            print(f"DB:     {last['db_result']}")

    final = service.get_session(session.session_id)
    print(f"\nfinal history length: {len(final.history)} "
          f"(greeting + 2 per post, db rows attached to their query turn)")


if __name__ == "__main__":
    main()
