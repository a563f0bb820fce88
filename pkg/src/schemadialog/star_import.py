"""Best-effort importer for STAR-style dialog exports.

Maps the event-list export layout (one JSON object per dialog, wizard /
user / knowledge-base events) onto the canonical corpus format. The
upstream grammar is not published, so this mapper is tolerant: dialogs it
cannot interpret are skipped and counted in the manifest rather than
aborting the import. The manifest reports both total turn count and
system turn count, since upstream turn accounting is ambiguous.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

from .corpus import Corpus, Dialog, Speaker, Turn


@dataclass
class ImportManifest:
    dialogs: int
    skipped: int
    total_turns: int
    system_turns: int

    def to_dict(self) -> dict:
        return {
            "dialogs": self.dialogs,
            "skipped": self.skipped,
            "total_turns": self.total_turns,
            "system_turns": self.system_turns,
        }


def _convert_events(raw: dict, dialog_id: str) -> Dialog | None:
    events = raw.get("Events")
    if not isinstance(events, list):
        return None
    scenario = raw.get("Scenario", {})
    caps = scenario.get("WizardCapabilities", [])
    if len(caps) != 1:
        return None  # multi-task dialogs are out of scope
    task = caps[0].get("Task")
    domain = caps[0].get("Domain", task)
    if not task:
        return None
    happy = scenario.get("Happy")
    if happy is False:
        return None
    turns: list[Turn] = []
    for ev in events:
        agent = ev.get("Agent")
        action = ev.get("Action")
        text = ev.get("Text") or ""
        if agent == "User" and action in ("utter", None) and text:
            turns.append(Turn(Speaker.USER, text))
        elif agent == "Wizard" and action in ("utter", "pick_suggestion") and text:
            label = ev.get("ActionLabel") or ev.get("PrimaryItem") or "utter"
            turns.append(Turn(Speaker.SYSTEM, text, action=str(label)))
        elif agent in ("KnowledgeBase", "Database") and (text or ev.get("Item")):
            db_text = text or json.dumps(ev.get("Item"), sort_keys=True)
            turns.append(Turn(Speaker.DB, f"RESULT: {db_text}"))
    if not any(t.speaker is Speaker.SYSTEM for t in turns):
        return None
    return Dialog(dialog_id=dialog_id, task_id=str(task), domain_id=str(domain), turns=tuple(turns))


def import_star(path: str) -> tuple[Corpus, ImportManifest]:
    """Import a STAR export directory (or a single JSON file of dialogs)."""
    raw_dialogs: list[tuple[str, dict]] = []
    if os.path.isdir(path):
        dialog_dir = os.path.join(path, "dialogues")
        if not os.path.isdir(dialog_dir):
            dialog_dir = path
        for name in sorted(os.listdir(dialog_dir)):
            if name.endswith(".json"):
                with open(os.path.join(dialog_dir, name)) as f:
                    raw_dialogs.append((name[:-5], json.load(f)))
    else:
        with open(path) as f:
            doc = json.load(f)
        if isinstance(doc, list):
            raw_dialogs = [(str(d.get("DialogueID", i)), d) for i, d in enumerate(doc)]
        else:
            raw_dialogs = [(str(doc.get("DialogueID", "0")), doc)]

    dialogs: list[Dialog] = []
    skipped = 0
    for dialog_id, raw in raw_dialogs:
        converted = _convert_events(raw, dialog_id)
        if converted is None:
            skipped += 1
        else:
            dialogs.append(converted)
    corpus = Corpus(dialogs=tuple(dialogs))
    total_turns = sum(len(d.turns) for d in dialogs)
    system_turns = sum(
        1 for d in dialogs for t in d.turns if t.speaker is Speaker.SYSTEM
    )
    return corpus, ImportManifest(
        dialogs=len(dialogs),
        skipped=skipped,
        total_turns=total_turns,
        system_turns=system_turns,
    )
