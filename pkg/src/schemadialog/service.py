"""HTTP prediction service with session management.

Model and schemas are shared immutable state; each session is mutated
under its own lock, so concurrent posts to one session serialize and
history grows by exactly two turns per accepted post. The DB stub
attaches its canned result to the query system turn itself (not a
separate history entry); the context serializer expands it back into a
[DB] segment when predicting, which keeps the history-length invariant
while multi-step dialogs still see database output.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .corpus import Speaker, Turn
from .errors import UnknownSession, UnknownTask
from .model import BaselineModel, SamModel, predict
from .schema import NodeKind, SchemaGraph, dump_schema

API_ERROR_CODES = {
    "unknown_task": 404,
    "unknown_session": 404,
    "validation": 400,
    "model_error": 500,
}

API_SCHEMA_DIR = os.path.join(os.path.dirname(__file__), "api_schemas")


def load_api_schema(name: str) -> dict:
    """One of the machine-checkable response contracts shipped in-repo."""
    with open(os.path.join(API_SCHEMA_DIR, f"{name}.json")) as f:
        return json.load(f)


@dataclass
class SessionTurn:
    speaker: str
    text: str
    action: str | None = None
    db_result: str | None = None

    def to_dict(self) -> dict:
        out: dict = {"speaker": self.speaker, "text": self.text}
        if self.action is not None:
            out["action"] = self.action
        if self.db_result is not None:
            out["db_result"] = self.db_result
        return out


@dataclass
class Session:
    session_id: str
    task_id: str
    history: list[SessionTurn] = field(default_factory=list)
    created: float = 0.0
    updated: float = 0.0
    model_id: str = ""
    lock: threading.Lock = field(default_factory=threading.Lock)

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "task": self.task_id,
            "history": [t.to_dict() for t in self.history],
            "created": self.created,
            "updated": self.updated,
            "model_id": self.model_id,
        }


def default_db_hook(task_id: str, action: str) -> str:
    """Canned database row so multi-step dialogs can proceed."""
    return f"RESULT: the {task_id} record shows [DATA] ."


def expand_history(history: list[SessionTurn]) -> list[Turn]:
    """Session turns -> model turns, expanding attached DB results."""
    turns: list[Turn] = []
    for t in history:
        turns.append(Turn(Speaker(t.speaker), t.text, action=t.action))
        if t.db_result is not None:
            turns.append(Turn(Speaker.DB, t.db_result))
    return turns


class DialogService:
    """Shared immutable model/schemas plus a per-session-locked store."""

    def __init__(
        self,
        schemas: dict[str, SchemaGraph],
        model: SamModel | BaselineModel,
        model_id: str = "default",
        db_hook=default_db_hook,
        journal_path: str | None = None,
    ):
        self.schemas = dict(schemas)
        self.model = model
        self.model_id = model_id
        self.db_hook = db_hook
        self.journal_path = journal_path
        self.sessions: dict[str, Session] = {}
        self._store_lock = threading.Lock()
        self._query_actions: dict[str, set[str]] = {
            task: self._find_query_actions(graph) for task, graph in self.schemas.items()
        }

    @staticmethod
    def _find_query_actions(graph: SchemaGraph) -> set[str]:
        out: set[str] = set()
        for s, t in graph.edges:
            if graph.has_node(s) and graph.has_node(t):
                src, dst = graph.node(s), graph.node(t)
                if src.kind is NodeKind.SYSTEM and dst.kind is NodeKind.DB and src.action:
                    out.add(src.action)
        return out

    def _journal(self, record: dict) -> None:
        if self.journal_path:
            with open(self.journal_path, "a") as f:
                f.write(json.dumps(record, sort_keys=True) + "\n")

    def create_session(self, task_id: str) -> Session:
        if task_id not in self.schemas:
            raise UnknownTask(
                f"unknown task {task_id!r}; available: {sorted(self.schemas)}"
            )
        graph = self.schemas[task_id]
        now = time.time()
        session = Session(
            session_id=uuid.uuid4().hex,
            task_id=task_id,
            created=now,
            updated=now,
            model_id=self.model_id,
        )
        start = graph.node(graph.start)
        if start.kind is NodeKind.SYSTEM:
            session.history.append(
                SessionTurn(speaker="system", text=start.text, action=start.action)
            )
        with self._store_lock:
            self.sessions[session.session_id] = session
        self._journal({"event": "create", "session": session.session_id, "task": task_id})
        return session

    def get_session(self, session_id: str) -> Session:
        with self._store_lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"unknown session {session_id!r}")
        return session

    def predict_for(self, task_id: str, turns: list[Turn]) -> dict:
        if task_id not in self.schemas:
            raise UnknownTask(
                f"unknown task {task_id!r}; available: {sorted(self.schemas)}"
            )
        graph = self.schemas[task_id]
        t0 = time.time()
        ranked = predict(self.model, turns, graph)
        latency = time.time() - t0
        return {
            "ranked": [
                {"action": p.action, "probability": p.probability, "template": p.template}
                for p in ranked
            ],
            "alignments": [
                {"node_id": nid, "node_text": text, "mass": mass}
                for (nid, text, mass) in (ranked[0].alignments if ranked else ())
            ],
            "model_id": self.model_id,
            "latency": latency,
        }

    def post_utterance(self, session_id: str, text: str) -> dict:
        if not text or not text.strip():
            raise ValueError("utterance text must be non-empty")
        session = self.get_session(session_id)
        with session.lock:
            context = expand_history(session.history) + [Turn(Speaker.USER, text)]
            response = self.predict_for(session.task_id, context)
            top = response["ranked"][0]
            db_result = None
            if top["action"] in self._query_actions.get(session.task_id, set()):
                db_result = self.db_hook(session.task_id, top["action"])
            session.history.append(SessionTurn(speaker="user", text=text))
            session.history.append(
                SessionTurn(
                    speaker="system",
                    text=top["template"] or top["action"],
                    action=top["action"],
                    db_result=db_result,
                )
            )
            session.updated = time.time()
            response["session"] = session.to_dict()
        self._journal(
            {"event": "utterance", "session": session_id, "text": text, "action": top["action"]}
        )
        return response


def _error(code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=API_ERROR_CODES[code],
        content={"error": {"code": code, "message": message}},
    )


def create_app(service: DialogService) -> FastAPI:
    app = FastAPI(title="schemadialog", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.service = service

    @app.exception_handler(UnknownTask)
    async def _unknown_task(request: Request, exc: UnknownTask):
        return _error("unknown_task", str(exc))

    @app.exception_handler(UnknownSession)
    async def _unknown_session(request: Request, exc: UnknownSession):
        return _error("unknown_session", str(exc))

    @app.exception_handler(ValueError)
    async def _validation(request: Request, exc: ValueError):
        return _error("validation", str(exc))

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "tasks": len(service.schemas)}

    @app.get("/api/tasks")
    def tasks():
        return {
            "tasks": [
                {"task": g.task_id, "domain": g.domain_id}
                for g in sorted(service.schemas.values(), key=lambda g: g.task_id)
            ]
        }

    @app.get("/api/schema/{task}")
    def schema(task: str):
        if task not in service.schemas:
            return _error("unknown_task", f"unknown task {task!r}")
        return json.loads(dump_schema(service.schemas[task]))

    @app.post("/api/session")
    def create_session(body: dict):
        task = body.get("task")
        if not task:
            return _error("validation", "body must include 'task'")
        session = service.create_session(task)
        return session.to_dict()

    @app.get("/api/session/{session_id}")
    def get_session(session_id: str):
        return service.get_session(session_id).to_dict()

    @app.post("/api/session/{session_id}/utterance")
    def post_utterance(session_id: str, body: dict):
        text = body.get("text", "")
        if not isinstance(text, str) or not text.strip():
            return _error("validation", "utterance 'text' must be a non-empty string")
        return service.post_utterance(session_id, text)

    @app.post("/api/predict")
    def stateless_predict(body: dict):
        task = body.get("task")
        history = body.get("history", [])
        if not task:
            return _error("validation", "body must include 'task'")
        turns = []
        for item in history:
            try:
                turns.append(
                    Turn(Speaker(item["speaker"]), item["text"], action=item.get("action"))
                )
            except (KeyError, ValueError) as e:
                return _error("validation", f"bad history item: {e}")
        return service.predict_for(task, turns)

    return app


def service_from_env() -> DialogService:
    """Build a service from SDE_MODEL_DIR / SDE_SCHEMA_DIR."""
    from .model import load_model
    from .schema import load_schema, validate

    schema_dir = os.environ.get("SDE_SCHEMA_DIR", "schemas")
    model_dir = os.environ.get("SDE_MODEL_DIR", "models")
    schemas: dict[str, SchemaGraph] = {}
    for name in sorted(os.listdir(schema_dir)):
        if name.endswith(".json"):
            with open(os.path.join(schema_dir, name), "rb") as f:
                graph = load_schema(f.read())
            report = validate(graph)
            if not report.ok:
                raise ValueError(f"schema {name} invalid: {report.errors()[0].message}")
            schemas[graph.task_id] = graph
    model_path = os.path.join(model_dir, "model.ckpt")
    model = load_model(model_path)
    return DialogService(schemas=schemas, model=model, model_id=os.path.basename(model_path))
