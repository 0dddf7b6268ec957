"""HTTP service for interactive tutoring sessions.

The app holds one immutable engine snapshot plus an in-memory session
registry. Requests are handled concurrently; each session carries its
own lock so attempt histories only ever grow, one attempt at a time.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .config import EngineConfig
from .pipeline import MODES, ArtifactsMissing, FeedbackEngine


class SessionCreate(BaseModel):
    exercise_id: str
    mode: str = "full"


class AttemptCreate(BaseModel):
    text: str


@dataclass
class SessionState:
    session_id: str
    exercise_id: str
    mode: str
    attempts: list[dict] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def to_doc(self) -> dict:
        return {
            "session_id": self.session_id,
            "exercise_id": self.exercise_id,
            "mode": self.mode,
            "attempts": list(self.attempts),
        }


def create_app(config: EngineConfig | None = None, engine: FeedbackEngine | None = None) -> FastAPI:
    """Build the app; a missing artifact set leaves it serving 503s."""
    if engine is None and config is not None:
        try:
            engine = FeedbackEngine.load(config)
        except ArtifactsMissing:
            engine = None

    app = FastAPI(title="tutorgraph")
    sessions: dict[str, SessionState] = {}
    registry_lock = threading.Lock()

    def require_engine() -> FeedbackEngine:
        if engine is None:
            raise HTTPException(status_code=503, detail="artifacts not built")
        return engine

    def require_session(session_id: str) -> SessionState:
        with registry_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session: {session_id}")
        return session

    @app.get("/exercises")
    def list_exercises():
        eng = require_engine()
        return {
            "exercises": [
                {"id": entry["id"], "prompt": entry["prompt"]} for entry in eng.exercises
            ]
        }

    @app.get("/exercises/{exercise_id}")
    def get_exercise(exercise_id: str):
        eng = require_engine()
        for entry in eng.exercises:
            if entry["id"] == exercise_id:
                return dict(entry)
        raise HTTPException(status_code=404, detail=f"unknown exercise: {exercise_id}")

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionCreate):
        eng = require_engine()
        if body.exercise_id not in eng.graphs:
            raise HTTPException(status_code=404, detail=f"unknown exercise: {body.exercise_id}")
        if body.mode not in MODES:
            raise HTTPException(status_code=422, detail=f"unknown mode: {body.mode}")
        session = SessionState(
            session_id=uuid.uuid4().hex, exercise_id=body.exercise_id, mode=body.mode
        )
        with registry_lock:
            sessions[session.session_id] = session
        return {
            "session_id": session.session_id,
            "exercise_id": session.exercise_id,
            "mode": session.mode,
        }

    @app.post("/sessions/{session_id}/attempts")
    def submit_attempt(session_id: str, body: AttemptCreate):
        eng = require_engine()
        session = require_session(session_id)
        if not body.text.strip():
            raise HTTPException(status_code=422, detail="attempt text must be non-empty")
        with session.lock:
            outcome = eng.respond(session.exercise_id, body.text, session.mode)
            feedback = outcome.feedback_payload(eng.config.alpha)
            session.attempts.append({"text": body.text, "feedback": feedback})
        return feedback

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = require_session(session_id)
        with session.lock:
            return session.to_doc()

    return app
