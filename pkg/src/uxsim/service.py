"""HTTP service over one batch directory: results exploration + interviews.

Read endpoints are stateless views over the on-disk batch (restarting the
service loses nothing). The only state held in memory is the set of open
interviews, each guarded by its own lock.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, StreamingResponse
from pydantic import BaseModel

from . import prompts
from .llm import CompletionRequest, GatewayError
from .orchestrator import (
    SessionRecord,
    aggregate_stats,
    export_action_trace,
    export_memory_trace,
    memory_trace_line,
)
from .personas import DEFAULT_INCOME_BINS, income_bin_label

DEFAULT_IMPORTANCE_THRESHOLD = 3
DEFAULT_MEMORY_BUDGET = 50
STREAM_CHUNK_WORDS = 8
UNSUPPORTED_IMAGE_ERROR = {
    "error": "unsupported_feature",
    "message": "image input is not supported; ask your question as text",
}


def _income_label(income):
    for low, high in DEFAULT_INCOME_BINS:
        if income >= low and (high is None or income < high):
            return income_bin_label(low, high)
    return income_bin_label(*DEFAULT_INCOME_BINS[-1])


# -- wire models -----------------------------------------------------------------


class SessionSummary(BaseModel):
    session_id: str
    persona_name: str
    age: int
    gender: str
    income: int
    income_bin: str
    outcome: str
    actions: int


class SessionList(BaseModel):
    total: int
    sessions: list[SessionSummary]


class OutcomeView(BaseModel):
    kind: str
    items: list[tuple[str, str]]
    total: str | None
    detail: str | None


class ActionView(BaseModel):
    index: int
    kind: str
    target: str | None
    text: str | None
    description: str
    ok: bool
    error_message: str | None
    resulting_url: str


class SessionDetail(BaseModel):
    session_id: str
    persona: dict
    config: dict
    outcome: OutcomeView
    actions: list[ActionView]
    screenshot_urls: list[str]
    started: str
    ended: str


class ActionTrace(BaseModel):
    session_id: str
    actions: list[ActionView]
    trace: str


class MemoryView(BaseModel):
    id: int
    kind: str
    step: int
    importance: int
    text: str
    line: str


class MemoryTrace(BaseModel):
    session_id: str
    memories: list[MemoryView]
    trace: str


class StatRow(BaseModel):
    group: str
    count: int
    purchase_rate: float | None
    mean_total: str | None
    mean_actions: float | None


class StatsReply(BaseModel):
    group_by: str
    rows: list[StatRow]


class InterviewRequest(BaseModel):
    session_id: str


class InterviewInfo(BaseModel):
    interview_id: str
    session_id: str
    persona_name: str
    memory_count: int
    turns: list[tuple[str, str]]


class MessageRequest(BaseModel):
    text: str = ""
    image: str | None = None


# -- disk-backed session store -----------------------------------------------------


class SessionStore:
    """Read-only view over one batch directory."""

    def __init__(self, batch_dir):
        self.batch_dir = Path(batch_dir)
        if not (self.batch_dir / "index.json").exists():
            raise FileNotFoundError(
                f"not a batch directory (no index.json): {self.batch_dir}")

    def index(self):
        return json.loads((self.batch_dir / "index.json").read_text("utf-8"))

    def summaries(self):
        entries = []
        for entry in self.index()["sessions"]:
            entries.append(SessionSummary(
                session_id=entry["session_id"],
                persona_name=entry["persona_name"],
                age=entry["age"],
                gender=entry["gender"],
                income=entry["income"],
                income_bin=_income_label(entry["income"]),
                outcome=entry["outcome"],
                actions=entry["actions"],
            ))
        return entries

    def record(self, session_id):
        session_dir = self.batch_dir / session_id
        if not (session_dir / "record.json").exists():
            raise KeyError(session_id)
        return SessionRecord.load(session_dir)

    def records(self):
        return [self.record(entry["session_id"])
                for entry in self.index()["sessions"]]

    def screenshot_path(self, session_id, step):
        record = self.record(session_id)
        name = f"step_{step}.png"
        if name not in record.screenshots:
            raise KeyError(name)
        return self.batch_dir / session_id / name


# -- interviews --------------------------------------------------------------------


@dataclass
class Interview:
    """One researcher-participant conversation grounded in a session."""

    interview_id: str
    session_id: str
    persona: object
    condensed_memories: tuple
    history: list = field(default_factory=list)  # [(speaker, text), ...]
    lock: threading.Lock = field(default_factory=threading.Lock)

    def system_prompt(self):
        memories = "\n".join(f"- {line}" for line in self.condensed_memories)
        return prompts.render(
            "interview",
            persona_name=self.persona.name,
            persona=self.persona.describe(),
            memories=memories or "- (nothing stood out)",
        )


class InterviewManager:
    """Holds open interviews; the only mutable state in the service."""

    def __init__(self, store, gateway, *,
                 importance_threshold=DEFAULT_IMPORTANCE_THRESHOLD,
                 memory_budget=DEFAULT_MEMORY_BUDGET):
        self.store = store
        self.gateway = gateway
        self.importance_threshold = importance_threshold
        self.memory_budget = memory_budget
        self._interviews = {}
        self._lock = threading.Lock()

    def start(self, session_id):
        record = self.store.record(session_id)  # KeyError -> 404 upstream
        kept = [piece for piece in record.memories
                if piece.importance >= self.importance_threshold]
        kept = kept[-self.memory_budget:]  # budget: most recent survive
        interview = Interview(
            interview_id=f"itv_{uuid.uuid4().hex[:12]}",
            session_id=session_id,
            persona=record.persona,
            condensed_memories=tuple(memory_trace_line(p) for p in kept),
        )
        with self._lock:
            self._interviews[interview.interview_id] = interview
        return interview

    def get(self, interview_id):
        with self._lock:
            return self._interviews[interview_id]  # KeyError -> 404 upstream

    def exchange(self, interview_id, text):
        """Append the researcher turn, ask the model, append the reply.

        Gateway failures become an error turn; the interview stays usable.
        """
        interview = self.get(interview_id)
        with interview.lock:
            messages = [("user" if speaker == "researcher" else "assistant",
                         turn) for speaker, turn in interview.history]
            messages.append(("user", text))
            interview.history.append(("researcher", text))
            try:
                reply = self.gateway.complete(CompletionRequest(
                    system=interview.system_prompt(),
                    messages=tuple(messages),
                ))
                failed = False
            except GatewayError as exc:
                reply = f"(The participant could not answer: {exc})"
                failed = True
            interview.history.append(("agent", reply))
        return reply, failed


def _ndjson_chunks(reply, failed):
    words = reply.split(" ")
    for start in range(0, len(words), STREAM_CHUNK_WORDS):
        chunk = " ".join(words[start:start + STREAM_CHUNK_WORDS])
        if start + STREAM_CHUNK_WORDS < len(words):
            chunk += " "
        yield json.dumps({"chunk": chunk}, ensure_ascii=True) + "\n"
    yield json.dumps({"done": True, "reply": reply, "error": failed},
                     ensure_ascii=True) + "\n"


# -- application -------------------------------------------------------------------


def create_app(batch_dir, gateway, *,
               importance_threshold=DEFAULT_IMPORTANCE_THRESHOLD,
               memory_budget=DEFAULT_MEMORY_BUDGET):
    """Build the FastAPI app serving one batch directory."""
    store = SessionStore(batch_dir)
    interviews = InterviewManager(
        store, gateway,
        importance_threshold=importance_threshold,
        memory_budget=memory_budget,
    )
    app = FastAPI(title="uxsim result service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store
    app.state.interviews = interviews

    def load_record(session_id):
        try:
            return store.record(session_id)
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"unknown session: {session_id}")

    def action_views(record):
        return [
            ActionView(
                index=k,
                kind=action.kind,
                target=action.target,
                text=action.text,
                description=action.description,
                ok=result.ok,
                error_message=result.error_message,
                resulting_url=result.resulting_url,
            )
            for k, (action, result) in enumerate(record.actions, start=1)
        ]

    @app.get("/sessions", response_model=SessionList)
    def list_sessions(offset: int = Query(0, ge=0),
                      limit: int | None = Query(None, ge=1)):
        summaries = store.summaries()
        window = summaries[offset:]
        if limit is not None:
            window = window[:limit]
        return SessionList(total=len(summaries), sessions=window)

    @app.get("/sessions/{session_id}", response_model=SessionDetail)
    def get_session(session_id: str):
        record = load_record(session_id)
        steps = range(1, len(record.screenshots) + 1)
        return SessionDetail(
            session_id=record.session_id,
            persona=record.persona.to_dict(),
            config=record.config,
            outcome=OutcomeView(**record.outcome.to_dict()),
            actions=action_views(record),
            screenshot_urls=[f"/sessions/{session_id}/screenshots/{k}"
                             for k in steps],
            started=record.started,
            ended=record.ended,
        )

    @app.get("/sessions/{session_id}/actions", response_model=ActionTrace)
    def get_actions(session_id: str):
        record = load_record(session_id)
        return ActionTrace(
            session_id=session_id,
            actions=action_views(record),
            trace=export_action_trace(record),
        )

    @app.get("/sessions/{session_id}/memories", response_model=MemoryTrace)
    def get_memories(session_id: str):
        record = load_record(session_id)
        return MemoryTrace(
            session_id=session_id,
            memories=[
                MemoryView(
                    id=piece.id, kind=piece.kind, step=piece.step,
                    importance=piece.importance, text=piece.text,
                    line=memory_trace_line(piece),
                )
                for piece in record.memories
            ],
            trace=export_memory_trace(record),
        )

    @app.get("/sessions/{session_id}/screenshots/{step}")
    def get_screenshot(session_id: str, step: int):
        load_record(session_id)
        try:
            path = store.screenshot_path(session_id, step)
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"no screenshot for step {step}")
        return FileResponse(path, media_type="image/png")

    @app.get("/stats", response_model=StatsReply)
    def get_stats(group_by: str = Query("income_bin")):
        try:
            rows = aggregate_stats(store.records(), group_by)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return StatsReply(
            group_by=group_by,
            rows=[
                StatRow(
                    group=row.group,
                    count=row.count,
                    purchase_rate=row.purchase_rate,
                    mean_total=(str(row.mean_total)
                                if row.mean_total is not None else None),
                    mean_actions=row.mean_actions,
                )
                for row in rows
            ],
        )

    def interview_info(interview):
        return InterviewInfo(
            interview_id=interview.interview_id,
            session_id=interview.session_id,
            persona_name=interview.persona.name,
            memory_count=len(interview.condensed_memories),
            turns=list(interview.history),
        )

    @app.post("/interviews", response_model=InterviewInfo, status_code=201)
    def start_interview(request: InterviewRequest):
        try:
            interview = interviews.start(request.session_id)
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"unknown session: {request.session_id}")
        return interview_info(interview)

    @app.get("/interviews/{interview_id}", response_model=InterviewInfo)
    def get_interview(interview_id: str):
        try:
            return interview_info(interviews.get(interview_id))
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"unknown interview: {interview_id}")

    @app.post("/interviews/{interview_id}/messages")
    def send_message(interview_id: str, request: MessageRequest):
        if request.image is not None:
            raise HTTPException(status_code=400,
                                detail=UNSUPPORTED_IMAGE_ERROR)
        if not request.text.strip():
            raise HTTPException(status_code=422,
                                detail="text must be non-empty")
        try:
            reply, failed = interviews.exchange(interview_id, request.text)
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"unknown interview: {interview_id}")
        return StreamingResponse(_ndjson_chunks(reply, failed),
                                 media_type="application/x-ndjson")

    return app
