"""Run batches of persona sessions, persist records, export traces, aggregate.

Layout on disk: ``out_dir/batch_id/session_id/`` holds ``record.json``
(everything but the memory stream), ``memory.jsonl`` (one memory piece
per line), and ``step_*.png`` screenshots; ``out_dir/batch_id/index.json``
lists the sessions. Money is serialized as decimal strings throughout.

Trace exports reproduce the session as plain text: the action trace is
one "Action {k}: {kind}, description: {description}" line per executed
action; the memory trace renders each memory piece relative to the
action it preceded ("Before action {k}, I saw/thought: ...") or recorded
("For action {k}, I will: ...").
"""

import json
import logging
import traceback
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import Decimal
from pathlib import Path

from .agent import Agent, AgentConfig, SessionOutcome
from .browser import ActionResult, AgentAction, BrowserSession
from .memory import FAST_WEIGHTS, SLOW_WEIGHTS, MemoryStream
from .personas import DEFAULT_INCOME_BINS, Persona, income_bin_label

log = logging.getLogger(__name__)


def _now():
    return datetime.now(timezone.utc).isoformat()


@dataclass
class SessionRecord:
    """Everything one simulated session produced."""

    session_id: str
    persona: Persona
    config: dict
    actions: list            # [(AgentAction, ActionResult), ...]
    memories: list           # ordered MemoryPiece list
    screenshots: list        # file names relative to the session directory
    outcome: SessionOutcome
    started: str
    ended: str

    def to_dict(self):
        return {
            "session_id": self.session_id,
            "persona": self.persona.to_dict(),
            "config": dict(self.config),
            "actions": [
                {
                    "kind": action.kind,
                    "target": action.target,
                    "text": action.text,
                    "description": action.description,
                    "result": {
                        "ok": result.ok,
                        "error_message": result.error_message,
                        "resulting_url": result.resulting_url,
                    },
                }
                for action, result in self.actions
            ],
            "screenshots": list(self.screenshots),
            "outcome": self.outcome.to_dict(),
            "started": self.started,
            "ended": self.ended,
        }

    @classmethod
    def from_dict(cls, data, memories=None):
        actions = []
        for entry in data.get("actions", ()):
            result = entry.get("result", {})
            actions.append((
                AgentAction(
                    kind=entry["kind"],
                    target=entry.get("target"),
                    text=entry.get("text"),
                    description=entry.get("description", ""),
                ),
                ActionResult(
                    ok=bool(result.get("ok")),
                    error_message=result.get("error_message"),
                    resulting_url=result.get("resulting_url", ""),
                ),
            ))
        return cls(
            session_id=data["session_id"],
            persona=Persona.from_dict(data["persona"]),
            config=dict(data.get("config", {})),
            actions=actions,
            memories=list(memories or ()),
            screenshots=list(data.get("screenshots", ())),
            outcome=SessionOutcome.from_dict(data["outcome"]),
            started=data.get("started", ""),
            ended=data.get("ended", ""),
        )

    # -- persistence ---------------------------------------------------

    def save(self, session_dir):
        session_dir = Path(session_dir)
        session_dir.mkdir(parents=True, exist_ok=True)
        (session_dir / "record.json").write_text(
            json.dumps(self.to_dict(), indent=2, ensure_ascii=True) + "\n",
            encoding="utf-8")
        stream = MemoryStream()
        for piece in self.memories:
            stream.append(piece)
        stream.save(session_dir / "memory.jsonl")
        return session_dir

    @classmethod
    def load(cls, session_dir):
        session_dir = Path(session_dir)
        data = json.loads((session_dir / "record.json").read_text("utf-8"))
        memories = []
        memory_path = session_dir / "memory.jsonl"
        if memory_path.exists():
            memories = MemoryStream.load(memory_path).export_trace()
        return cls.from_dict(data, memories=memories)


# -- trace export -------------------------------------------------------


def export_action_trace(record):
    """One "Action {k}: ..." line per executed action."""
    lines = [
        f"Action {k}: {action.kind}, description: {action.description}"
        for k, (action, _) in enumerate(record.actions, start=1)
    ]
    return "\n".join(lines) + ("\n" if lines else "")


_MEMORY_LINE_FORMATS = {
    "action": "For action {k}, I will: {text}",
    "observation": "Before action {k}, I saw: {text}",
}
_DEFAULT_MEMORY_LINE = "Before action {k}, I thought: {text}"


def memory_trace_line(piece):
    """One trace line tying a memory to the action it surrounds."""
    template = _MEMORY_LINE_FORMATS.get(piece.kind, _DEFAULT_MEMORY_LINE)
    return template.format(k=piece.step, text=piece.text)


def export_memory_trace(record):
    """Render each memory as one line anchored to its surrounding action."""
    lines = [memory_trace_line(piece) for piece in record.memories]
    return "\n".join(lines) + ("\n" if lines else "")


# -- batch running ---------------------------------------------------------


@dataclass
class BatchResult:
    batch_id: str
    out_dir: Path
    records: list = field(default_factory=list)

    @property
    def batch_dir(self):
        return Path(self.out_dir) / self.batch_id

    @property
    def index_path(self):
        return self.batch_dir / "index.json"


def run_batch(personas, *, endpoint, target_url, recipe, gateway,
              out_dir, batch_id=None, parallelism=1, agent_options=None):
    """One session per persona; failures become error outcomes, not aborts."""
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    batch_id = batch_id or f"batch_{uuid.uuid4().hex[:8]}"
    out_dir = Path(out_dir)
    batch_dir = out_dir / batch_id
    batch_dir.mkdir(parents=True, exist_ok=True)
    agent_options = dict(agent_options or {})

    def _run_one(index, persona):
        session_id = f"session_{index:04d}"
        session_dir = batch_dir / session_id
        started = _now()
        config = AgentConfig(
            persona=persona,
            intent=persona.intent or agent_options.get("intent", "buy a jacket"),
            max_steps=int(agent_options.get("max_steps", 40)),
            slow_loop_every=int(agent_options.get("slow_loop_every", 3)),
            retrieval_k=int(agent_options.get("retrieval_k", 10)),
            slow_loop_mode=agent_options.get("slow_loop_mode", "sync"),
            fast_weights=agent_options.get("fast_weights", FAST_WEIGHTS),
            slow_weights=agent_options.get("slow_weights", SLOW_WEIGHTS),
        )
        agent = Agent(config, gateway)
        try:
            browser = BrowserSession(endpoint, recipe,
                                     screenshot_dir=session_dir)
            actions, screenshots, outcome = agent.run_session(browser, target_url)
        except Exception as exc:  # noqa: BLE001 - worker boundary
            log.error("session %s crashed: %s\n%s", session_id, exc,
                      traceback.format_exc())
            actions, screenshots = [], []
            outcome = SessionOutcome(kind="error", detail=str(exc)).validate()
        record = SessionRecord(
            session_id=session_id,
            persona=persona,
            config={
                "intent": config.intent,
                "max_steps": config.max_steps,
                "slow_loop_every": config.slow_loop_every,
                "retrieval_k": config.retrieval_k,
                "slow_loop_mode": config.slow_loop_mode,
            },
            actions=actions,
            memories=agent.memory.export_trace(),
            screenshots=[Path(path).name for path in screenshots],
            outcome=outcome,
            started=started,
            ended=_now(),
        )
        record.save(session_dir)
        return record

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        records = list(pool.map(
            lambda pair: _run_one(*pair),
            enumerate(personas, start=1),
        ))

    write_batch_index(batch_dir, batch_id, target_url, records)
    return BatchResult(batch_id=batch_id, out_dir=out_dir, records=records)


def write_batch_index(batch_dir, batch_id, target_url, records):
    """Write index.json summarizing the batch's session records."""
    index = {
        "batch_id": batch_id,
        "target_url": target_url,
        "created": _now(),
        "sessions": [
            {
                "session_id": record.session_id,
                "persona_name": record.persona.name,
                "gender": record.persona.gender,
                "income": record.persona.income,
                "age": record.persona.age,
                "outcome": record.outcome.kind,
                "actions": len(record.actions),
            }
            for record in records
        ],
    }
    (Path(batch_dir) / "index.json").write_text(
        json.dumps(index, indent=2, ensure_ascii=True) + "\n", encoding="utf-8")
    return index


def load_batch(batch_dir):
    """Load a batch (index plus every session record) back from disk."""
    batch_dir = Path(batch_dir)
    index = json.loads((batch_dir / "index.json").read_text("utf-8"))
    records = [SessionRecord.load(batch_dir / entry["session_id"])
               for entry in index["sessions"]]
    return BatchResult(
        batch_id=index["batch_id"],
        out_dir=batch_dir.parent,
        records=tuple(records),
    )


# -- aggregates ----------------------------------------------------------------


@dataclass(frozen=True)
class AggregateRow:
    """Purchase behavior for one demographic group."""

    group: str
    count: int
    purchase_rate: float | None
    mean_total: Decimal | None
    mean_actions: float | None

    def to_dict(self):
        return {
            "group": self.group,
            "count": self.count,
            "purchase_rate": self.purchase_rate,
            "mean_total": str(self.mean_total)
            if self.mean_total is not None else None,
            "mean_actions": self.mean_actions,
        }


def _group_label(record, group_by, income_bins):
    if group_by == "gender":
        return record.persona.gender
    if group_by == "income_bin":
        income = record.persona.income
        for low, high in income_bins:
            if income >= low and (high is None or income < high):
                return income_bin_label(low, high)
        return income_bin_label(*income_bins[-1])
    raise ValueError(f"unknown group_by {group_by!r}")


def aggregate_stats(records, group_by, income_bins=DEFAULT_INCOME_BINS):
    """Exact per-group means; zero-session groups appear with null means."""
    if group_by == "income_bin":
        labels = [income_bin_label(low, high) for low, high in income_bins]
    else:
        labels = sorted({record.persona.gender for record in records})
    buckets = {label: [] for label in labels}
    for record in records:
        buckets[_group_label(record, group_by, income_bins)].append(record)

    rows = []
    for label in labels:
        group = buckets[label]
        if not group:
            rows.append(AggregateRow(group=label, count=0, purchase_rate=None,
                                     mean_total=None, mean_actions=None))
            continue
        purchased = [r for r in group if r.outcome.kind == "purchased"]
        mean_total = None
        if purchased:
            mean_total = (
                sum(Decimal(r.outcome.total) for r in purchased)
                / Decimal(len(purchased))
            )
        rows.append(AggregateRow(
            group=label,
            count=len(group),
            purchase_rate=len(purchased) / len(group),
            mean_total=mean_total,
            mean_actions=sum(len(r.actions) for r in group) / len(group),
        ))
    return rows
