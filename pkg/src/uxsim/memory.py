"""The agent's memory stream.

Append-only, shared by the fast loop (perceive/plan/act) and the slow
loop (wonder/reflect). Retrieval scores every piece on importance,
relevance, and recency with per-loop weights, so the fast loop leans on
what just happened while the slow loop pulls in what matters for the
goal.
"""

import json
import threading
import time
from dataclasses import asdict, dataclass

from .llm import cosine_similarity

KINDS = ("observation", "plan", "action", "reflection", "wonder", "error")

RECENCY_DECAY = 0.99  # per fast-loop step


@dataclass
class MemoryPiece:
    id: int
    kind: str
    text: str
    timestamp: float
    step: int
    importance: float
    embedding: tuple | None = None

    def validate(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown memory kind {self.kind!r}")
        if not self.text:
            raise ValueError("memory text must be non-empty")
        if not 0.0 <= self.importance <= 10.0:
            raise ValueError("importance must lie in [0, 10]")


@dataclass(frozen=True)
class RetrievalWeights:
    w_importance: float
    w_relevance: float
    w_recency: float

    def __post_init__(self):
        if min(self.w_importance, self.w_relevance, self.w_recency) < 0:
            raise ValueError("retrieval weights must be non-negative")
        if self.w_importance == self.w_relevance == self.w_recency == 0:
            raise ValueError("at least one retrieval weight must be positive")


FAST_WEIGHTS = RetrievalWeights(w_importance=1.0, w_relevance=1.0, w_recency=3.0)
SLOW_WEIGHTS = RetrievalWeights(w_importance=1.0, w_relevance=3.0, w_recency=1.0)

PROFILES = {"fast": FAST_WEIGHTS, "slow": SLOW_WEIGHTS}


class MemoryStream:
    """Ordered store of MemoryPieces for one session.

    embed_fn (text -> vector) supplies embeddings at append time; without
    one, relevance contributes 0 and a warning is recorded the first time
    it would have mattered.
    """

    def __init__(self, embed_fn=None, *, decay=RECENCY_DECAY, clock=time.time,
                 profiles=None):
        self.embed_fn = embed_fn
        self.decay = decay
        self.clock = clock
        self.profiles = dict(PROFILES)
        if profiles:
            self.profiles.update(profiles)
        self.warnings = []
        self._pieces = []
        self._lock = threading.Lock()

    def __len__(self):
        with self._lock:
            return len(self._pieces)

    def add(self, kind, text, step, importance, embedding=None):
        """Build a piece and append it; returns the stored piece."""
        piece = MemoryPiece(
            id=0, kind=kind, text=text, timestamp=0.0, step=step,
            importance=importance, embedding=embedding,
        )
        self.append(piece)
        return piece

    def append(self, piece):
        """Assign the next id and store the piece; returns the id."""
        if piece.embedding is None and self.embed_fn is not None:
            piece.embedding = tuple(self.embed_fn(piece.text))
        with self._lock:
            piece.id = len(self._pieces) + 1
            now = self.clock()
            if self._pieces and now < self._pieces[-1].timestamp:
                now = self._pieces[-1].timestamp
            if not piece.timestamp:
                piece.timestamp = now
            piece.validate()
            self._pieces.append(piece)
            return piece.id

    def score(self, piece, query_embedding, now_step, weights):
        """importance/10, cosine relevance, and decay^age, weighted."""
        total = weights.w_importance * (piece.importance / 10.0)
        if weights.w_relevance > 0:
            if piece.embedding is None or query_embedding is None:
                self._warn_once(
                    f"piece {piece.id} has no embedding; relevance treated as 0")
            else:
                total += weights.w_relevance * cosine_similarity(
                    piece.embedding, query_embedding)
        age = max(now_step - piece.step, 0)
        total += weights.w_recency * (self.decay ** age)
        return total

    def _warn_once(self, message):
        if message not in self.warnings:
            self.warnings.append(message)

    def retrieve(self, query_text, loop_profile, k, now_step=None):
        """Top-k pieces by score; ties go to the larger (newer) id."""
        weights = self.profiles[loop_profile] \
            if isinstance(loop_profile, str) else loop_profile
        if k <= 0:
            return []
        with self._lock:
            pieces = list(self._pieces)
        if not pieces:
            return []
        if now_step is None:
            now_step = max(p.step for p in pieces)
        query_embedding = None
        if weights.w_relevance > 0 and self.embed_fn is not None:
            query_embedding = tuple(self.embed_fn(query_text))
        ranked = sorted(
            pieces,
            key=lambda p: (self.score(p, query_embedding, now_step, weights), p.id),
            reverse=True,
        )
        return ranked[:k]

    def export_trace(self):
        """Every piece, id order; a read-only copy."""
        with self._lock:
            return list(self._pieces)

    # -- persistence ----------------------------------------------------

    def save(self, path):
        with self._lock:
            pieces = list(self._pieces)
        with open(path, "w", encoding="utf-8") as fh:
            for piece in pieces:
                record = asdict(piece)
                record["embedding"] = (
                    list(piece.embedding) if piece.embedding is not None else None
                )
                fh.write(json.dumps(record, ensure_ascii=True) + "\n")

    @classmethod
    def load(cls, path, embed_fn=None, **kwargs):
        stream = cls(embed_fn=embed_fn, **kwargs)
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                data = json.loads(line)
                if data.get("embedding") is not None:
                    data["embedding"] = tuple(data["embedding"])
                piece = MemoryPiece(**data)
                piece.validate()
                stream._pieces.append(piece)
        return stream
