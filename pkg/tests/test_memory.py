"""Tests for the memory stream: append, scoring, retrieval, persistence."""

import random
import threading

import pytest
from hypothesis import given, strategies as st

from uxsim.llm import hash_embedding
from uxsim.memory import (
    FAST_WEIGHTS,
    SLOW_WEIGHTS,
    MemoryPiece,
    MemoryStream,
    RetrievalWeights,
)

VOCAB = (
    "jacket coat search cart price review delivery checkout blue navy "
    "size medium warm winter shipping free stars product page button"
).split()


def brute_force_top_k(pieces, query_vec, now_step, weights, k, decay=0.99):
    """Independent reference ranking used as the retrieval oracle."""

    def score(piece):
        total = weights.w_importance * (piece.importance / 10.0)
        if weights.w_relevance > 0 and piece.embedding and query_vec:
            dot = sum(a * b for a, b in zip(piece.embedding, query_vec))
            na = sum(a * a for a in piece.embedding) ** 0.5
            nb = sum(b * b for b in query_vec) ** 0.5
            if na and nb:
                total += weights.w_relevance * (dot / (na * nb))
        total += weights.w_recency * (decay ** max(now_step - piece.step, 0))
        return total

    ranked = sorted(pieces, key=lambda p: (score(p), p.id), reverse=True)
    return ranked[:k]


def filled_stream(n, seed=0):
    rng = random.Random(seed)
    stream = MemoryStream(embed_fn=hash_embedding)
    for i in range(n):
        text = " ".join(rng.choices(VOCAB, k=rng.randint(2, 8)))
        stream.add(
            kind=rng.choice(("observation", "plan", "action", "reflection", "wonder")),
            text=text,
            step=rng.randint(0, 40),
            importance=rng.randint(0, 10),
        )
    return stream


# -- append -------------------------------------------------------------


def test_append_assigns_dense_increasing_ids():
    stream = MemoryStream()
    ids = [stream.add("observation", f"piece {i}", step=i, importance=5).id
           for i in range(3)]
    assert ids == [1, 2, 3]
    trace = stream.export_trace()
    assert [p.id for p in trace] == [1, 2, 3]
    assert all(a.timestamp <= b.timestamp for a, b in zip(trace, trace[1:]))


def test_append_validates_pieces():
    stream = MemoryStream()
    with pytest.raises(ValueError):
        stream.add("daydream", "x", step=0, importance=5)
    with pytest.raises(ValueError):
        stream.add("plan", "", step=0, importance=5)
    with pytest.raises(ValueError):
        stream.add("plan", "x", step=0, importance=11)


def test_concurrent_appends_stay_dense():
    stream = MemoryStream()

    def worker(tag):
        for i in range(100):
            stream.add("observation", f"{tag}:{i}", step=0, importance=1)

    threads = [threading.Thread(target=worker, args=(t,)) for t in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    ids = [p.id for p in stream.export_trace()]
    assert ids == list(range(1, 401))


def test_embeddings_attached_on_append():
    stream = MemoryStream(embed_fn=hash_embedding)
    piece = stream.add("observation", "a navy jacket", step=0, importance=5)
    assert piece.embedding == hash_embedding("a navy jacket")


# -- scoring ------------------------------------------------------------


def test_pure_recency_prefers_newest():
    stream = MemoryStream()
    weights = RetrievalWeights(0, 0, 1)
    old = stream.add("observation", "old", step=0, importance=10)
    new = stream.add("observation", "new", step=10, importance=0)
    assert stream.score(new, None, 10, weights) > stream.score(old, None, 10, weights)


def test_pure_importance_normalizes_to_one():
    stream = MemoryStream()
    piece = stream.add("plan", "vital", step=0, importance=10)
    assert stream.score(piece, None, 0, RetrievalWeights(1, 0, 0)) == pytest.approx(1.0)


def test_missing_embedding_warns_and_counts_zero():
    stream = MemoryStream()  # no embed_fn
    piece = stream.add("plan", "text", step=0, importance=0)
    score = stream.score(piece, None, 0, RetrievalWeights(0, 1, 0))
    assert score == 0.0
    assert stream.warnings


def test_scoring_ordering_matches_oracle_small():
    stream = filled_stream(20, seed=7)
    weights = RetrievalWeights(1, 1, 1)
    query = hash_embedding("jacket")
    pieces = stream.export_trace()
    got = stream.retrieve("jacket", weights, k=len(pieces), now_step=40)
    expected = brute_force_top_k(pieces, query, 40, weights, len(pieces))
    assert [p.id for p in got] == [p.id for p in expected]


# -- retrieval ----------------------------------------------------------


def test_retrieve_k_zero_and_oversized():
    stream = filled_stream(5)
    assert stream.retrieve("anything", "fast", k=0) == []
    assert len(stream.retrieve("anything", "fast", k=50)) == 5


def test_retrieve_matches_brute_force_both_profiles():
    stream = filled_stream(100, seed=123)
    pieces = stream.export_trace()
    query = "warm jacket"
    for weights in (FAST_WEIGHTS, SLOW_WEIGHTS):
        got = stream.retrieve(query, weights, k=10, now_step=40)
        expected = brute_force_top_k(
            pieces, hash_embedding(query), 40, weights, 10)
        assert [p.id for p in got] == [p.id for p in expected]


def test_pure_recency_profile_returns_descending_ids():
    stream = MemoryStream()
    for i in range(30):
        stream.add("observation", f"step note {i}", step=i, importance=i % 11)
    got = stream.retrieve("x", RetrievalWeights(0, 0, 1), k=30, now_step=29)
    assert [p.id for p in got] == list(range(30, 0, -1))


def test_ties_break_toward_larger_id():
    stream = MemoryStream()
    for _ in range(4):
        stream.add("observation", "identical", step=3, importance=5)
    got = stream.retrieve("anything", RetrievalWeights(1, 0, 1), k=2, now_step=3)
    assert [p.id for p in got] == [4, 3]


def test_fast_profile_recent_pieces_dominate_stale_relevance():
    stream = MemoryStream(embed_fn=hash_embedding)
    stale = stream.add("observation", "navy jacket on sale", step=0, importance=10)
    for i in range(1, 4):
        stream.add("action", f"clicked something {i}", step=200 + i, importance=5)
    got = stream.retrieve("navy jacket", "fast", k=3, now_step=203)
    assert stale.id not in [p.id for p in got]


def test_slow_profile_prefers_relevant_pieces():
    stream = MemoryStream(embed_fn=hash_embedding)
    stream.add("observation", "the checkout page shows a total", step=10, importance=5)
    match = stream.add("observation", "a warm jacket in navy", step=1, importance=5)
    stream.add("wonder", "are there discounts today", step=10, importance=5)
    got = stream.retrieve("jacket navy warm", "slow", k=1, now_step=10)
    assert got[0].id == match.id


@given(st.integers(0, 2**32 - 1), st.integers(1, 20))
def test_retrieval_equals_oracle_property(seed, k):
    stream = filled_stream(25, seed=seed)
    pieces = stream.export_trace()
    for weights in (FAST_WEIGHTS, SLOW_WEIGHTS):
        got = stream.retrieve("jacket price", weights, k=k, now_step=40)
        expected = brute_force_top_k(
            pieces, hash_embedding("jacket price"), 40, weights, k)
        assert [p.id for p in got] == [p.id for p in expected]


# -- weights ------------------------------------------------------------


def test_weights_validation():
    with pytest.raises(ValueError):
        RetrievalWeights(-1, 0, 1)
    with pytest.raises(ValueError):
        RetrievalWeights(0, 0, 0)
    assert FAST_WEIGHTS.w_recency > FAST_WEIGHTS.w_relevance
    assert SLOW_WEIGHTS.w_relevance > SLOW_WEIGHTS.w_recency


# -- trace export and persistence ---------------------------------------


def test_export_trace_preserves_interleaving():
    stream = MemoryStream()
    kinds = ["observation", "plan", "action", "wonder", "action", "reflection"]
    for i, kind in enumerate(kinds):
        stream.add(kind, f"{kind} {i}", step=i // 2, importance=3)
    assert [p.kind for p in stream.export_trace()] == kinds


def test_export_is_a_copy():
    stream = MemoryStream()
    stream.add("plan", "x", step=0, importance=1)
    trace = stream.export_trace()
    trace.clear()
    assert len(stream.export_trace()) == 1


def test_jsonl_round_trip(tmp_path):
    stream = filled_stream(10, seed=3)
    path = tmp_path / "memory.jsonl"
    stream.save(str(path))
    loaded = MemoryStream.load(str(path))
    assert loaded.export_trace() == stream.export_trace()
    assert path.read_text().count("\n") == 10
