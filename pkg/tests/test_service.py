"""REST service: session exploration, stats, and interview endpoints."""

import json

import pytest
from fastapi.testclient import TestClient
from PIL import Image

from uxsim.agent import SessionOutcome
from uxsim.browser import ActionResult, AgentAction
from uxsim.llm import LLMGateway, ScriptedStub, StubRule
from uxsim.memory import MemoryPiece
from uxsim.orchestrator import (
    SessionRecord,
    aggregate_stats,
    export_action_trace,
    load_batch,
    write_batch_index,
)
from uxsim.personas import Persona
from uxsim.service import create_app

ADD_TO_CART = ("Clicking on the 'Add to Cart' button to add the chosen "
               "product to the cart.")
LOW_IMPORTANCE_TEXT = "A banner ad blinked in the corner."
INTERVIEW_REPLY = ("I chose the navy fleece because it stayed under my "
                   "budget and looked warm enough for winter.")


def _piece(id, kind, text, step, importance):
    return MemoryPiece(id=id, kind=kind, text=text, timestamp=float(id),
                       step=step, importance=importance)


def _persona(name, gender, income):
    return Persona(name=name, age=34, gender=gender, income=income,
                   intent="buy a jacket", background=f"{name} shops online.")


def _record(session_id, persona, outcome, actions, memories, screenshots):
    return SessionRecord(
        session_id=session_id, persona=persona, config={"max_steps": 40},
        actions=actions, memories=memories, screenshots=screenshots,
        outcome=outcome, started="2026-08-25T10:00:00+00:00",
        ended="2026-08-25T10:01:00+00:00",
    )


@pytest.fixture(scope="module")
def batch_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("service") / "batch_0001"
    records = [
        _record(
            "session_0001", _persona("Maria Alvarez", "female", 45000),
            SessionOutcome(kind="purchased",
                           items=(("Fleece Jacket (Navy, Medium)", "39.99"),),
                           total="39.99"),
            actions=[
                (AgentAction("type_and_submit", target="header.search_input",
                             text="woman's jacket",
                             description="Searching for a jacket."),
                 ActionResult(ok=True, resulting_url="http://shop.test/s")),
                (AgentAction("click", target="product.add_to_cart",
                             description=ADD_TO_CART),
                 ActionResult(ok=True, resulting_url="http://shop.test/c")),
            ],
            memories=[
                _piece(1, "observation", "The search box sits at the top.",
                       1, 5),
                _piece(2, "observation", LOW_IMPORTANCE_TEXT, 1, 2),
                _piece(3, "action", ADD_TO_CART, 2, 5),
                _piece(4, "reflection", "The jacket fit my budget.", 3, 7),
            ],
            screenshots=["step_1.png", "step_2.png"],
        ),
        _record(
            "session_0002", _persona("Dev Patel", "male", 160000),
            SessionOutcome(kind="terminated"),
            actions=[(AgentAction("back", description="Going back."),
                      ActionResult(ok=True))],
            memories=[_piece(1, "plan", "Nothing here fits me.", 1, 5)],
            screenshots=["step_1.png"],
        ),
        _record(
            "session_0003", _persona("Ann Lowe", "female", 20000),
            SessionOutcome(kind="error", detail="boom"),
            actions=[], memories=[], screenshots=[],
        ),
    ]
    for record in records:
        session_dir = root / record.session_id
        record.save(session_dir)
        for name in record.screenshots:
            Image.new("RGB", (4, 4), "white").save(session_dir / name)
    write_batch_index(root, "batch_0001", "http://shop.test/", records)
    return root


def scripted_gateway():
    return LLMGateway(mode="stub", stub=ScriptedStub(
        rules=[StubRule(
            reply=INTERVIEW_REPLY,
            when=("I am interviewing you about your browsing session",))],
        default_reply="OK."))


@pytest.fixture()
def gateway():
    return scripted_gateway()


@pytest.fixture()
def client(batch_dir, gateway):
    return TestClient(create_app(batch_dir, gateway))


# -- session listing -----------------------------------------------------------


def test_list_sessions_summarizes_each_record(client):
    body = client.get("/sessions").json()
    assert body["total"] == 3
    first = body["sessions"][0]
    assert first == {
        "session_id": "session_0001", "persona_name": "Maria Alvarez",
        "age": 34, "gender": "female", "income": 45000,
        "income_bin": "$30k-$58k", "outcome": "purchased", "actions": 2,
    }
    assert [s["income_bin"] for s in body["sessions"]] == [
        "$30k-$58k", "$153k-", "$0-$30k"]


def test_list_sessions_paginates_by_offset_and_limit(client):
    body = client.get("/sessions?offset=1&limit=1").json()
    assert body["total"] == 3
    assert [s["session_id"] for s in body["sessions"]] == ["session_0002"]


# -- session detail and traces ----------------------------------------------------


def test_get_session_returns_full_record_view(client):
    body = client.get("/sessions/session_0001").json()
    assert body["persona"]["name"] == "Maria Alvarez"
    assert body["outcome"]["kind"] == "purchased"
    assert body["outcome"]["items"] == [["Fleece Jacket (Navy, Medium)",
                                         "39.99"]]
    assert body["screenshot_urls"] == [
        "/sessions/session_0001/screenshots/1",
        "/sessions/session_0001/screenshots/2"]
    assert body["actions"][1]["description"] == ADD_TO_CART


def test_unknown_session_is_404(client):
    assert client.get("/sessions/session_9999").status_code == 404
    assert client.get("/sessions/session_9999/actions").status_code == 404


def test_actions_endpoint_matches_trace_export(client, batch_dir):
    body = client.get("/sessions/session_0001/actions").json()
    record = load_batch(batch_dir).records[0]
    assert body["trace"] == export_action_trace(record)
    assert body["actions"][0] == {
        "index": 1, "kind": "type_and_submit",
        "target": "header.search_input", "text": "woman's jacket",
        "description": "Searching for a jacket.", "ok": True,
        "error_message": None, "resulting_url": "http://shop.test/s",
    }


def test_memories_endpoint_pairs_pieces_with_trace_lines(client):
    body = client.get("/sessions/session_0001/memories").json()
    assert len(body["memories"]) == 4
    action_view = body["memories"][2]
    assert action_view["kind"] == "action"
    assert action_view["line"] == f"For action 2, I will: {ADD_TO_CART}"
    assert body["trace"].splitlines()[0] == \
        "Before action 1, I saw: The search box sits at the top."


def test_screenshots_served_as_png(client, batch_dir):
    response = client.get("/sessions/session_0001/screenshots/2")
    assert response.status_code == 200
    assert response.headers["content-type"] == "image/png"
    on_disk = (batch_dir / "session_0001" / "step_2.png").read_bytes()
    assert response.content == on_disk
    assert client.get("/sessions/session_0002/screenshots/2").status_code == 404


# -- stats -------------------------------------------------------------------------


def test_stats_endpoint_equals_direct_aggregation(client, batch_dir):
    body = client.get("/stats?group_by=income_bin").json()
    rows = aggregate_stats(load_batch(batch_dir).records, "income_bin")
    assert body["group_by"] == "income_bin"
    assert body["rows"] == [
        {"group": row.group, "count": row.count,
         "purchase_rate": row.purchase_rate,
         "mean_total": str(row.mean_total) if row.mean_total is not None
         else None,
         "mean_actions": row.mean_actions}
        for row in rows
    ]


def test_stats_rejects_unknown_grouping(client):
    assert client.get("/stats?group_by=shoe_size").status_code == 422


# -- interviews ----------------------------------------------------------------------


def test_interview_loads_memories_above_importance_threshold(client, gateway):
    created = client.post("/interviews",
                          json={"session_id": "session_0001"})
    assert created.status_code == 201
    body = created.json()
    assert body["session_id"] == "session_0001"
    assert body["persona_name"] == "Maria Alvarez"
    assert body["memory_count"] == 3  # the importance-2 piece is dropped
    assert body["turns"] == []

    client.post(f"/interviews/{body['interview_id']}/messages",
                json={"text": "Why that jacket?"})
    system = gateway.calls[-1].system
    assert "Maria Alvarez" in system
    assert "I am interviewing you about your browsing session" in system
    assert ADD_TO_CART in system
    assert "The jacket fit my budget." in system
    assert LOW_IMPORTANCE_TEXT not in system


def test_interview_on_unknown_session_is_404(client):
    assert client.post("/interviews",
                       json={"session_id": "nope"}).status_code == 404


def test_two_interviews_keep_independent_histories(client):
    first = client.post("/interviews",
                        json={"session_id": "session_0001"}).json()
    second = client.post("/interviews",
                         json={"session_id": "session_0001"}).json()
    assert first["interview_id"] != second["interview_id"]
    client.post(f"/interviews/{first['interview_id']}/messages",
                json={"text": "Hello?"})
    turns = client.get(f"/interviews/{second['interview_id']}").json()["turns"]
    assert turns == []


def test_message_streams_ndjson_chunks_reassembling_reply(client):
    interview = client.post("/interviews",
                            json={"session_id": "session_0001"}).json()
    response = client.post(f"/interviews/{interview['interview_id']}/messages",
                           json={"text": "Why did you pick that jacket?"})
    assert response.status_code == 200
    assert response.headers["content-type"].startswith("application/x-ndjson")
    lines = [json.loads(line) for line in response.text.splitlines() if line]
    assert lines[-1]["done"] is True
    assert lines[-1]["error"] is False
    reply = "".join(line.get("chunk", "") for line in lines[:-1])
    assert reply == lines[-1]["reply"] == INTERVIEW_REPLY

    turns = client.get(f"/interviews/{interview['interview_id']}").json()["turns"]
    assert turns == [["researcher", "Why did you pick that jacket?"],
                     ["agent", INTERVIEW_REPLY]]


def test_message_history_accumulates_into_later_prompts(client, gateway):
    interview = client.post("/interviews",
                            json={"session_id": "session_0001"}).json()
    url = f"/interviews/{interview['interview_id']}/messages"
    client.post(url, json={"text": "First question?"})
    client.post(url, json={"text": "Second question?"})
    messages = gateway.calls[-1].messages
    assert ("user", "First question?") in messages
    assert ("assistant", INTERVIEW_REPLY) in messages
    assert messages[-1] == ("user", "Second question?")


def test_image_upload_rejected_as_unsupported_feature(client):
    interview = client.post("/interviews",
                            json={"session_id": "session_0001"}).json()
    url = f"/interviews/{interview['interview_id']}/messages"
    response = client.post(url, json={"text": "See this?", "image": "b64..."})
    assert response.status_code == 400
    assert response.json()["detail"]["error"] == "unsupported_feature"
    turns = client.get(f"/interviews/{interview['interview_id']}").json()["turns"]
    assert turns == []  # rejected before touching the history


def test_blank_text_rejected(client):
    interview = client.post("/interviews",
                            json={"session_id": "session_0001"}).json()
    url = f"/interviews/{interview['interview_id']}/messages"
    assert client.post(url, json={"text": "   "}).status_code == 422


def test_unknown_interview_is_404(client):
    assert client.get("/interviews/itv_missing").status_code == 404
    assert client.post("/interviews/itv_missing/messages",
                       json={"text": "Hi"}).status_code == 404


def test_gateway_failure_becomes_error_turn_and_interview_survives(
        batch_dir, tmp_path):
    transcript = tmp_path / "empty.jsonl"
    transcript.write_text("")
    failing = LLMGateway(mode="replay", transcript_path=transcript)
    client = TestClient(create_app(batch_dir, failing))
    interview = client.post("/interviews",
                            json={"session_id": "session_0001"}).json()
    url = f"/interviews/{interview['interview_id']}/messages"
    response = client.post(url, json={"text": "Anything?"})
    lines = [json.loads(line) for line in response.text.splitlines() if line]
    assert lines[-1]["error"] is True
    assert "could not answer" in lines[-1]["reply"]
    turns = client.get(f"/interviews/{interview['interview_id']}").json()["turns"]
    assert len(turns) == 2 and turns[1][0] == "agent"
    assert client.post(url, json={"text": "Still there?"}).status_code == 200


def test_memory_budget_keeps_most_recent_memories(batch_dir):
    client = TestClient(create_app(batch_dir, scripted_gateway(),
                                   memory_budget=2))
    body = client.post("/interviews",
                       json={"session_id": "session_0001"}).json()
    assert body["memory_count"] == 2


def test_importance_threshold_is_configurable(batch_dir):
    client = TestClient(create_app(batch_dir, scripted_gateway(),
                                   importance_threshold=6))
    body = client.post("/interviews",
                       json={"session_id": "session_0001"}).json()
    assert body["memory_count"] == 1  # only the importance-7 reflection
