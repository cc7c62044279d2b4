"""Command-line interface: dispatch, exit codes, and output formats."""

import json
from importlib import resources
from pathlib import Path

import pytest
from click.testing import CliRunner

from uxsim.cli import main
from uxsim.fixtures.browser import BrowserEndpoint
from uxsim.fixtures.shop import ShopServer
from uxsim.orchestrator import load_batch

DEMO_STUB_PATH = str(resources.files("uxsim") / "data" / "demo_stub.json")
RECIPE_PATH = str(resources.files("uxsim.fixtures") / "shop_recipe.json")


@pytest.fixture()
def runner():
    return CliRunner()


def write_json(path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")
    return path


def single_cell_spec(tmp_path, count=1):
    return write_json(tmp_path / "spec.json", {
        "count": count,
        "age": [30, 40],
        "genders": ["female"],
        "income_bins": [[30000, 58000]],
    })


def run_config(tmp_path, shop_url, webdriver_url, **extra):
    data = {
        "llm": {"mode": "stub", "stub_path": DEMO_STUB_PATH},
        "agent": {"max_steps": 10},
        "target": {"url": shop_url, "recipe_path": RECIPE_PATH,
                   "webdriver_url": webdriver_url},
        "personas": {"spec_path": str(single_cell_spec(tmp_path)),
                     "intent": "buy a jacket"},
        "output": {"dir": str(tmp_path / "out")},
        "parallelism": 1,
        "seed": 3,
    }
    data.update(extra)
    return write_json(tmp_path / "config.json", data)


@pytest.fixture(scope="module")
def servers():
    with ShopServer() as shop, BrowserEndpoint() as endpoint:
        yield shop, endpoint


@pytest.fixture(scope="module")
def finished_batch(tmp_path_factory):
    """One scripted purchase session driven entirely through the CLI."""
    tmp_path = tmp_path_factory.mktemp("cli_batch")
    with ShopServer() as shop, BrowserEndpoint() as endpoint:
        config = run_config(tmp_path, shop.url + "/", endpoint.url)
        result = CliRunner().invoke(main, [
            "run", "--config", str(config), "--batch-id", "batch_0001"])
    assert result.exit_code == 0, result.output
    return tmp_path / "out" / "batch_0001", result


# -- personas generate ----------------------------------------------------------


def test_personas_generate_without_config_uses_builtin_example(runner,
                                                               tmp_path):
    out = tmp_path / "personas"
    result = runner.invoke(main, ["personas", "generate", "--count", "1",
                                  "--out", str(out)])
    assert result.exit_code == 0, result.output
    index = json.loads((out / "index.json").read_text("utf-8"))
    assert index["count"] == 1
    persona = json.loads((out / "persona_0001.json").read_text("utf-8"))
    assert persona["gender"] == "female"
    assert persona["name"] in result.output


def test_personas_generate_json_format(runner, tmp_path):
    result = runner.invoke(main, [
        "--format", "json", "personas", "generate", "--count", "2",
        "--out", str(tmp_path / "p")])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["count"] == 2
    assert len(payload["personas"]) == 2


def test_personas_generate_reports_uncoverable_spec(runner, tmp_path):
    spec = single_cell_spec(tmp_path, count=1)
    data = json.loads(spec.read_text("utf-8"))
    data["genders"] = ["female", "male"]
    write_json(spec, data)
    result = runner.invoke(main, ["personas", "generate",
                                  "--spec", str(spec)])
    assert result.exit_code == 2
    assert "cannot cover" in result.stderr


def test_personas_generate_is_deterministic_per_seed(runner, tmp_path):
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        result = runner.invoke(main, [
            "--format", "json", "personas", "generate", "--count", "3",
            "--seed", "11", "--out", str(out)])
        assert result.exit_code == 0
        outputs.append(json.loads(result.output)["personas"])
    assert outputs[0] == outputs[1]


# -- run --------------------------------------------------------------------------


def test_run_executes_batch_and_reports_sessions(finished_batch):
    batch_dir, result = finished_batch
    assert "purchased" in result.output
    assert "total=$39.99" in result.output
    batch = load_batch(batch_dir)
    assert len(batch.records) == 1
    assert batch.records[0].outcome.kind == "purchased"
    assert (batch_dir / "session_0001" / "record.json").exists()


def test_run_missing_config_file_exits_2(runner):
    result = runner.invoke(main, ["run", "--config", "missing.json"])
    assert result.exit_code == 2
    assert "file not found" in result.stderr


def test_run_invalid_config_reports_field_errors(runner, tmp_path, servers):
    shop, endpoint = servers
    config = run_config(tmp_path, shop.url + "/", endpoint.url,
                        llm={"mode": "telepathy"})
    result = runner.invoke(main, ["run", "--config", str(config)])
    assert result.exit_code == 2
    assert "llm.mode: must be one of" in result.stderr


def test_json_format_makes_errors_machine_readable(runner, tmp_path, servers):
    shop, endpoint = servers
    config = run_config(tmp_path, shop.url + "/", endpoint.url,
                        parallelism=0)
    result = runner.invoke(main, ["--format", "json", "run",
                                  "--config", str(config)])
    assert result.exit_code == 2
    payload = json.loads(result.stderr)
    assert payload["error"] == "config"
    assert any("parallelism" in line for line in payload["messages"])


def test_run_requires_target_settings(runner, tmp_path):
    config = run_config(tmp_path, "", "")
    result = runner.invoke(main, ["run", "--config", str(config)])
    assert result.exit_code == 2
    assert "target:" in result.stderr


def test_run_flag_overrides_take_precedence(tmp_path, servers):
    shop, endpoint = servers
    config = run_config(tmp_path, "http://127.0.0.1:1/", "http://127.0.0.1:1")
    result = CliRunner().invoke(main, [
        "run", "--config", str(config),
        "--target-url", shop.url + "/",
        "--webdriver-url", endpoint.url,
        "--out", str(tmp_path / "other_out"),
        "--batch-id", "batch_X"])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "other_out" / "batch_X" / "index.json").exists()


# -- export ----------------------------------------------------------------------


def test_export_writes_trace_files(runner, finished_batch, tmp_path):
    batch_dir, _ = finished_batch
    result = runner.invoke(main, ["export", "--batch", str(batch_dir),
                                  "--out", str(tmp_path / "traces")])
    assert result.exit_code == 0, result.output
    action_trace = (tmp_path / "traces" / "session_0001" /
                    "action_trace.txt").read_text("utf-8")
    assert action_trace.startswith(
        "Action 1: type_and_submit, description: Typing 'woman's jacket'")
    memory_trace = (tmp_path / "traces" / "session_0001" /
                    "memory_trace.txt").read_text("utf-8")
    assert "For action 5, I will:" in memory_trace


def test_export_unknown_session_exits_2(runner, finished_batch):
    batch_dir, _ = finished_batch
    result = runner.invoke(main, ["export", "--batch", str(batch_dir),
                                  "--session", "session_0042"])
    assert result.exit_code == 2
    assert "not in batch" in result.stderr


# -- stats ------------------------------------------------------------------------


def test_stats_prints_aligned_table_with_all_bins(runner, finished_batch):
    batch_dir, _ = finished_batch
    result = runner.invoke(main, ["stats", "--batch", str(batch_dir)])
    assert result.exit_code == 0, result.output
    for label in ("$0-$30k", "$30k-$58k", "$58k-$94k", "$94k-$153k", "$153k-"):
        assert label in result.output
    assert "$39.99" in result.output


def test_stats_json_rows(runner, finished_batch):
    batch_dir, _ = finished_batch
    result = runner.invoke(main, ["--format", "json", "stats",
                                  "--batch", str(batch_dir),
                                  "--group-by", "gender"])
    payload = json.loads(result.output)
    assert payload["group_by"] == "gender"
    assert payload["rows"] == [{
        "group": "female", "count": 1, "purchase_rate": 1.0,
        "mean_total": "39.99", "mean_actions": 5.0,
    }]


# -- serve ------------------------------------------------------------------------


def test_serve_builds_app_and_starts_server(runner, finished_batch,
                                            monkeypatch):
    batch_dir, _ = finished_batch
    captured = {}

    def fake_run(app, host, port, log_level):
        captured.update(app=app, host=host, port=port)

    monkeypatch.setattr("uvicorn.run", fake_run)
    result = runner.invoke(main, ["serve", "--data", str(batch_dir),
                                  "--port", "9321"])
    assert result.exit_code == 0, result.output
    assert captured["port"] == 9321
    assert captured["host"] == "127.0.0.1"
    assert captured["app"].title == "uxsim result service"


def test_serve_rejects_non_batch_directory(runner, tmp_path):
    result = runner.invoke(main, ["serve", "--data", str(tmp_path)])
    assert result.exit_code == 2
    assert "index.json" in result.stderr


# -- fixture ----------------------------------------------------------------------


def test_fixture_command_starts_both_servers(runner, monkeypatch):
    def interrupt():
        raise KeyboardInterrupt

    monkeypatch.setattr("uxsim.cli._wait_forever", interrupt)
    result = runner.invoke(main, ["fixture", "--port", "0",
                                  "--driver-port", "0"])
    assert result.exit_code == 0, result.output
    assert "shop:" in result.stderr
    assert "webdriver:" in result.stderr
    assert "stopping" in result.stderr
