"""Command-line entry point: persona generation, batch runs, exports, serving.

Exit codes: 0 on success (including batches with per-session failures, which
are recorded in the outcomes), 2 for configuration/usage errors, 1 for other
runtime failures, 130 on interrupt.
"""

from __future__ import annotations

import dataclasses
import json
import sys
import threading
from pathlib import Path

import click

from .config import ConfigError, RunConfig
from .llm import LLMGateway, ScriptedStub
from .memory import RetrievalWeights
from .orchestrator import (
    export_action_trace,
    export_memory_trace,
    load_batch,
    run_batch,
)
from .personas import (
    DemographicSpec,
    PersonaError,
    generate_batch,
    load_personas,
    save_personas,
)


class CliError(click.ClickException):
    """Error with a controlled exit code and --format aware rendering."""

    def __init__(self, message, exit_code=1, kind="error"):
        super().__init__(message)
        self.exit_code = exit_code
        self.kind = kind

    def show(self, file=None):
        stream = file or sys.stderr
        if _format() == "json":
            payload = {"error": self.kind,
                       "messages": self.message.splitlines()}
            click.echo(json.dumps(payload), err=True, file=file)
        else:
            for line in self.message.splitlines():
                click.echo(f"error: {line}", err=True, file=file)
        return stream


_STATE = {"format": "text"}


def _format():
    return _STATE["format"]


def _emit(payload, text):
    """Print `text` lines normally, or the payload as JSON with --format json."""
    if _format() == "json":
        click.echo(json.dumps(payload, indent=2))
    else:
        for line in text:
            click.echo(line)


def _load_config(path, **overrides):
    try:
        config = RunConfig.load(path)
        return config.with_overrides(**overrides)
    except ConfigError as exc:
        raise CliError(str(exc), exit_code=2, kind="config")


def _stub_gateway(stub_path=None):
    stub = (ScriptedStub.from_file(stub_path) if stub_path
            else ScriptedStub(synthesize_personas=True))
    return LLMGateway(mode="stub", stub=stub)


@click.group()
@click.option("--format", "output_format",
              type=click.Choice(["text", "json"]), default="text",
              help="Output format for results and errors.")
def main(output_format):
    """Simulated usability testing: personas, sessions, traces, interviews."""
    _STATE["format"] = output_format


# -- personas ---------------------------------------------------------------------


@main.group()
def personas():
    """Persona batch utilities."""


# Without a config or spec file, generation falls back to one demographic
# cell matching the built-in example persona, so small demos need no setup.
_SINGLE_CELL_SPEC = {
    "age": [18, 75],
    "genders": ["female"],
    "income_bins": [[0, None]],
}


@personas.command("generate")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Run config supplying the demographic spec and gateway.")
@click.option("--spec", "spec_path", type=click.Path(exists=True),
              default=None, help="Demographic spec JSON (overrides config).")
@click.option("--count", type=int, default=None,
              help="Override the number of personas.")
@click.option("--seed", type=int, default=None, help="Sampling seed.")
@click.option("--out", type=click.Path(), default=None,
              help="Directory for persona files (default: <output.dir>/personas).")
@click.option("--stub", "stub_path", type=click.Path(exists=True),
              default=None, help="Scripted reply file for the stub gateway.")
def personas_generate(config_path, spec_path, count, seed, out, stub_path):
    """Generate a persona batch from a demographic spec."""
    spec_data = None
    intent = None
    gateway = None
    out_dir = Path(out) if out else Path("personas")
    seed_value = seed if seed is not None else 0
    if config_path:
        config = _load_config(config_path, stub=stub_path)
        if config.personas.spec_path:
            spec_data = json.loads(
                Path(config.personas.spec_path).read_text("utf-8"))
        intent = config.personas.intent
        gateway = config.build_gateway()
        if out is None:
            out_dir = Path(config.output_dir) / "personas"
        if seed is None:
            seed_value = config.seed
    if spec_path:
        spec_data = json.loads(Path(spec_path).read_text("utf-8"))
    if spec_data is None:
        spec_data = dict(_SINGLE_CELL_SPEC, count=count or 1)
    if gateway is None:
        gateway = _stub_gateway(stub_path)
    if count is not None:
        spec_data["count"] = count
    try:
        spec = DemographicSpec.from_dict(spec_data)
        batch = generate_batch(spec, gateway, seed_value, intent=intent)
        save_personas(out_dir, batch)
    except PersonaError as exc:
        raise CliError(str(exc), exit_code=2, kind="personas")
    _emit(
        {"count": len(batch), "dir": str(out_dir),
         "personas": [p.to_dict() for p in batch]},
        [f"{p.name} ({p.age}, {p.gender}, ${p.income:,})" for p in batch]
        + [f"wrote {len(batch)} personas to {out_dir}"],
    )


# -- run ---------------------------------------------------------------------------


@main.command()
@click.option("--config", "config_path", type=click.Path(), required=True)
@click.option("--out", type=click.Path(), default=None,
              help="Override the output directory.")
@click.option("--seed", type=int, default=None)
@click.option("--parallelism", type=int, default=None)
@click.option("--stub", type=click.Path(), default=None,
              help="Force stub mode with this scripted reply file.")
@click.option("--record", type=click.Path(), default=None,
              help="Force record mode writing this transcript.")
@click.option("--replay", type=click.Path(), default=None,
              help="Force replay mode reading this transcript.")
@click.option("--target-url", default=None,
              help="Override the site under test.")
@click.option("--webdriver-url", default=None,
              help="Override the browser automation endpoint.")
@click.option("--batch-id", default=None)
def run(config_path, out, seed, parallelism, stub, record, replay,
        target_url, webdriver_url, batch_id):
    """Run one simulated session per persona and persist the batch."""
    config = _load_config(config_path, out=out, seed=seed,
                          parallelism=parallelism, stub=stub,
                          record=record, replay=replay)
    target = config.target
    if target_url:
        target = dataclasses.replace(target, url=target_url)
    if webdriver_url:
        target = dataclasses.replace(target, webdriver_url=webdriver_url)
    if not target.url or not target.webdriver_url or not target.recipe_path:
        raise CliError("target: url, webdriver_url, and recipe_path are all "
                       "required to run", exit_code=2, kind="config")

    gateway = config.build_gateway()
    try:
        if config.personas.personas_path:
            batch_personas = load_personas(config.personas.personas_path)
            if config.personas.intent:
                batch_personas = [
                    dataclasses.replace(p, intent=config.personas.intent)
                    for p in batch_personas]
        elif config.personas.spec_path:
            spec = DemographicSpec.from_file(config.personas.spec_path)
            batch_personas = generate_batch(spec, gateway, config.seed,
                                            intent=config.personas.intent)
        else:
            raise CliError("personas: spec_path or personas_path is required",
                           exit_code=2, kind="config")
    except PersonaError as exc:
        raise CliError(str(exc), exit_code=2, kind="personas")

    agent_options = {
        "max_steps": config.agent.max_steps,
        "slow_loop_every": config.agent.slow_loop_every,
        "retrieval_k": config.agent.retrieval_k,
        "slow_loop_mode": config.agent.slow_loop_mode,
        "fast_weights": RetrievalWeights(*config.agent.profiles["fast"]),
        "slow_weights": RetrievalWeights(*config.agent.profiles["slow"]),
    }
    if config.personas.intent:
        agent_options["intent"] = config.personas.intent

    try:
        batch = run_batch(
            batch_personas,
            endpoint=target.webdriver_url,
            target_url=target.url,
            recipe=target.recipe_path,
            gateway=gateway,
            out_dir=config.output_dir,
            batch_id=batch_id,
            parallelism=config.parallelism,
            agent_options=agent_options,
        )
    except KeyboardInterrupt:
        click.echo("interrupted; finished sessions were already saved under "
                   f"{config.output_dir}", err=True)
        sys.exit(130)
    lines = []
    for record_ in batch.records:
        outcome = record_.outcome
        suffix = f" total=${outcome.total}" if outcome.total else ""
        lines.append(f"{record_.session_id}  {record_.persona.name:<24} "
                     f"{outcome.kind}{suffix}  actions={len(record_.actions)}")
    lines.append(f"wrote batch {batch.batch_id} to {batch.batch_dir}")
    _emit(
        {"batch_id": batch.batch_id, "batch_dir": str(batch.batch_dir),
         "sessions": [
             {"session_id": r.session_id, "persona_name": r.persona.name,
              "outcome": r.outcome.kind, "total": r.outcome.total,
              "actions": len(r.actions)} for r in batch.records]},
        lines,
    )


# -- export ------------------------------------------------------------------------


@main.command()
@click.option("--batch", "batch_dir", type=click.Path(exists=True),
              required=True, help="Batch directory (contains index.json).")
@click.option("--session", "session_id", default=None,
              help="Export only this session.")
@click.option("--out", type=click.Path(), default=None,
              help="Destination root (default: the batch directory).")
def export(batch_dir, session_id, out):
    """Write action and memory trace text files for sessions in a batch."""
    try:
        batch = load_batch(batch_dir)
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        raise CliError(f"batch: {exc}", exit_code=2, kind="batch")
    records = batch.records
    if session_id is not None:
        records = [r for r in records if r.session_id == session_id]
        if not records:
            raise CliError(f"session: not in batch: {session_id}",
                           exit_code=2, kind="batch")
    out_root = Path(out) if out else Path(batch_dir)
    written = []
    for record_ in records:
        session_dir = out_root / record_.session_id
        session_dir.mkdir(parents=True, exist_ok=True)
        for name, text in (("action_trace.txt", export_action_trace(record_)),
                           ("memory_trace.txt", export_memory_trace(record_))):
            path = session_dir / name
            path.write_text(text, encoding="utf-8")
            written.append(str(path))
    _emit({"written": written}, written)


# -- stats -------------------------------------------------------------------------


@main.command()
@click.option("--batch", "batch_dir", type=click.Path(exists=True),
              required=True)
@click.option("--group-by", "group_by",
              type=click.Choice(["income_bin", "gender"]),
              default="income_bin")
def stats(batch_dir, group_by):
    """Print purchase aggregates for a batch, grouped by demographic."""
    from .orchestrator import aggregate_stats

    try:
        batch = load_batch(batch_dir)
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        raise CliError(f"batch: {exc}", exit_code=2, kind="batch")
    rows = aggregate_stats(batch.records, group_by)

    def fmt(value, pattern):
        return "-" if value is None else pattern.format(value)

    header = f"{'group':<12} {'count':>5} {'purchase_rate':>13} " \
             f"{'mean_total':>10} {'mean_actions':>12}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(
            f"{row.group:<12} {row.count:>5} "
            f"{fmt(row.purchase_rate, '{:.2f}'):>13} "
            f"{fmt(row.mean_total, '${}'):>10} "
            f"{fmt(row.mean_actions, '{:.1f}'):>12}")
    _emit(
        {"group_by": group_by, "rows": [
            {"group": r.group, "count": r.count,
             "purchase_rate": r.purchase_rate,
             "mean_total": str(r.mean_total) if r.mean_total is not None
             else None,
             "mean_actions": r.mean_actions} for r in rows]},
        lines,
    )


# -- serve -------------------------------------------------------------------------


@main.command()
@click.option("--data", "batch_dir", type=click.Path(exists=True),
              required=True, help="Batch directory to serve.")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8080)
@click.option("--stub", "stub_path", type=click.Path(exists=True),
              default=None, help="Scripted replies for interview chats.")
@click.option("--replay", "replay_path", type=click.Path(exists=True),
              default=None, help="Recorded transcript for interview chats.")
@click.option("--importance-threshold", type=int, default=3,
              help="Minimum memory importance loaded into interviews.")
@click.option("--memory-budget", type=int, default=50,
              help="Most recent qualifying memories kept in interviews.")
def serve(batch_dir, host, port, stub_path, replay_path,
          importance_threshold, memory_budget):
    """Serve the result-exploration and interview HTTP API."""
    import uvicorn

    from .service import create_app

    if replay_path:
        gateway = LLMGateway(mode="replay", transcript_path=replay_path)
    else:
        gateway = _stub_gateway(stub_path)
    try:
        app = create_app(batch_dir, gateway,
                         importance_threshold=importance_threshold,
                         memory_budget=memory_budget)
    except FileNotFoundError as exc:
        raise CliError(str(exc), exit_code=2, kind="batch")
    click.echo(f"serving {batch_dir} on http://{host}:{port}", err=True)
    uvicorn.run(app, host=host, port=port, log_level="warning")


# -- fixture -----------------------------------------------------------------------


@main.command()
@click.option("--port", type=int, default=8700, help="Fixture shop port.")
@click.option("--driver-port", type=int, default=8701,
              help="Browser automation endpoint port.")
def fixture(port, driver_port):
    """Run the bundled demo shop and browser endpoint until interrupted."""
    from .fixtures.browser import BrowserEndpoint
    from .fixtures.shop import ShopServer

    with ShopServer(port=port) as shop, \
            BrowserEndpoint(port=driver_port) as endpoint:
        click.echo(f"shop:      {shop.url}", err=True)
        click.echo(f"webdriver: {endpoint.url}", err=True)
        click.echo("press Ctrl-C to stop", err=True)
        try:
            _wait_forever()
        except KeyboardInterrupt:
            click.echo("stopping", err=True)


def _wait_forever():
    threading.Event().wait()


if __name__ == "__main__":
    main()
