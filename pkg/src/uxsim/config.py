"""Run configuration: one JSON file as the source of truth, flags override.

The file groups settings by subsystem::

    {
      "llm":      {"mode": "stub", "endpoint": null, "model": null,
                   "temperature": 0.0, "stub_path": null,
                   "transcript_path": null},
      "agent":    {"max_steps": 40, "slow_loop_every": 3, "retrieval_k": 10,
                   "slow_loop_mode": "sync",
                   "profiles": {"fast": [1, 1, 3], "slow": [1, 3, 1]}},
      "target":   {"url": "...", "recipe_path": "...", "webdriver_url": "..."},
      "personas": {"spec_path": "..."} or {"personas_path": "..."},
      "output":   {"dir": "out"},
      "parallelism": 1,
      "seed": 0
    }

Every referenced path must exist when the config is loaded, so failures
happen up front with a field-level message instead of mid-batch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

GATEWAY_MODES = ("live", "stub", "record", "replay")
MAX_SEED = 2**64 - 1


class ConfigError(ValueError):
    """Invalid run configuration; message lists `field: problem` lines."""


@dataclass(frozen=True)
class LLMSettings:
    mode: str = "stub"
    endpoint: str | None = None
    model: str | None = None
    temperature: float = 0.0
    stub_path: str | None = None
    transcript_path: str | None = None


@dataclass(frozen=True)
class AgentSettings:
    max_steps: int = 40
    slow_loop_every: int = 3
    retrieval_k: int = 10
    slow_loop_mode: str = "sync"
    profiles: dict = field(default_factory=lambda: {
        "fast": (1.0, 1.0, 3.0), "slow": (1.0, 3.0, 1.0)})


@dataclass(frozen=True)
class TargetSettings:
    url: str = ""
    recipe_path: str = ""
    webdriver_url: str = ""


@dataclass(frozen=True)
class PersonaSettings:
    spec_path: str | None = None
    personas_path: str | None = None
    intent: str | None = None


@dataclass(frozen=True)
class RunConfig:
    llm: LLMSettings = field(default_factory=LLMSettings)
    agent: AgentSettings = field(default_factory=AgentSettings)
    target: TargetSettings = field(default_factory=TargetSettings)
    personas: PersonaSettings = field(default_factory=PersonaSettings)
    output_dir: str = "out"
    parallelism: int = 1
    seed: int = 0

    # -- construction -----------------------------------------------------

    @classmethod
    def from_dict(cls, data, base_dir="."):
        errors = []
        base = Path(base_dir)

        def section(key, allowed):
            raw = data.get(key, {})
            if not isinstance(raw, dict):
                errors.append(f"{key}: expected an object")
                return {}
            for sub in raw:
                if sub not in allowed:
                    errors.append(f"{key}.{sub}: unknown field")
            return raw

        llm_raw = section("llm", ("mode", "endpoint", "model", "temperature",
                                  "stub_path", "transcript_path"))
        agent_raw = section("agent", ("max_steps", "slow_loop_every",
                                      "retrieval_k", "slow_loop_mode",
                                      "profiles"))
        target_raw = section("target", ("url", "recipe_path", "webdriver_url"))
        personas_raw = section("personas", ("spec_path", "personas_path",
                                            "intent"))
        output_raw = section("output", ("dir",))
        for key in data:
            if key not in ("llm", "agent", "target", "personas", "output",
                           "parallelism", "seed"):
                errors.append(f"{key}: unknown field")

        def resolve(section_name, key, raw):
            value = raw.get(key)
            if value is None:
                return None
            path = Path(value)
            if not path.is_absolute():
                path = base / path
            if not path.exists():
                errors.append(f"{section_name}.{key}: path does not exist: "
                              f"{path}")
            return str(path)

        profiles = agent_raw.get("profiles",
                                 {"fast": (1.0, 1.0, 3.0),
                                  "slow": (1.0, 3.0, 1.0)})
        if (not isinstance(profiles, dict)
                or set(profiles) != {"fast", "slow"}
                or any(len(tuple(v)) != 3 for v in profiles.values())):
            errors.append("agent.profiles: expected fast/slow weight triples")
            profiles = {"fast": (1.0, 1.0, 3.0), "slow": (1.0, 3.0, 1.0)}
        profiles = {name: tuple(float(w) for w in weights)
                    for name, weights in profiles.items()}

        config = cls(
            llm=LLMSettings(
                mode=llm_raw.get("mode", "stub"),
                endpoint=llm_raw.get("endpoint"),
                model=llm_raw.get("model"),
                temperature=float(llm_raw.get("temperature", 0.0)),
                stub_path=resolve("llm", "stub_path", llm_raw),
                transcript_path=resolve("llm", "transcript_path", llm_raw),
            ),
            agent=AgentSettings(
                max_steps=int(agent_raw.get("max_steps", 40)),
                slow_loop_every=int(agent_raw.get("slow_loop_every", 3)),
                retrieval_k=int(agent_raw.get("retrieval_k", 10)),
                slow_loop_mode=agent_raw.get("slow_loop_mode", "sync"),
                profiles=profiles,
            ),
            target=TargetSettings(
                url=target_raw.get("url", ""),
                recipe_path=resolve("target", "recipe_path", target_raw) or "",
                webdriver_url=target_raw.get("webdriver_url", ""),
            ),
            personas=PersonaSettings(
                spec_path=resolve("personas", "spec_path", personas_raw),
                personas_path=resolve("personas", "personas_path",
                                      personas_raw),
                intent=personas_raw.get("intent"),
            ),
            output_dir=str(output_raw.get("dir", "out")),
            parallelism=int(data.get("parallelism", 1)),
            seed=int(data.get("seed", 0)),
        )
        errors.extend(config._field_errors())
        if errors:
            raise ConfigError("\n".join(sorted(errors)))
        return config

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            data = json.loads(path.read_text("utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config: file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config: top level must be an object")
        return cls.from_dict(data, base_dir=path.parent)

    # -- validation ---------------------------------------------------------

    def _field_errors(self):
        errors = []
        if self.llm.mode not in GATEWAY_MODES:
            errors.append(f"llm.mode: must be one of {', '.join(GATEWAY_MODES)}")
        if self.llm.mode in ("live", "record") and not self.llm.endpoint:
            errors.append(f"llm.endpoint: required for mode {self.llm.mode!r}")
        if self.llm.mode in ("record", "replay") and \
                not self.llm.transcript_path:
            errors.append("llm.transcript_path: required for mode "
                          f"{self.llm.mode!r}")
        if self.agent.max_steps < 1:
            errors.append("agent.max_steps: must be >= 1")
        if self.agent.slow_loop_every < 1:
            errors.append("agent.slow_loop_every: must be >= 1")
        if self.agent.retrieval_k < 0:
            errors.append("agent.retrieval_k: must be >= 0")
        if self.agent.slow_loop_mode not in ("sync", "thread"):
            errors.append("agent.slow_loop_mode: must be 'sync' or 'thread'")
        if self.parallelism < 1:
            errors.append("parallelism: must be >= 1")
        if not 0 <= self.seed <= MAX_SEED:
            errors.append("seed: must fit in 64 bits")
        if self.personas.spec_path and self.personas.personas_path:
            errors.append("personas: spec_path and personas_path are "
                          "mutually exclusive")
        return errors

    # -- derived helpers -------------------------------------------------------

    def build_gateway(self):
        """Construct the chat gateway this config describes."""
        from .llm import LLMGateway, ScriptedStub

        settings = self.llm
        if settings.mode == "stub":
            stub = (ScriptedStub.from_file(settings.stub_path)
                    if settings.stub_path else ScriptedStub())
            return LLMGateway(mode="stub", stub=stub)
        if settings.mode == "replay":
            return LLMGateway(mode="replay",
                              transcript_path=settings.transcript_path)
        return LLMGateway(
            mode=settings.mode,
            endpoint=settings.endpoint,
            model=settings.model,
            transcript_path=settings.transcript_path,
        )

    # -- overrides ------------------------------------------------------------

    def with_overrides(self, *, out=None, seed=None, parallelism=None,
                       stub=None, record=None, replay=None):
        """Apply CLI flag overrides; returns a validated copy."""
        config = self
        if out is not None:
            config = replace(config, output_dir=str(out))
        if seed is not None:
            config = replace(config, seed=int(seed))
        if parallelism is not None:
            config = replace(config, parallelism=int(parallelism))
        llm = config.llm
        if stub is not None:
            llm = replace(llm, mode="stub", stub_path=str(stub))
        if record is not None:
            llm = replace(llm, mode="record", transcript_path=str(record))
        if replay is not None:
            llm = replace(llm, mode="replay", transcript_path=str(replay))
        config = replace(config, llm=llm)
        errors = config._field_errors()
        for flag_path in (("llm", "stub_path", stub),
                          ("llm", "transcript_path", record),
                          ("llm", "transcript_path", replay)):
            section, key, value = flag_path
            if value is not None and not Path(value).exists():
                errors.append(f"{section}.{key}: path does not exist: {value}")
        if errors:
            raise ConfigError("\n".join(sorted(set(errors))))
        return config
