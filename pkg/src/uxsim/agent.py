"""The two-loop simulated participant.

The Fast Loop runs perceive -> plan -> act -> execute against the
browser: each top-level segment of the simplified page becomes an
observation memory, a plan is drafted from persona + page + retrieved
memories, and the LLM picks one structured action that is validated
against the page's interactive registry before dispatch. Every
``slow_loop_every`` executed actions the Slow Loop fires: ``wonder``
drifts off-task the way people do, ``reflect`` distills recent memories
into insights. Both loops share one memory stream.

A session ends when the agent terminates, a purchase is detected (a
simplified node named ``order_confirmation`` appears), the step budget
runs out, or an unrecoverable error occurs.
"""

import json
import logging
import re
import threading
from dataclasses import dataclass, field
from decimal import Decimal

from . import prompts
from .browser import ACTION_KINDS, AgentAction
from .llm import CompletionRequest, GatewayError
from .memory import FAST_WEIGHTS, SLOW_WEIGHTS, MemoryStream
from .recipes import parse_simplified
from .recipes import render as render_markup
from .webdriver import WebDriverConnectionError

log = logging.getLogger(__name__)

OUTCOME_KINDS = ("purchased", "terminated", "max_steps_reached", "error")

PURCHASE_MARKER = "order_confirmation"

_MONEY_RE = re.compile(r"\$([0-9][0-9,]*(?:\.[0-9]{1,2})?)")
_JSON_RE = re.compile(r"\{.*\}", re.DOTALL)
_INT_RE = re.compile(r"\d+")

_DEFAULT_IMPORTANCE = 5


class AgentError(RuntimeError):
    """Unrecoverable agent failure (malformed actions after repair, etc.)."""


@dataclass(frozen=True)
class AgentConfig:
    """Knobs for one simulated session."""

    persona: object
    intent: str = "buy a jacket"
    max_steps: int = 40
    slow_loop_every: int = 3
    retrieval_k: int = 10
    fast_weights: object = FAST_WEIGHTS
    slow_weights: object = SLOW_WEIGHTS
    slow_loop_mode: str = "sync"  # "sync" or "thread"

    def validate(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.slow_loop_every < 1:
            raise ValueError("slow_loop_every must be >= 1")
        if self.retrieval_k < 0:
            raise ValueError("retrieval_k must be >= 0")
        if self.slow_loop_mode not in ("sync", "thread"):
            raise ValueError("slow_loop_mode must be 'sync' or 'thread'")
        return self


@dataclass(frozen=True)
class SessionOutcome:
    """How a session ended; items/total only accompany a purchase."""

    kind: str
    items: tuple = ()           # ((name, decimal-string price), ...)
    total: str | None = None    # decimal string
    detail: str | None = None

    def validate(self):
        if self.kind not in OUTCOME_KINDS:
            raise ValueError(f"unknown outcome kind {self.kind!r}")
        purchased = self.kind == "purchased"
        if purchased != bool(self.items) or purchased != (self.total is not None):
            raise ValueError("items/total are present iff kind == purchased")
        return self

    def to_dict(self):
        return {
            "kind": self.kind,
            "items": [list(item) for item in self.items],
            "total": self.total,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            kind=data["kind"],
            items=tuple(tuple(item) for item in data.get("items", ())),
            total=data.get("total"),
            detail=data.get("detail"),
        ).validate()


def detect_purchase(page_markup):
    """Return a purchased SessionOutcome if the confirmation marker is present.

    Convention: a simplified node named ``order_confirmation`` flags the
    purchase; its line-item children each carry a name text and a money
    text, and a child mentioning "Total" carries the total.
    """
    marker = _find_named(parse_simplified(page_markup), PURCHASE_MARKER)
    if marker is None:
        return None
    items = []
    total = None
    for child in marker.children:
        if child.text and "total" in child.text.lower():
            money = _MONEY_RE.search(child.text)
            if money:
                total = money.group(1).replace(",", "")
            continue
        texts = [c.text for c in child.children if c.text]
        prices = [t for t in texts if _MONEY_RE.fullmatch(t.strip())]
        names = [t for t in texts if t not in prices]
        if prices and names:
            items.append((names[0],
                          _MONEY_RE.search(prices[0]).group(1).replace(",", "")))
    if not items:
        # A marker without any parseable line item is not trusted as a
        # purchase; the session keeps going instead of mis-reporting one.
        return None
    if total is None:
        total = str(sum(Decimal(price) for _, price in items))
    return SessionOutcome(
        kind="purchased", items=tuple(items), total=total,
    ).validate()


def _find_named(nodes, name):
    for node in nodes:
        if node.name == name:
            return node
        found = _find_named(node.children, name)
        if found is not None:
            return found
    return None


class Agent:
    """One persona-conditioned participant driving one browser session."""

    def __init__(self, config, gateway, memory=None):
        self.config = config.validate()
        self.gateway = gateway
        self.memory = memory or MemoryStream(embed_fn=gateway.embed)
        persona = config.persona
        self.system_prompt = prompts.render(
            "agent_system",
            persona_name=persona.name,
            age=persona.age,
            gender=persona.gender,
            persona=persona.describe(),
            intent=config.intent,
        )
        self._slow_threads = []

    # -- LLM plumbing ------------------------------------------------------

    def _complete(self, messages, expect="free_text"):
        if isinstance(messages, str):
            messages = (("user", messages),)
        return self.gateway.complete(CompletionRequest(
            system=self.system_prompt,
            messages=tuple(messages),
            expect=expect,
        ))

    def _score_importance(self, text):
        reply = self._complete(
            prompts.render("importance", memory=text), expect="integer_score")
        match = _INT_RE.search(reply)
        if not match:
            log.warning("unparseable importance reply %r; defaulting", reply)
            return _DEFAULT_IMPORTANCE
        return max(1, min(10, int(match.group())))

    def _remember(self, kind, text, step):
        importance = self._score_importance(text)
        return self.memory.add(kind=kind, text=text, step=step,
                               importance=importance)

    def _retrieve_texts(self, query, profile, now_step):
        if self.config.retrieval_k == 0:
            return []
        weights = self.config.fast_weights if profile == "fast" \
            else self.config.slow_weights
        pieces = self.memory.retrieve(query, weights, k=self.config.retrieval_k,
                                      now_step=now_step)
        return [piece.text for piece in pieces]

    @staticmethod
    def _bullets(texts):
        return "\n".join(f"- {text}" for text in texts) if texts else "(none yet)"

    # -- fast loop ----------------------------------------------------------

    def perceive(self, observation, step):
        """One observation memory per top-level page segment, plus errors."""
        pieces = []
        for node in parse_simplified(observation.page):
            reply = self._complete(prompts.render("perceive",
                                                  segment=render_markup(node)))
            pieces.append(self._remember("observation", reply, step))
        if observation.error_message:
            pieces.append(self._remember(
                "observation",
                f"The last action failed: {observation.error_message}",
                step))
        return pieces

    def plan(self, observation, step):
        memories = self._retrieve_texts(
            f"{self.config.intent}\n{observation.url}", "fast", step)
        error_section = ""
        if observation.error_message:
            error_section = f"\nYour last action failed: " \
                            f"{observation.error_message}\n"
        reply = self._complete(prompts.render(
            "plan",
            url=observation.url,
            page=observation.page,
            memories=self._bullets(memories),
            error_section=error_section,
        ))
        return self._remember("plan", reply, step)

    def act(self, plan_piece, observation, step):
        """Pick one action; one repair attempt; registry-validate the target.

        Returns the AgentAction to execute, or None when the chosen target
        is not on the page (recorded as an error memory, step consumed).
        """
        user = prompts.render(
            "act",
            plan=plan_piece.text,
            page=observation.page,
            clickables=self._bullets(observation.clickables),
            inputs=self._bullets(observation.inputs),
        )
        messages = [("user", user)]
        action = None
        for attempt in range(2):
            reply = self._complete(tuple(messages), expect="structured_action")
            action = self._parse_action(reply)
            if action is not None:
                break
            messages += [
                ("assistant", reply),
                ("user", "That was not a valid action. Reply with exactly one "
                         "JSON object with keys kind, target, text, "
                         "description and no other text."),
            ]
        if action is None:
            raise AgentError("action output stayed malformed after one repair")

        registry = None
        if action.kind == "click":
            registry = observation.clickables
        elif action.kind in ("type", "type_and_submit", "clear"):
            registry = observation.inputs
        if registry is not None and action.target not in registry:
            self._remember(
                "error",
                f"I tried to {action.kind} '{action.target}', but no such "
                f"element is available on this page.",
                step)
            return None
        if action.kind != "terminate":
            # Terminating ends the session without counting as an executed
            # action, so it gets no "For action k" memory either.
            self._remember("action", action.description, step)
        return action

    @staticmethod
    def _parse_action(reply):
        match = _JSON_RE.search(reply)
        if not match:
            return None
        try:
            data = json.loads(match.group())
        except json.JSONDecodeError:
            return None
        if not isinstance(data, dict) or data.get("kind") not in ACTION_KINDS:
            return None
        try:
            return AgentAction(
                kind=data["kind"],
                target=data.get("target") or None,
                text=data.get("text") if data.get("kind") in
                ("type", "type_and_submit") else None,
                description=str(data.get("description", "")).strip(),
            ).validate()
        except ValueError:
            return None

    # -- slow loop -----------------------------------------------------------

    def wonder(self, step):
        recent = [piece.text for piece in self.memory.export_trace()[-5:]]
        reply = self._complete(prompts.render("wonder",
                                              memories=self._bullets(recent)))
        return self._remember("wonder", reply, step)

    def reflect(self, step):
        if self.config.retrieval_k == 0:
            return []
        memories = self._retrieve_texts(self.config.intent, "slow", step)
        if not memories:
            return []
        reply = self._complete(prompts.render("reflect",
                                              memories=self._bullets(memories)))
        lines = [line.strip() for line in reply.splitlines() if line.strip()]
        return [self._remember("reflection", line, step) for line in lines[:3]]

    def _slow_cycle(self, step):
        try:
            self.wonder(step)
            self.reflect(step)
        except GatewayError as exc:
            log.warning("slow loop failed at step %s: %s", step, exc)

    def _fire_slow_loop(self, step):
        if self.config.slow_loop_mode == "thread":
            thread = threading.Thread(target=self._slow_cycle, args=(step,),
                                      daemon=True)
            thread.start()
            self._slow_threads.append(thread)
        else:
            self._slow_cycle(step)

    def join_slow_loop(self, timeout=30):
        for thread in self._slow_threads:
            thread.join(timeout=timeout)
        self._slow_threads.clear()

    # -- session driver ---------------------------------------------------------

    def run_session(self, browser, start_url):
        """Drive the browser until an outcome; returns (actions, screenshots,
        outcome) where actions is a list of (AgentAction, ActionResult)."""
        actions = []
        screenshots = []
        outcome = None
        try:
            browser.open(start_url)
            observation = None
            for _ in range(self.config.max_steps):
                step = len(actions) + 1
                if observation is None:
                    observation = browser.observe()
                    purchase = detect_purchase(observation.page)
                    if purchase is not None:
                        outcome = purchase
                        break
                    self.perceive(observation, step)
                plan_piece = self.plan(observation, step)
                action = self.act(plan_piece, observation, step)
                if action is None:
                    continue
                if action.kind == "terminate":
                    browser.execute(action)
                    outcome = SessionOutcome(kind="terminated").validate()
                    break
                result = browser.execute(action)
                actions.append((action, result))
                shot = browser.screenshot(step)
                if shot is not None:
                    screenshots.append(shot)
                observation = None
                if len(actions) % self.config.slow_loop_every == 0:
                    self._fire_slow_loop(len(actions) + 1)
            if outcome is None:
                # The budget may end right on the purchasing action; check
                # the landing page before calling it a timeout.
                if observation is None and not browser.terminated:
                    final = browser.observe()
                    outcome = detect_purchase(final.page)
                if outcome is None:
                    outcome = SessionOutcome(kind="max_steps_reached").validate()
        except (AgentError, GatewayError, WebDriverConnectionError) as exc:
            log.warning("session failed: %s", exc)
            outcome = SessionOutcome(kind="error", detail=str(exc)).validate()
        finally:
            self.join_slow_loop()
            browser.close()
        return actions, screenshots, outcome
