"""Drive one browser session and translate between pages and actions.

A BrowserSession owns a single WebDriver session. ``observe`` snapshots
the DOM, harvests live element state (input values, checked state,
script-derived text), and renders the recipe-simplified page together
with the interactive-element registry. ``execute`` maps abstract agent
actions (click/type/type_and_submit/clear/back/terminate) onto concrete
WebDriver commands, resolving dotted element names through the bindings
recorded at parse time.

The session enforces an observe-act cadence: every execute must be
followed by exactly one observe before the next execute. A failed action
never kills the session (except transport loss); its message surfaces in
the next Observation exactly once.
"""

import logging
from dataclasses import dataclass

from .recipes import load_recipe, parse_page, render
from .webdriver import ENTER_KEY, WebDriverClient, WebDriverError

log = logging.getLogger(__name__)

ACTION_KINDS = ("click", "type", "type_and_submit", "clear", "back", "terminate")

_TARGETED = ("click", "type", "type_and_submit", "clear")
_TEXTUAL = ("type", "type_and_submit")

_SELECT_CHOICE_JS = (
    "return arguments[0].querySelector('option:checked').textContent;"
)


class SessionStateError(RuntimeError):
    """The observe/execute cadence or open/closed lifecycle was violated."""


@dataclass(frozen=True)
class Observation:
    """What the agent sees: simplified page plus interactive registries."""

    url: str
    page: str
    clickables: tuple
    inputs: tuple
    error_message: str | None = None


@dataclass(frozen=True)
class AgentAction:
    """One abstract browser action chosen by the agent."""

    kind: str
    target: str | None = None
    text: str | None = None
    description: str = ""

    def validate(self):
        if self.kind not in ACTION_KINDS:
            raise ValueError(f"unknown action kind {self.kind!r}")
        if self.kind in _TARGETED:
            if not self.target:
                raise ValueError(f"{self.kind} requires a target")
        elif self.target is not None:
            raise ValueError(f"{self.kind} does not take a target")
        if self.kind in _TEXTUAL:
            if self.text is None:
                raise ValueError(f"{self.kind} requires text")
        elif self.text is not None:
            raise ValueError(f"{self.kind} does not take text")
        return self


@dataclass(frozen=True)
class ActionResult:
    """Outcome of one executed action."""

    ok: bool
    error_message: str | None = None
    resulting_url: str = ""


class BrowserSession:
    """One agent-facing browser: observe pages, execute abstract actions."""

    def __init__(self, endpoint, recipe, screenshot_dir=None, client=None):
        self.client = client or WebDriverClient(endpoint)
        self.recipe = load_recipe(list(recipe)) if isinstance(recipe, tuple) \
            else load_recipe(recipe)
        self.screenshot_dir = screenshot_dir
        self.session_id = None
        self.terminated = False
        self._state = "closed"
        self._pending_error = None
        self._bindings = {}

    # -- lifecycle -----------------------------------------------------------

    def open(self, start_url):
        if self.session_id is not None:
            raise SessionStateError("session already open")
        self.session_id = self.client.new_session()
        self.client.navigate(self.session_id, start_url)
        self._state = "open"
        return self

    def close(self):
        if self.session_id is not None:
            try:
                self.client.delete_session(self.session_id)
            except WebDriverError:
                pass
            self.session_id = None
        self._state = "closed"

    # -- observe ------------------------------------------------------------

    def observe(self):
        if self._state not in ("open", "acted"):
            if self._state == "observed":
                raise SessionStateError("already observed; execute an action next")
            raise SessionStateError("session is not open")
        raw = self.client.page_source(self.session_id)
        first_pass = parse_page(raw, self.recipe)
        live = self._harvest(first_pass.state_slots)
        result = parse_page(raw, self.recipe, live) if live else first_pass
        for warning in result.warnings:
            log.debug("parse warning: %s", warning)
        self._bindings = result.bindings
        error, self._pending_error = self._pending_error, None
        self._state = "observed"
        return Observation(
            url=self.client.current_url(self.session_id),
            page=render(result.nodes),
            clickables=tuple(result.registry.clickables),
            inputs=tuple(result.registry.inputs),
            error_message=error,
        )

    def _harvest(self, state_slots):
        """Read live element state for every slot the recipe flagged."""
        live = {}
        for slot in state_slots:
            try:
                element = self._resolve_steps(slot.steps)
            except LookupError:
                continue
            state = {}
            if slot.element_state:
                self._harvest_element_state(element, state)
            if slot.text_js:
                try:
                    state["text"] = self.client.execute_sync(
                        self.session_id, slot.text_js, [self._ref(element)])
                except WebDriverError as exc:
                    log.debug("text_js harvest failed: %s", exc)
            for attr, script in slot.override_attr.items():
                try:
                    value = self.client.execute_sync(
                        self.session_id, script, [self._ref(element)])
                except WebDriverError as exc:
                    log.debug("override_attr harvest failed: %s", exc)
                    continue
                if value is not None:
                    state.setdefault("attrs", {})[attr] = value
            if state:
                live[slot.key] = state
        return live

    def _harvest_element_state(self, element, state):
        sid = self.session_id
        try:
            tag = (self.client.element_property(sid, element, "tagName") or "").lower()
            if tag == "select":
                state["selected"] = self.client.execute_sync(
                    sid, _SELECT_CHOICE_JS, [self._ref(element)])
            else:
                state["value"] = self.client.element_property(sid, element, "value")
                checked = self.client.element_property(sid, element, "checked")
                if checked is not None:
                    state["checked"] = bool(checked)
        except WebDriverError as exc:
            log.debug("element state harvest failed: %s", exc)

    @staticmethod
    def _ref(element_id):
        from .webdriver import element_ref
        return element_ref(element_id)

    def _resolve_steps(self, steps):
        parent = None
        for css, index in steps:
            found = self.client.find_elements(self.session_id, css, parent=parent)
            if index >= len(found):
                raise LookupError(f"{css!r}[{index}] matched nothing")
            parent = found[index]
        if parent is None:
            raise LookupError("empty binding")
        return parent

    # -- execute -------------------------------------------------------------

    def execute(self, action):
        if self._state == "closed":
            raise SessionStateError("session is closed")
        if self._state != "observed":
            raise SessionStateError("observe before executing the next action")
        action.validate()
        try:
            result = self._dispatch(action)
        except WebDriverError as exc:
            result = self._fail(str(exc))
        if action.kind != "terminate":
            self._state = "acted"
        return result

    def _dispatch(self, action):
        sid = self.session_id
        if action.kind == "terminate":
            self.terminated = True
            self.close()
            return ActionResult(ok=True, resulting_url="")
        if action.kind == "back":
            self.client.back(sid)
            return self._ok()

        binding = self._bindings.get(action.target)
        if binding is None:
            return self._fail(
                f"Element '{action.target}' does not exist on the current page.")
        try:
            element = self._locate(binding)
        except LookupError:
            return self._fail(
                f"Element '{action.target}' could not be located on the "
                f"current page anymore.")

        try:
            self._act_on(action, element)
        except WebDriverError as exc:
            if exc.error != "stale element reference":
                return self._fail(str(exc))
            # The page shifted under us: re-resolve once, then give up.
            try:
                element = self._locate(binding)
                self._act_on(action, element)
            except (LookupError, WebDriverError) as retry_exc:
                return self._fail(
                    f"Element '{action.target}' went stale and could not be "
                    f"re-resolved: {retry_exc}")
        return self._ok()

    def _locate(self, binding):
        element = self._resolve_steps(binding.steps)
        if binding.click_selector:
            found = self.client.find_elements(
                self.session_id, binding.click_selector, parent=element)
            if not found:
                raise LookupError(f"click_selector {binding.click_selector!r} "
                                  f"matched nothing")
            element = found[0]
        return element

    def _act_on(self, action, element):
        sid = self.session_id
        if action.kind == "click":
            self.client.click(sid, element)
        elif action.kind == "type":
            self.client.clear(sid, element)
            self.client.send_keys(sid, element, action.text)
        elif action.kind == "type_and_submit":
            self.client.clear(sid, element)
            self.client.send_keys(sid, element, action.text + ENTER_KEY)
        elif action.kind == "clear":
            self.client.clear(sid, element)

    def _ok(self):
        return ActionResult(ok=True, resulting_url=self._safe_url())

    def _fail(self, message):
        self._pending_error = message
        return ActionResult(ok=False, error_message=message,
                            resulting_url=self._safe_url())

    def _safe_url(self):
        try:
            return self.client.current_url(self.session_id)
        except WebDriverError:
            return ""

    # -- screenshots ----------------------------------------------------------

    def screenshot(self, step_index):
        """Persist step_{k}.png under the session directory; never raises."""
        if self.screenshot_dir is None or self.session_id is None:
            return None
        try:
            data = self.client.screenshot(self.session_id)
            path = self.screenshot_dir / f"step_{step_index}.png"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
            return path
        except (WebDriverError, OSError) as exc:
            log.warning("screenshot %s failed: %s", step_index, exc)
            return None
