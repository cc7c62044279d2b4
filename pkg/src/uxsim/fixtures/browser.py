"""A WebDriver-compatible endpoint backed by a cookie-aware page fetcher.

Implements the slice of the W3C wire protocol the browser session layer
uses — sessions, navigation, CSS element lookup, click/keys/clear,
element properties, synchronous script execution, and screenshots —
against server-side documents fetched over plain HTTP. Clicks and form
submissions follow links and POST forms the way a real browser would;
screenshots are text renderings of the visible page.

This is a test double for a real browser driver, good enough to run the
whole agent stack locally and deterministically.
"""

import base64
import io
import json
import re
import threading
import urllib.error
import urllib.request
from http.cookiejar import CookieJar
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import urlencode, urljoin

from .. import scripts
from ..dom import Element, parse_html, serialize
from ..selectors import SelectorError, query_all
from ..webdriver import ELEMENT_KEY, ENTER_KEY

_SUBMITTABLE_INPUT_TYPES = (
    "text", "search", "email", "tel", "url", "password", "hidden", "number")

_INVISIBLE_TAGS = ("script", "style", "head", "title", "meta", "link")


class CommandError(Exception):
    def __init__(self, status, error, message):
        super().__init__(message)
        self.status = status
        self.error = error
        self.message = message


def _no_such_element(detail):
    return CommandError(404, "no such element", detail)


class DriverSession:
    """One simulated browser: document, history, cookies, element registry."""

    def __init__(self, session_id):
        self.id = session_id
        self.url = "about:blank"
        self.document = parse_html("")
        self.history = []
        self.generation = 0
        self.elements = {}
        self._next_element = 0
        self.jar = CookieJar()
        self.opener = urllib.request.build_opener(
            urllib.request.HTTPCookieProcessor(self.jar))
        self.lock = threading.RLock()

    # -- fetching -------------------------------------------------------

    def _fetch(self, url, data=None):
        request = urllib.request.Request(
            url, data=data, method="POST" if data is not None else "GET")
        request.add_header("User-Agent", "uxsim-fixture-browser/1.0")
        if data is not None:
            request.add_header("Content-Type", "application/x-www-form-urlencoded")
        try:
            with self.opener.open(request, timeout=15) as response:
                body = response.read().decode("utf-8", "replace")
                final_url = response.geturl()
        except urllib.error.HTTPError as exc:
            body = exc.read().decode("utf-8", "replace")
            final_url = exc.geturl() or url
        except (urllib.error.URLError, OSError) as exc:
            raise CommandError(500, "unknown error", f"fetch failed: {exc}") from exc
        self.document = parse_html(body)
        self.url = final_url
        # Bump the generation instead of clearing the registry so lookups
        # against pre-navigation ids report a stale element, not an unknown one.
        self.generation += 1

    def navigate(self, url):
        self._fetch(url)
        self.history.append(self.url)

    def go_back(self):
        if len(self.history) > 1:
            self.history.pop()
            self._fetch(self.history[-1])

    # -- element registry -------------------------------------------------

    def register(self, element):
        self._next_element += 1
        element_id = f"e{self._next_element}"
        self.elements[element_id] = (self.generation, element)
        return element_id

    def resolve(self, element_id):
        entry = self.elements.get(element_id)
        if entry is None:
            raise _no_such_element(f"unknown element id {element_id}")
        generation, element = entry
        if generation != self.generation:
            raise CommandError(404, "stale element reference",
                               f"element {element_id} belongs to an earlier page")
        return element

    def find(self, css, parent_id=None):
        context = self.document if parent_id is None else self.resolve(parent_id)
        try:
            found = query_all(context, css)
        except SelectorError as exc:
            raise CommandError(400, "invalid selector", str(exc)) from exc
        return [self.register(el) for el in found]

    # -- interaction --------------------------------------------------------

    def click(self, element_id):
        element = self.resolve(element_id)
        tag = element.tag
        if tag == "a":
            href = element.get("href")
            if href:
                self._fetch(urljoin(self.url, href))
                self.history.append(self.url)
            return
        if tag == "input" and (element.get("type") or "text").lower() == "radio":
            self._check_radio(element)
            return
        if tag == "input" and (element.get("type") or "").lower() == "checkbox":
            element.props["checked"] = not self._is_checked(element)
            return
        if tag == "option":
            self._choose_option(element)
            return
        if tag == "button" or (
                tag == "input" and (element.get("type") or "").lower() == "submit"):
            kind = (element.get("type") or ("submit" if tag == "button" else "")).lower()
            if kind in ("submit", ""):
                form = self._owning_form(element)
                if form is not None:
                    self.submit_form(form)
            return
        # Plain containers: a real browser would fire events; nothing to do.

    @staticmethod
    def _is_checked(element):
        if "checked" in element.props:
            return bool(element.props["checked"])
        return "checked" in element.attrs

    def _check_radio(self, element):
        name = element.get("name")
        scope = self._owning_form(element) or self.document
        if name:
            for other in query_all(scope, f"input[name='{name}']"):
                other.props["checked"] = False
        element.props["checked"] = True

    def _choose_option(self, option):
        select = option.parent
        while isinstance(select, Element) and select.tag != "select":
            select = select.parent
        if not isinstance(select, Element):
            return
        for other in query_all(select, "option"):
            other.props["selected"] = False
        option.props["selected"] = True
        select.props["value"] = option.get("value") or option.text_content().strip()

    @staticmethod
    def _owning_form(element):
        node = element
        while isinstance(node, Element):
            if node.tag == "form":
                return node
            node = node.parent
        return None

    def send_keys(self, element_id, text):
        element = self.resolve(element_id)
        if element.tag not in ("input", "textarea"):
            raise CommandError(400, "element not interactable",
                               f"cannot type into <{element.tag}>")
        submit = False
        if ENTER_KEY in text:
            text = text.split(ENTER_KEY, 1)[0]
            submit = True
        current = element.props.get("value")
        if current is None:
            current = element.get("value") or ""
        element.props["value"] = current + text
        if submit:
            form = self._owning_form(element)
            if form is not None:
                self.submit_form(form)

    def clear(self, element_id):
        element = self.resolve(element_id)
        if element.tag not in ("input", "textarea"):
            raise CommandError(400, "invalid element state",
                               f"cannot clear <{element.tag}>")
        element.props["value"] = ""

    def submit_form(self, form):
        fields = []
        for el in form.iter_elements():
            name = el.get("name")
            if not name:
                continue
            if el.tag == "input":
                kind = (el.get("type") or "text").lower()
                if kind in ("radio", "checkbox"):
                    if self._is_checked(el):
                        fields.append((name, el.props.get("value",
                                                          el.get("value") or "on")))
                elif kind in _SUBMITTABLE_INPUT_TYPES:
                    value = el.props.get("value")
                    if value is None:
                        value = el.get("value") or ""
                    fields.append((name, value))
            elif el.tag == "textarea":
                value = el.props.get("value")
                if value is None:
                    value = el.text_content()
                fields.append((name, value))
            elif el.tag == "select":
                value = el.props.get("value")
                if value is None:
                    options = query_all(el, "option")
                    chosen = next(
                        (o for o in options
                         if "selected" in o.attrs or o.props.get("selected")),
                        options[0] if options else None)
                    if chosen is not None:
                        value = chosen.get("value") or chosen.text_content().strip()
                if value is not None:
                    fields.append((name, value))
        action = urljoin(self.url, form.get("action") or self.url)
        method = (form.get("method") or "get").lower()
        if method == "post":
            self._fetch(action, data=urlencode(fields).encode("ascii"))
        else:
            base = action.split("?", 1)[0]
            self._fetch(f"{base}?{urlencode(fields)}" if fields else base)
        self.history.append(self.url)

    # -- properties ---------------------------------------------------------

    def element_property(self, element_id, name):
        element = self.resolve(element_id)
        if name == "value":
            if "value" in element.props:
                return element.props["value"]
            if element.tag == "textarea":
                return element.text_content()
            return element.get("value") or ""
        if name == "checked":
            return self._is_checked(element)
        if name == "selected":
            if "selected" in element.props:
                return bool(element.props["selected"])
            return "selected" in element.attrs
        if name in ("textContent", "innerText"):
            return element.text_content()
        if name == "tagName":
            return element.tag.upper()
        return element.get(name)

    # -- scripts --------------------------------------------------------------

    def execute(self, script, args):
        element = None
        if args:
            first = args[0]
            if isinstance(first, dict) and ELEMENT_KEY in first:
                element = self.resolve(first[ELEMENT_KEY])
            else:
                element = None
        try:
            result = scripts.evaluate(script, element)
        except scripts.ScriptError as exc:
            raise CommandError(500, "javascript error", str(exc)) from exc
        if isinstance(result, Element):
            return {ELEMENT_KEY: self.register(result)}
        return result

    # -- screenshots -------------------------------------------------------------

    def visible_lines(self, limit=48):
        lines = [self.url]
        body = next(
            (el for el in self.document.iter_elements() if el.tag == "body"),
            self.document)
        for el in body.iter_elements():
            if el.tag in _INVISIBLE_TAGS:
                continue
            if el.tag == "input":
                value = el.props.get("value", el.get("value") or "")
                label = f"[{(el.get('type') or 'text')}:{value}]"
                lines.append(label)
                continue
            texts = [c.data.strip() for c in el.children
                     if not isinstance(c, Element)]
            text = " ".join(t for t in texts if t)
            if text:
                lines.append(text[:110])
            if len(lines) >= limit:
                break
        return lines

    def screenshot(self):
        from PIL import Image, ImageDraw

        image = Image.new("RGB", (1024, 768), "white")
        draw = ImageDraw.Draw(image)
        y = 8
        for line in self.visible_lines():
            draw.text((8, y), line, fill="black")
            y += 15
            if y > 748:
                break
        buffer = io.BytesIO()
        image.save(buffer, format="PNG")
        return base64.b64encode(buffer.getvalue()).decode("ascii")


class _EndpointHandler(BaseHTTPRequestHandler):
    server_version = "uxsimWebDriver/1.0"

    def log_message(self, fmt, *args):
        pass

    # -- response helpers ---------------------------------------------------

    def _reply(self, value, status=200):
        payload = json.dumps({"value": value}).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _error(self, exc):
        self._reply({"error": exc.error, "message": exc.message}, exc.status)

    def _body(self):
        length = int(self.headers.get("Content-Length", 0))
        if not length:
            return {}
        return json.loads(self.rfile.read(length).decode("utf-8"))

    def _session(self, session_id):
        session = self.server.sessions.get(session_id)
        if session is None:
            raise CommandError(404, "invalid session id",
                               f"no session {session_id}")
        return session

    # -- dispatch ---------------------------------------------------------

    _ROUTES = [
        ("POST", r"^/session$", "_new_session"),
        ("DELETE", r"^/session/(?P<sid>[^/]+)$", "_delete_session"),
        ("GET", r"^/status$", "_status"),
        ("POST", r"^/session/(?P<sid>[^/]+)/url$", "_navigate"),
        ("GET", r"^/session/(?P<sid>[^/]+)/url$", "_current_url"),
        ("POST", r"^/session/(?P<sid>[^/]+)/back$", "_back"),
        ("GET", r"^/session/(?P<sid>[^/]+)/source$", "_source"),
        ("POST", r"^/session/(?P<sid>[^/]+)/elements$", "_find"),
        ("POST", r"^/session/(?P<sid>[^/]+)/element$", "_find_one"),
        ("POST", r"^/session/(?P<sid>[^/]+)/element/(?P<eid>[^/]+)/elements$", "_find"),
        ("POST", r"^/session/(?P<sid>[^/]+)/element/(?P<eid>[^/]+)/click$", "_click"),
        ("POST", r"^/session/(?P<sid>[^/]+)/element/(?P<eid>[^/]+)/value$", "_send_keys"),
        ("POST", r"^/session/(?P<sid>[^/]+)/element/(?P<eid>[^/]+)/clear$", "_clear"),
        ("GET", r"^/session/(?P<sid>[^/]+)/element/(?P<eid>[^/]+)/property/(?P<prop>[^/]+)$",
         "_property"),
        ("POST", r"^/session/(?P<sid>[^/]+)/execute/sync$", "_execute"),
        ("GET", r"^/session/(?P<sid>[^/]+)/screenshot$", "_screenshot"),
    ]

    def _dispatch(self, method):
        for verb, pattern, handler in self._ROUTES:
            if verb != method:
                continue
            match = re.match(pattern, self.path)
            if match:
                try:
                    getattr(self, handler)(**match.groupdict())
                except CommandError as exc:
                    self._error(exc)
                except Exception as exc:  # noqa: BLE001 - protocol boundary
                    self._error(CommandError(500, "unknown error", repr(exc)))
                return
        self._error(CommandError(404, "unknown command",
                                 f"{method} {self.path}"))

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_DELETE(self):
        self._dispatch("DELETE")

    # -- command implementations ------------------------------------------

    def _status(self):
        self._reply({"ready": True, "message": "fixture endpoint"})

    def _new_session(self):
        with self.server.lock:
            self.server.session_counter += 1
            session_id = f"wd{self.server.session_counter:04d}"
            session = DriverSession(session_id)
            self.server.sessions[session_id] = session
        self._reply({"sessionId": session_id, "capabilities": {
            "browserName": "uxsim-fixture"}})

    def _delete_session(self, sid):
        self.server.sessions.pop(sid, None)
        self._reply(None)

    def _navigate(self, sid):
        session = self._session(sid)
        url = self._body().get("url")
        if not url:
            raise CommandError(400, "invalid argument", "url required")
        with session.lock:
            session.navigate(url)
        self._reply(None)

    def _current_url(self, sid):
        self._reply(self._session(sid).url)

    def _back(self, sid):
        session = self._session(sid)
        with session.lock:
            session.go_back()
        self._reply(None)

    def _source(self, sid):
        session = self._session(sid)
        with session.lock:
            self._reply(serialize(session.document))

    def _find(self, sid, eid=None):
        session = self._session(sid)
        body = self._body()
        if body.get("using") != "css selector":
            raise CommandError(400, "invalid argument",
                               "only css selector lookups are supported")
        with session.lock:
            ids = session.find(body.get("value", ""), eid)
        self._reply([{ELEMENT_KEY: element_id} for element_id in ids])

    def _find_one(self, sid):
        session = self._session(sid)
        body = self._body()
        with session.lock:
            ids = session.find(body.get("value", ""))
        if not ids:
            raise _no_such_element(f"nothing matches {body.get('value')!r}")
        self._reply({ELEMENT_KEY: ids[0]})

    def _click(self, sid, eid):
        session = self._session(sid)
        with session.lock:
            session.click(eid)
        self._reply(None)

    def _send_keys(self, sid, eid):
        session = self._session(sid)
        text = self._body().get("text", "")
        with session.lock:
            session.send_keys(eid, text)
        self._reply(None)

    def _clear(self, sid, eid):
        session = self._session(sid)
        with session.lock:
            session.clear(eid)
        self._reply(None)

    def _property(self, sid, eid, prop):
        session = self._session(sid)
        with session.lock:
            self._reply(session.element_property(eid, prop))

    def _execute(self, sid):
        session = self._session(sid)
        body = self._body()
        with session.lock:
            result = session.execute(body.get("script", ""),
                                     body.get("args", []))
        self._reply(result)

    def _screenshot(self, sid):
        session = self._session(sid)
        with session.lock:
            self._reply(session.screenshot())


class BrowserEndpoint:
    """Lifecycle wrapper: a local WebDriver-compatible HTTP endpoint."""

    def __init__(self, host="127.0.0.1", port=0):
        self.httpd = ThreadingHTTPServer((host, port), _EndpointHandler)
        self.httpd.sessions = {}
        self.httpd.session_counter = 0
        self.httpd.lock = threading.Lock()
        self._thread = None

    @property
    def url(self):
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self):
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
