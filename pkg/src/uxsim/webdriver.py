"""Minimal W3C WebDriver wire-protocol client.

Speaks plain REST to any WebDriver-compatible endpoint (a real browser
driver or the bundled fixture endpoint). Transport-level failures are
retried with exponential backoff; protocol-level failures (the endpoint
answered with an error document) raise WebDriverError immediately.
"""

import base64
import time

import requests

ELEMENT_KEY = "element-6066-11e4-a52e-4f735466cecf"

ENTER_KEY = ""

DEFAULT_RETRIES = 3
DEFAULT_BACKOFF = 0.25  # seconds, doubled per retry


class WebDriverError(RuntimeError):
    """The remote end rejected a command (e.g. no such element, stale)."""

    def __init__(self, error, message):
        super().__init__(f"{error}: {message}")
        self.error = error
        self.message = message


class WebDriverConnectionError(RuntimeError):
    """The endpoint could not be reached after all retries."""


def element_ref(element_id):
    return {ELEMENT_KEY: element_id}


class WebDriverClient:
    def __init__(self, endpoint, *, retries=DEFAULT_RETRIES,
                 backoff=DEFAULT_BACKOFF, sleep=time.sleep, timeout=30.0):
        self.endpoint = endpoint.rstrip("/")
        self.retries = retries
        self.backoff = backoff
        self.sleep = sleep
        self.timeout = timeout
        self.http = requests.Session()

    # -- wire plumbing --------------------------------------------------

    def _request(self, method, path, body=None):
        url = f"{self.endpoint}{path}"
        attempts = self.retries + 1
        for attempt in range(attempts):
            try:
                response = self.http.request(
                    method, url, json=body if body is not None else None,
                    timeout=self.timeout,
                )
                break
            except requests.exceptions.RequestException as exc:
                if attempt == attempts - 1:
                    raise WebDriverConnectionError(
                        f"{method} {url} failed after {attempts} attempts: {exc}"
                    ) from exc
                self.sleep(self.backoff * (2 ** attempt))
        try:
            payload = response.json()
        except ValueError as exc:
            raise WebDriverError("unknown error",
                                 f"non-JSON response: {response.text[:200]}") from exc
        value = payload.get("value")
        if response.status_code >= 400 or (
                isinstance(value, dict) and "error" in value):
            if isinstance(value, dict):
                raise WebDriverError(value.get("error", "unknown error"),
                                     value.get("message", ""))
            raise WebDriverError("unknown error", str(value))
        return value

    # -- session --------------------------------------------------------

    def new_session(self, capabilities=None):
        body = {"capabilities": capabilities or {}}
        value = self._request("POST", "/session", body)
        return value["sessionId"]

    def delete_session(self, session_id):
        self._request("DELETE", f"/session/{session_id}")

    # -- navigation -----------------------------------------------------

    def navigate(self, session_id, url):
        self._request("POST", f"/session/{session_id}/url", {"url": url})

    def current_url(self, session_id):
        return self._request("GET", f"/session/{session_id}/url")

    def back(self, session_id):
        self._request("POST", f"/session/{session_id}/back", {})

    def page_source(self, session_id):
        return self._request("GET", f"/session/{session_id}/source")

    # -- elements ---------------------------------------------------------

    def find_elements(self, session_id, css, parent=None):
        body = {"using": "css selector", "value": css}
        if parent is None:
            path = f"/session/{session_id}/elements"
        else:
            path = f"/session/{session_id}/element/{parent}/elements"
        refs = self._request("POST", path, body)
        return [ref[ELEMENT_KEY] for ref in refs]

    def click(self, session_id, element_id):
        self._request("POST", f"/session/{session_id}/element/{element_id}/click", {})

    def send_keys(self, session_id, element_id, text):
        self._request("POST", f"/session/{session_id}/element/{element_id}/value",
                      {"text": text})

    def clear(self, session_id, element_id):
        self._request("POST", f"/session/{session_id}/element/{element_id}/clear", {})

    def element_property(self, session_id, element_id, name):
        return self._request(
            "GET", f"/session/{session_id}/element/{element_id}/property/{name}")

    # -- scripts and capture ----------------------------------------------

    def execute_sync(self, session_id, script, args=()):
        return self._request("POST", f"/session/{session_id}/execute/sync",
                             {"script": script, "args": list(args)})

    def screenshot(self, session_id):
        encoded = self._request("GET", f"/session/{session_id}/screenshot")
        return base64.b64decode(encoded)
