"""Provider-agnostic LLM gateway.

One client object serves four modes:

- ``live``    call an HTTPS chat-completion endpoint (with retries and a
              token-bucket rate limit);
- ``record``  live, plus persist (request digest, reply) pairs to a
              JSON-lines transcript;
- ``replay``  answer solely from a recorded transcript — any unseen
              request is an error, never a network call;
- ``stub``    answer from a deterministic scripted stub.

Every test in this repository runs in stub or replay mode; nothing here
touches the network unless explicitly configured with an endpoint.
"""

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass, field

EXPECTATIONS = ("free_text", "structured_action", "structured_persona", "integer_score")

EMBEDDING_DIM = 256


class GatewayError(RuntimeError):
    """Transport failed after all retries, or the gateway is misconfigured."""


class TransportError(RuntimeError):
    """A single transport attempt failed; complete() retries these."""


class ReplayMissError(GatewayError):
    """Replay mode was asked for a request that was never recorded."""


@dataclass(frozen=True)
class CompletionRequest:
    system: str
    messages: tuple  # ((role, text), ...)
    temperature: float = 0.0
    max_tokens: int = 1024
    expect: str = "free_text"

    def __post_init__(self):
        if not self.messages:
            raise ValueError("CompletionRequest needs at least one message")
        if self.expect not in EXPECTATIONS:
            raise ValueError(f"unknown expectation {self.expect!r}")
        object.__setattr__(self, "messages", tuple(tuple(m) for m in self.messages))

    def rendered(self):
        """All request text in one string, for stub rule matching."""
        parts = [self.system] + [text for _, text in self.messages]
        return "\n".join(parts)


def request_digest(request):
    """Stable digest of the reply-determining request fields.

    max_tokens is deliberately excluded so replays survive budget tweaks.
    """
    payload = json.dumps(
        {
            "system": request.system,
            "messages": [list(m) for m in request.messages],
            "temperature": request.temperature,
            "expect": request.expect,
        },
        sort_keys=True,
        ensure_ascii=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# -- embeddings ---------------------------------------------------------

_TOKEN_RE = re.compile(r"[a-z0-9']+")


def hash_embedding(text, dim=EMBEDDING_DIM):
    """Deterministic unit vector: mean of hashed token one-hot vectors.

    Similarity grows with token overlap, which is all retrieval tests
    need from an offline embedding.
    """
    vector = [0.0] * dim
    tokens = _TOKEN_RE.findall(text.lower())
    for token in tokens:
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        index = int.from_bytes(digest[:4], "big") % dim
        vector[index] += 1.0
    norm = sum(v * v for v in vector) ** 0.5
    if norm == 0.0:
        return tuple(vector)
    return tuple(v / norm for v in vector)


def cosine_similarity(a, b):
    if a is None or b is None:
        return 0.0
    dot = sum(x * y for x, y in zip(a, b))
    na = sum(x * x for x in a) ** 0.5
    nb = sum(y * y for y in b) ** 0.5
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


# -- scripted stub ------------------------------------------------------

@dataclass
class StubRule:
    """Reply when every `when` substring appears in the rendered request."""

    reply: str
    when: tuple = ()
    expect: str | None = None
    times: int | None = None  # None = unlimited
    used: int = 0

    def matches(self, request, rendered):
        if self.times is not None and self.used >= self.times:
            return False
        if self.expect is not None and request.expect != self.expect:
            return False
        return all(needle in rendered for needle in self.when)


_PERSONA_AGE_RE = re.compile(r"age of (\d+)")
_PERSONA_GENDER_RE = re.compile(r"Be (\w[\w-]*)")
_PERSONA_INCOME_RE = re.compile(
    r"income (?:between|of) \$([\d,]+) and \$?([\d,]+|above)")

_FIRST_NAMES = [
    "Alex", "Bailey", "Casey", "Devon", "Emerson", "Finley", "Harper",
    "Jordan", "Kendall", "Logan", "Morgan", "Parker", "Quinn", "Riley",
    "Sage", "Taylor",
]
_LAST_NAMES = [
    "Adams", "Brooks", "Chen", "Diaz", "Evans", "Foster", "Garcia",
    "Hughes", "Ibarra", "Jensen", "Kim", "Lopez", "Murphy", "Novak",
    "Ortiz", "Patel",
]


class ScriptedStub:
    """Deterministic stand-in for the chat provider.

    Resolution order per request: first matching content rule, then the
    positional reply queue, then (for persona requests, if enabled)
    synthesized persona text honoring the constraints quoted in the
    prompt, then the default reply.
    """

    def __init__(self, rules=(), replies=(), default_reply="OK.",
                 synthesize_personas=False):
        self.rules = list(rules)
        self.queue = list(replies)
        self.default_reply = default_reply
        self.synthesize_personas = synthesize_personas
        self._lock = threading.Lock()

    @classmethod
    def from_dict(cls, data):
        rules = [
            StubRule(
                reply=r["reply"],
                when=tuple(r.get("when", ())) if not isinstance(r.get("when"), str)
                else (r["when"],),
                expect=r.get("expect"),
                times=None if r.get("times", "*") == "*" else int(r["times"]),
            )
            for r in data.get("rules", ())
        ]
        return cls(
            rules=rules,
            replies=list(data.get("replies", ())),
            default_reply=data.get("default_reply", "OK."),
            synthesize_personas=bool(data.get("synthesize_personas", False)),
        )

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def reply(self, request):
        rendered = request.rendered()
        with self._lock:
            for rule in self.rules:
                if rule.matches(request, rendered):
                    rule.used += 1
                    return rule.reply
            if self.queue:
                return self.queue.pop(0)
        if self.synthesize_personas and request.expect == "structured_persona":
            return self._persona_for(rendered)
        if request.expect == "integer_score":
            return "5"
        return self.default_reply

    def _persona_for(self, rendered):
        age = _PERSONA_AGE_RE.search(rendered)
        gender = _PERSONA_GENDER_RE.search(rendered)
        income = _PERSONA_INCOME_RE.search(rendered)
        age = int(age.group(1)) if age else 35
        gender = gender.group(1).lower() if gender else "female"
        low = int(income.group(1).replace(",", "")) if income else 30000
        high = income.group(2) if income else "58000"
        if high == "above":
            mid = low + 20000
        else:
            mid = (low + int(high.replace(",", ""))) // 2
        seed = int(hashlib.sha256(rendered.encode("utf-8")).hexdigest()[:8], 16)
        name = (f"{_FIRST_NAMES[seed % len(_FIRST_NAMES)]} "
                f"{_LAST_NAMES[(seed // 16) % len(_LAST_NAMES)]}")
        return "\n".join([
            f"Name: {name}",
            f"Age: {age}",
            f"Gender: {gender}",
            f"Income: {mid}",
            f"Background: {name} is a {age}-year-old shopper who compares "
            "prices carefully and values free delivery.",
        ])


# -- rate limiting ------------------------------------------------------

class TokenBucket:
    """Simple token bucket; clock and sleep are injectable for tests."""

    def __init__(self, rate, capacity=None, clock=time.monotonic, sleep=time.sleep):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = float(rate)
        self.capacity = float(capacity if capacity is not None else max(1.0, rate))
        self.tokens = self.capacity
        self.clock = clock
        self.sleep = sleep
        self._updated = clock()
        self._lock = threading.Lock()

    def acquire(self):
        while True:
            with self._lock:
                now = self.clock()
                self.tokens = min(
                    self.capacity, self.tokens + (now - self._updated) * self.rate
                )
                self._updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            self.sleep(wait)


# -- gateway ------------------------------------------------------------

def _http_transport_factory(endpoint, model, api_key):
    import requests

    def transport(request):
        messages = [{"role": "system", "content": request.system}]
        messages += [{"role": role, "content": text} for role, text in request.messages]
        payload = {
            "model": model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        try:
            response = requests.post(endpoint, json=payload, headers=headers, timeout=120)
            response.raise_for_status()
            body = response.json()
            return body["choices"][0]["message"]["content"]
        except Exception as exc:  # noqa: BLE001 - every failure is retryable
            raise TransportError(str(exc)) from exc

    return transport


class LLMGateway:
    """Chat completion + embeddings behind one mode switch.

    `calls` keeps every CompletionRequest seen (any mode), so tests can
    assert on exactly what was put in front of the model.
    """

    def __init__(self, mode="stub", *, stub=None, transcript_path=None,
                 endpoint=None, model=None, api_key=None,
                 requests_per_second=None, retries=3, backoff=0.25,
                 transport=None, clock=time.monotonic, sleep=time.sleep):
        if mode not in ("live", "stub", "record", "replay"):
            raise ValueError(f"unknown gateway mode {mode!r}")
        self.mode = mode
        self.stub = stub if stub is not None else ScriptedStub()
        self.retries = retries
        self.backoff = backoff
        self._sleep = sleep
        self.calls = []
        self._lock = threading.Lock()
        self._transcript_path = transcript_path
        self._transcript = {}
        self._bucket = None
        if requests_per_second:
            self._bucket = TokenBucket(requests_per_second, clock=clock, sleep=sleep)
        if mode in ("live", "record"):
            if transport is None and endpoint is None:
                raise GatewayError(f"{mode} mode needs an endpoint or transport")
            self._transport = transport or _http_transport_factory(
                endpoint, model, api_key)
        else:
            self._transport = transport
        if mode == "replay":
            if transcript_path is None:
                raise GatewayError("replay mode needs a transcript")
            self._load_transcript(transcript_path)
        if mode == "record" and transcript_path is None:
            raise GatewayError("record mode needs a transcript path")

    def _load_transcript(self, path):
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                entry = json.loads(line)
                self._transcript.setdefault(entry["digest"], []).append(entry["reply"])

    def _record(self, digest, reply):
        entry = json.dumps({"digest": digest, "reply": reply}, ensure_ascii=True)
        with self._lock:
            with open(self._transcript_path, "a", encoding="utf-8") as fh:
                fh.write(entry + "\n")

    def _call_with_retries(self, request):
        attempts = self.retries + 1
        for attempt in range(attempts):
            if self._bucket is not None:
                self._bucket.acquire()
            try:
                return self._transport(request)
            except TransportError as exc:
                if attempt == attempts - 1:
                    raise GatewayError(
                        f"transport failed after {attempts} attempts: {exc}"
                    ) from exc
                self._sleep(self.backoff * (2 ** attempt))
        raise AssertionError("unreachable")

    def complete(self, request):
        with self._lock:
            self.calls.append(request)
        if self.mode == "stub":
            return self.stub.reply(request)
        if self.mode == "replay":
            digest = request_digest(request)
            with self._lock:
                replies = self._transcript.get(digest)
                if not replies:
                    raise ReplayMissError(
                        f"no recorded reply for digest {digest[:12]}… "
                        f"(expect={request.expect})"
                    )
                return replies.pop(0) if len(replies) > 1 else replies[0]
        reply = self._call_with_retries(request)
        if self.mode == "record":
            self._record(request_digest(request), reply)
        return reply

    def embed(self, text):
        """Embedding for retrieval; offline modes always use the hash fallback."""
        return hash_embedding(text)
