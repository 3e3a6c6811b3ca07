"""Prompt construction and model backends.

The schema can be rendered five ways; which one a prompt uses measurably
changes draft quality, so the representation is part of the experiment
configuration and of the prompt fingerprint. Backends are swappable: a
scripted one replays canned replies keyed by fingerprint (tests and offline
benchmarks), a live one talks to a chat-completions endpoint.
"""

from __future__ import annotations

import hashlib
import os
import time
from dataclasses import dataclass

import httpx

from .schema import REGISTRY, SchemaRegistry

REPRESENTATIONS = ("BASIC", "CODE", "MARKDOWN", "ALPACA", "TEXT")

ROLE_LINE = (
    "You are a maritime traffic supervision assistant that answers "
    "questions by writing a single database query."
)

_KIND_SQL = {
    "integer": "INTEGER",
    "real": "REAL",
    "text": "TEXT",
    "timestamp": "TIMESTAMP",
    "geometry": "GEOMETRY",
}

_TABLE_NOTES = {
    "ship_ais": "latest position report per vessel",
    "ship_ais_quarter": "position reports sampled every quarter hour",
    "shp_data": "named zones and points with their geometry",
    "warn_single": "pairwise close-approach warnings",
}


class LlmError(Exception):
    pass


class ScriptMissError(LlmError):
    """The scripted backend has no reply for a prompt fingerprint."""


class LlmTimeoutError(LlmError):
    pass


class LlmHttpError(LlmError):
    def __init__(self, message: str, status: int = 0):
        super().__init__(message)
        self.status = status


def _basic(registry: SchemaRegistry) -> str:
    lines = []
    for table in registry.tables:
        lines.append(f"{table.name}({', '.join(table.column_names)})")
    return "\n".join(lines)


def _code(registry: SchemaRegistry) -> str:
    chunks = []
    for table in registry.tables:
        cols = ",\n".join(
            f"  {c.name} {_KIND_SQL[c.kind]}" for c in table.columns
        )
        chunks.append(f"CREATE TABLE {table.name} (\n{cols}\n);")
    return "\n\n".join(chunks)


def _markdown(registry: SchemaRegistry) -> str:
    chunks = []
    for table in registry.tables:
        rows = "\n".join(f"| {c.name} | {c.kind} |" for c in table.columns)
        chunks.append(
            f"### {table.name}\n\n| column | kind |\n| --- | --- |\n{rows}"
        )
    return "\n\n".join(chunks)


def _alpaca(registry: SchemaRegistry) -> str:
    return (
        "### Instruction:\n"
        "Write one query against the vessel traffic database described "
        "in the input.\n\n"
        "### Input:\n"
        f"{_basic(registry)}\n\n"
        "### Response:"
    )


def _text(registry: SchemaRegistry) -> str:
    sentences = ["The database has four tables."]
    for table in registry.tables:
        note = _TABLE_NOTES.get(table.name, "")
        cols = ", ".join(table.column_names)
        lead = f"Table {table.name} holds {note}" if note else f"Table {table.name}"
        sentences.append(f"{lead}; its columns are {cols}.")
    return " ".join(sentences)


_RENDERERS = {
    "BASIC": _basic,
    "CODE": _code,
    "MARKDOWN": _markdown,
    "ALPACA": _alpaca,
    "TEXT": _text,
}


def render_schema(registry: SchemaRegistry = REGISTRY, representation: str = "BASIC") -> str:
    try:
        renderer = _RENDERERS[representation]
    except KeyError:
        raise ValueError(
            f"unknown representation {representation!r}; "
            f"expected one of {', '.join(REPRESENTATIONS)}"
        ) from None
    return renderer(registry)


def system_text(representation: str, registry: SchemaRegistry = REGISTRY) -> str:
    return f"{ROLE_LINE}\n\n{render_schema(registry, representation)}"


def fingerprint(representation: str, user_text: str) -> str:
    """Stable 16-hex id of one prompt, used to key scripted replies."""
    digest = hashlib.sha256(
        representation.encode() + b"\x00" + user_text.encode()
    ).hexdigest()
    return digest[:16]


@dataclass(frozen=True)
class PromptBundle:
    representation: str
    system_text: str
    user_text: str
    facts: str = ""
    knowledge: str = ""
    rules: str = ""

    def fingerprint(self) -> str:
        return fingerprint(self.representation, self.user_text)

    def to_json_dict(self) -> dict:
        return {
            "representation": self.representation,
            "fingerprint": self.fingerprint(),
            "system_text": self.system_text,
            "user_text": self.user_text,
        }


class ScriptedBackend:
    """Replays canned replies keyed by prompt fingerprint.

    Strict by design: a prompt the script does not cover raises instead of
    improvising, and assert_exhausted() catches replies that were staged
    but never requested (a sign the expected prompt text drifted).
    """

    def __init__(self, script: dict[str, str], name: str = "scripted"):
        self.script = dict(script)
        self.name = name
        self.calls = 0
        self._used: set[str] = set()

    def complete(self, bundle: PromptBundle) -> str:
        self.calls += 1
        fp = bundle.fingerprint()
        if fp not in self.script:
            head = bundle.user_text.splitlines()[0] if bundle.user_text else ""
            raise ScriptMissError(
                f"no scripted reply for fingerprint {fp} "
                f"({bundle.representation}, first line {head!r})"
            )
        self._used.add(fp)
        return self.script[fp]

    def assert_exhausted(self) -> None:
        unused = sorted(set(self.script) - self._used)
        if unused:
            raise AssertionError(f"scripted replies never requested: {', '.join(unused)}")


class LiveBackend:
    """Chat-completions client with bounded retries.

    The bearer token is read from the named environment variable at call
    time and never stored on the instance or echoed in errors.
    """

    RETRY_STATUSES = frozenset({429, 500, 502, 503, 504})

    def __init__(
        self,
        base_url: str,
        model: str,
        *,
        api_key_env: str = "VESSELSQL_API_KEY",
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff: float = 0.5,
        client: httpx.Client | None = None,
        sleep=time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self._client = client
        self._sleep = sleep
        self.name = model
        self.calls = 0

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.api_key_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, bundle: PromptBundle) -> str:
        self.calls += 1
        payload = {
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": bundle.system_text},
                {"role": "user", "content": bundle.user_text},
            ],
        }
        url = f"{self.base_url}/chat/completions"
        client = self._client or httpx.Client(timeout=self.timeout)
        owns_client = self._client is None
        try:
            last_error: LlmError | None = None
            for attempt in range(self.max_retries + 1):
                if attempt:
                    self._sleep(self.backoff * (2 ** (attempt - 1)))
                try:
                    response = client.post(url, json=payload, headers=self._headers())
                except httpx.TimeoutException:
                    last_error = LlmTimeoutError(
                        f"model call timed out after {self.timeout}s"
                    )
                    continue
                except httpx.TransportError as exc:
                    last_error = LlmHttpError(f"transport failure: {exc}")
                    continue
                if response.status_code in self.RETRY_STATUSES:
                    last_error = LlmHttpError(
                        f"model endpoint returned {response.status_code}",
                        status=response.status_code,
                    )
                    continue
                if response.status_code != 200:
                    raise LlmHttpError(
                        f"model endpoint returned {response.status_code}",
                        status=response.status_code,
                    )
                return self._extract(response)
            assert last_error is not None
            raise last_error
        finally:
            if owns_client:
                client.close()

    @staticmethod
    def _extract(response: httpx.Response) -> str:
        try:
            body = response.json()
            return body["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise LlmHttpError(f"malformed completion payload: {exc}") from exc
