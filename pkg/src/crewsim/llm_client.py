"""Chat-completion transport with offline backends and transcript capture."""

from __future__ import annotations

import json
import logging
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import httpx

from .errors import ClientFailure, ConfigInvalid, MissingScript

log = logging.getLogger(__name__)

DEFAULT_MODEL = "GPT-3.5-turbo"
DEFAULT_TEMPERATURE = 0.7
DEFAULT_MAX_TOKENS = 512
SPEAK_PLACEHOLDER = "I am doing my tasks. Has anyone seen anything suspicious?"

_OPTION_LINE = re.compile(r"^\s*(\d+)\.\s+(.*\S)\s*$")


@dataclass
class ChatRequest:
    messages: list                   # [{"role": ..., "content": ...}], system first
    tag: str
    model: str = DEFAULT_MODEL
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self):
        if not self.messages or self.messages[0]["role"] != "system":
            raise ValueError("first message must be the system text")

    @property
    def user_text(self) -> str:
        return next((m["content"] for m in reversed(self.messages) if m["role"] == "user"), "")

    def to_json(self) -> dict:
        return {"model": self.model, "messages": self.messages,
                "temperature": self.temperature, "max_tokens": self.max_tokens}


def extract_options(prompt: str) -> list:
    """Numbered lines of the 'Available actions:' section of a rendered prompt."""
    lines = prompt.splitlines()
    try:
        start = lines.index("Available actions:")
    except ValueError:
        return []
    opts = []
    for line in lines[start + 1:]:
        m = _OPTION_LINE.match(line)
        if not m:
            break
        opts.append(m.group(2))
    return opts


def format_reply(memory: str, thought: str, action: str) -> str:
    return f"[Condensed Memory]\n{memory}\n\n[Thinking Process]\n{thought}\n\n[Action] {action}"


class ScriptedBackend:
    """Canned replies keyed exactly on request tag."""

    offline = True

    def __init__(self, replies: dict):
        self.replies = dict(replies)

    @classmethod
    def from_transcript(cls, path) -> "ScriptedBackend":
        replies = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    entry = json.loads(line)
                    if entry.get("reply") is not None:
                        replies[entry["tag"]] = entry["reply"]
        return cls(replies)

    def reply(self, request: ChatRequest) -> str:
        try:
            return self.replies[request.tag]
        except KeyError:
            raise MissingScript(request.tag) from None


class UniformOptionBackend:
    """Answers with a uniformly drawn option from the prompt's action list."""

    offline = True

    def __init__(self, seed: int = 0):
        self.rng = random.Random(seed)

    def reply(self, request: ChatRequest) -> str:
        options = extract_options(request.user_text)
        if not options:
            return "I have nothing to add."
        choice = self.rng.choice(options)
        if choice.startswith("SPEAK"):
            choice = f'SPEAK: "{SPEAK_PLACEHOLDER}"'
        return format_reply(f"I chose to {choice}.", "Picking an available action at random.", choice)


class RemoteBackend:
    """OpenAI-compatible ``/chat/completions`` endpoint."""

    offline = False

    def __init__(self, endpoint: str, *, credential_env: str = "OPENAI_API_KEY",
                 timeout: float = 60.0, retries: int = 3, backoff: float = 0.5,
                 max_in_flight: Optional[int] = None, transport: Optional[httpx.BaseTransport] = None,
                 sleep: Callable[[float], None] = time.sleep, require_credential: bool = True):
        self.endpoint = endpoint.rstrip("/")
        self.credential_env = credential_env
        key = os.environ.get(credential_env, "")
        if require_credential and not key:
            raise ConfigInvalid(f"client.credential_env: environment variable {credential_env} is not set")
        self.retries = max(1, int(retries))
        self.backoff = backoff
        self._sleep = sleep
        self._gate = threading.BoundedSemaphore(max_in_flight) if max_in_flight else None
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._http = httpx.Client(timeout=timeout, transport=transport, headers=headers)

    def _post(self, request: ChatRequest) -> str:
        resp = self._http.post(f"{self.endpoint}/chat/completions", json=request.to_json())
        if resp.status_code == 429 or resp.status_code >= 500:
            raise _Transient(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise ClientFailure(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ClientFailure(f"malformed completion payload: {exc}") from exc

    def reply(self, request: ChatRequest) -> str:
        last = None
        for attempt in range(self.retries):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            try:
                if self._gate is None:
                    return self._post(request)
                with self._gate:
                    return self._post(request)
            except (_Transient, httpx.TransportError) as exc:
                last = exc
                log.warning("transient failure on %s (attempt %d/%d): %s",
                            request.tag, attempt + 1, self.retries, exc)
        raise ClientFailure(f"{request.tag}: gave up after {self.retries} attempts: {last}")

    def close(self) -> None:
        self._http.close()


class _Transient(Exception):
    pass


@dataclass
class LLMClient:
    """Routes requests to a backend and journals every call."""

    backend: object
    model: str = DEFAULT_MODEL
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    transcript: list = field(default_factory=list)

    def request(self, system: str, user: str, tag: str) -> ChatRequest:
        return ChatRequest([{"role": "system", "content": system}, {"role": "user", "content": user}],
                           tag, self.model, self.temperature, self.max_tokens)

    def complete(self, request: ChatRequest) -> str:
        return complete(self.backend, request, self.transcript)

    def ask(self, system: str, user: str, tag: str) -> str:
        return self.complete(self.request(system, user, tag))


def complete(backend, request: ChatRequest, transcript: Optional[list] = None) -> str:
    entry = {"tag": request.tag, **request.to_json(), "reply": None}
    if transcript is not None:
        transcript.append(entry)
    try:
        entry["reply"] = backend.reply(request)
    except Exception as exc:
        entry["error"] = f"{type(exc).__name__}: {exc}"
        raise
    return entry["reply"]


def write_transcript(entries: list, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
