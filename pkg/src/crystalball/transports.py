"""Transports carry a prompt to a language model and return its answer.

Three implementations share one contract: a deterministic stub for tests and
offline runs, a file-exchange transport for models driven by hand, and an HTTP
client for chat-completions endpoints. Callers treat them interchangeably;
every failure surfaces as TransportError so orchestration code has a single
error path.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import requests

from .errors import TransportError, TransportTimeout
from .prompts import (
    CVE_CHAIN_PROMPT_PREFIX,
    EXTRACTION_PROMPT_PREFIX,
    EXTRACTION_RETRY_SUFFIX,
    REPORT_PROMPT_PREFIX,
    ZOOM_PROMPT_TEMPLATE,
)
from .retriever import SEPARATOR

ENV_URL = "CRYSTALBALL_LLM_URL"
ENV_KEY = "CRYSTALBALL_LLM_KEY"
ENV_MODEL = "CRYSTALBALL_LLM_MODEL"

# First line of the zoom template, used to recognize zoom prompts without
# matching the filled-in edge fields.
_ZOOM_HEAD = ZOOM_PROMPT_TEMPLATE.split("\n", 1)[0]


class LlmTransport(Protocol):
    """What generation needs from a model connection.

    send is total: it either returns the answer text or raises TransportError
    (or a subclass); it never hangs past the transport's own timeout. The
    token limits are advisory ceilings the caller checks before sending.
    """

    transport_id: str
    max_prompt_tokens: int
    max_answer_tokens: int

    def send(self, prompt: str) -> str: ...


def _stub_label(segment: str, index: int) -> str:
    words = segment.split()
    return " ".join(words[:6]) if words else f"step {index}"


def _stub_graph_answer(segments: Sequence[str]) -> str:
    """One node per segment, chained left to right.

    Labels are the segment's first six words, so the answer is predictable
    from the prompt alone and distinct segments map to distinct nodes.
    """
    nodes = []
    edges = []
    for i, segment in enumerate(segments, start=1):
        nodes.append(
            {
                "id": f"n{i}",
                "label": _stub_label(segment, i),
                "precondition": "network access" if i == 1 else f"foothold {i - 1}",
                "postcondition": f"foothold {i}",
            }
        )
        if i > 1:
            edges.append({"from": f"n{i - 1}", "to": f"n{i}", "label": "enables"})
    return json.dumps({"nodes": nodes, "edges": edges})


@dataclass
class StubTransport:
    """Deterministic in-process transport.

    Routes on the compiled-in prompt prefixes: extraction prompts are answered
    from the fixtures table (keyed by the raw description) or "{}" when the
    description is unknown; graph prompts get one node per context segment or
    report sentence; zoom prompts get back the context segment whose derived
    label matches the edge source. Every prompt is appended to calls so tests
    can count and inspect traffic.
    """

    fixtures: Mapping[str, str] = field(default_factory=dict)
    transport_id: str = "stub"
    max_prompt_tokens: int = 8192
    max_answer_tokens: int = 4096
    calls: list[str] = field(default_factory=list)

    def send(self, prompt: str) -> str:
        self.calls.append(prompt)
        if prompt.startswith(EXTRACTION_PROMPT_PREFIX):
            description = prompt[len(EXTRACTION_PROMPT_PREFIX):]
            if description.endswith(EXTRACTION_RETRY_SUFFIX):
                description = description[: -len(EXTRACTION_RETRY_SUFFIX)]
            return self.fixtures.get(description, "{}")
        if prompt.startswith(CVE_CHAIN_PROMPT_PREFIX):
            context = prompt[len(CVE_CHAIN_PROMPT_PREFIX):]
            segments = [s for s in context.split(SEPARATOR) if s.strip()]
            return _stub_graph_answer(segments)
        if prompt.startswith(REPORT_PROMPT_PREFIX):
            report = prompt[len(REPORT_PROMPT_PREFIX):]
            sentences = [s.strip() for s in report.split(".") if s.strip()]
            return _stub_graph_answer(sentences)
        if prompt.startswith(_ZOOM_HEAD):
            return self._zoom_answer(prompt)
        return '{"nodes": [], "edges": []}'

    def _zoom_answer(self, prompt: str) -> str:
        from_label = ""
        for line in prompt.splitlines():
            if line.startswith("Edge source: "):
                from_label = line[len("Edge source: "):]
                break
        marker = "Context:\n"
        context = prompt[prompt.index(marker) + len(marker):] if marker in prompt else ""
        for segment in context.split(SEPARATOR):
            if segment.strip() and _stub_label(segment, 0) == from_label:
                return segment
        return context


@dataclass
class ManualTransport:
    """File-exchange transport for a model driven by a human.

    Call n writes send_dir/prompt-<n>.txt and blocks until answer-<n>.txt
    appears, polling at poll_interval_s. The counter advances on every call,
    successful or not, so prompt/answer pairs never collide.
    """

    send_dir: Path
    timeout_s: float = 300.0
    poll_interval_s: float = 0.05
    transport_id: str = "manual"
    max_prompt_tokens: int = 8192
    max_answer_tokens: int = 4096
    _counter: int = field(default=0, init=False, repr=False)

    def __post_init__(self) -> None:
        self.send_dir = Path(self.send_dir)
        self.send_dir.mkdir(parents=True, exist_ok=True)

    def send(self, prompt: str) -> str:
        self._counter += 1
        n = self._counter
        (self.send_dir / f"prompt-{n}.txt").write_text(prompt, encoding="utf-8")
        answer_path = self.send_dir / f"answer-{n}.txt"
        deadline = time.monotonic() + self.timeout_s
        while time.monotonic() < deadline:
            if answer_path.exists():
                try:
                    return answer_path.read_text(encoding="utf-8")
                except OSError as exc:
                    raise TransportError(f"unreadable answer file {answer_path}: {exc}") from exc
            time.sleep(self.poll_interval_s)
        raise TransportTimeout(f"no answer-{n}.txt in {self.send_dir} after {self.timeout_s}s")


@dataclass
class ApiTransport:
    """Chat-completions HTTP transport.

    Sends the prompt as a single user message. Connection errors, 5xx and 429
    are treated as transient and retried max_retries times with exponential
    backoff; other HTTP errors fail immediately. The bearer key is optional
    for endpoints that do not authenticate.
    """

    url: str
    model: str
    key: str = ""
    timeout_s: float = 60.0
    max_retries: int = 2
    backoff_s: float = 0.5
    transport_id: str = ""
    max_prompt_tokens: int = 8192
    max_answer_tokens: int = 4096
    _session: requests.Session = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.transport_id:
            self.transport_id = f"api:{self.model}"
        self._session = requests.Session()

    @classmethod
    def from_env(cls, **overrides) -> "ApiTransport":
        url = os.environ.get(ENV_URL, "")
        model = os.environ.get(ENV_MODEL, "")
        missing = [name for name, value in ((ENV_URL, url), (ENV_MODEL, model)) if not value]
        if missing:
            raise TransportError(f"missing environment variables: {', '.join(missing)}")
        return cls(url=url, model=model, key=os.environ.get(ENV_KEY, ""), **overrides)

    def send(self, prompt: str) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": self.max_answer_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.key:
            headers["Authorization"] = f"Bearer {self.key}"
        attempts = self.max_retries + 1
        last_error = "no attempt made"
        for attempt in range(attempts):
            try:
                response = self._session.post(
                    self.url, json=payload, headers=headers, timeout=self.timeout_s
                )
            except requests.RequestException as exc:
                last_error = f"request failed: {exc}"
            else:
                if response.status_code == 200:
                    return self._parse(response)
                body = response.text[:200]
                if response.status_code >= 500 or response.status_code == 429:
                    last_error = f"endpoint returned {response.status_code}: {body}"
                else:
                    raise TransportError(f"endpoint returned {response.status_code}: {body}")
            if attempt < attempts - 1:
                time.sleep(self.backoff_s * (2**attempt))
        raise TransportError(last_error)

    def _parse(self, response: requests.Response) -> str:
        try:
            data = response.json()
            content = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion payload: {exc}") from exc
        if not isinstance(content, str):
            raise TransportError("completion content is not text")
        return content
