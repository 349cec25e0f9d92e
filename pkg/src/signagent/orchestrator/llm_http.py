"""OpenAI-compatible chat-completions backend with tool calling."""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from typing import Any, Mapping

import httpx

from ..errors import AuthError, ConfigError, MalformedStep, ResponseSchemaError, TransportError
from .episode import EpisodeState, parse_step

log = logging.getLogger(__name__)

ENDPOINT_ENV = "SIGNAGENT_LLM_ENDPOINT"
API_KEY_ENV = "SIGNAGENT_LLM_API_KEY"

STEP_INSTRUCTIONS = (
    "Call exactly one tool per turn using the provided functions. When finished, reply with a JSON object "
    '{"thought": "...", "action": {"type": "final", "answer": {...}}} and nothing else.'
)

_FENCE = re.compile(r"^```(?:json)?\s*(.*?)\s*```$", re.S)
_RETRY_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


def message_to_step(message: Mapping[str, Any]) -> dict[str, Any]:
    """Convert an assistant message into a step document.

    A tool call becomes a tool action (first call only); otherwise the content
    must itself be a JSON step document.
    """
    if not isinstance(message, Mapping):
        raise ResponseSchemaError("response message is not an object")
    thought = message.get("content") or ""
    calls = message.get("tool_calls") or []
    if calls:
        fn = calls[0].get("function") or {}
        name = fn.get("name")
        raw_args = fn.get("arguments", "{}")
        try:
            args = json.loads(raw_args) if isinstance(raw_args, str) else raw_args
        except json.JSONDecodeError as exc:
            raise ResponseSchemaError(f"tool call arguments are not JSON: {exc}") from None
        if not isinstance(name, str) or not isinstance(args, dict):
            raise ResponseSchemaError("tool call lacks a name or object arguments")
        return {"thought": thought if isinstance(thought, str) else "", "action": {"type": "tool", "name": name, "arguments": args}}
    if not isinstance(thought, str) or not thought.strip():
        raise ResponseSchemaError("empty response without a tool call")
    text = thought.strip()
    m = _FENCE.match(text)
    if m:
        text = m.group(1)
    try:
        return parse_step(text)
    except MalformedStep as exc:
        raise ResponseSchemaError(f"free text where a step document is required: {exc}") from None


class HttpBackend:
    name = "http"

    def __init__(
        self,
        endpoint: str,
        api_key: str,
        model: str,
        max_retries: int = 2,
        backoff: float = 0.5,
        timeout: float = 60.0,
        parallelism: int = 4,
        temperature: float | None = 0.0,
        client: httpx.Client | None = None,
    ):
        if max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        self.url = endpoint.rstrip("/")
        if not self.url.endswith("/chat/completions"):
            self.url += "/chat/completions"
        self.api_key = api_key
        self.model = model
        self.max_retries = max_retries
        self.backoff = backoff
        self.temperature = temperature
        self._client = client or httpx.Client(timeout=timeout)
        self._slots = threading.BoundedSemaphore(max(1, parallelism))
        self.requests_sent = 0

    def payload(self, state: EpisodeState) -> dict[str, Any]:
        messages = list(state.messages)
        if not messages or messages[0].get("role") != "system":
            messages.insert(0, {"role": "system", "content": STEP_INSTRUCTIONS})
        body: dict[str, Any] = {"model": self.model, "messages": messages}
        if state.tools:
            body["tools"] = state.tools
            body["tool_choice"] = "auto"
        if self.temperature is not None:
            body["temperature"] = self.temperature
        return body

    def next_step(self, state: EpisodeState) -> Any:
        body = self.payload(state)
        headers = {"Authorization": f"Bearer {self.api_key}", "Content-Type": "application/json"}
        last = ""
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with self._slots:
                    self.requests_sent += 1
                    resp = self._client.post(self.url, json=body, headers=headers)
            except httpx.HTTPError as exc:
                last = f"{type(exc).__name__}: {exc}"
                log.warning("LLM request failed (attempt %d): %s", attempt + 1, last)
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"endpoint refused credentials (HTTP {resp.status_code})")
            if resp.status_code in _RETRY_STATUS:
                last = f"HTTP {resp.status_code}"
                log.warning("LLM request failed (attempt %d): %s", attempt + 1, last)
                continue
            if resp.status_code >= 400:
                raise ResponseSchemaError(f"endpoint rejected request: HTTP {resp.status_code}")
            try:
                data = resp.json()
                return data["choices"][0]["message"]
            except (ValueError, KeyError, IndexError, TypeError):
                raise ResponseSchemaError("response is not a chat-completions document") from None
        raise TransportError(f"gave up after {self.max_retries + 1} attempts: {last}")

    def to_step(self, raw: Any) -> dict[str, Any]:
        return message_to_step(raw)

    def close(self) -> None:
        self._client.close()


def http_backend(
    endpoint: str | None = None,
    model: str = "gpt-4o",
    api_key: str | None = None,
    **kwargs: Any,
) -> HttpBackend:
    """Build the backend; endpoint and key fall back to the environment."""
    endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
    api_key = api_key or os.environ.get(API_KEY_ENV)
    if not endpoint:
        raise ConfigError(f"no LLM endpoint configured (set {ENDPOINT_ENV})")
    if not api_key:
        raise ConfigError(f"no LLM credential configured (set {API_KEY_ENV})")
    return HttpBackend(endpoint, api_key, model, **kwargs)
