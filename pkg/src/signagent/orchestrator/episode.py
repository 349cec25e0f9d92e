"""Reason-act episode loop with an auditable, replayable trace.

Every backend turn yields a step document::

    {"thought": str,
     "action": {"type": "tool", "name": str, "arguments": {...}}
             | {"type": "final", "answer": {...}}}

The state handed to the backend holds the full transcript (OpenAI chat message
format, tool results as ``tool`` messages) plus structured observations.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Mapping, Protocol

import jsonschema

from ..errors import AuthError, MalformedStep, SchemaViolation, ToolError, TransportError, UnknownTool
from .registry import ToolRegistry

log = logging.getLogger(__name__)

DEFAULT_RETRIES = 2

STEP_SCHEMA = {
    "type": "object",
    "required": ["thought", "action"],
    "properties": {
        "thought": {"type": "string"},
        "action": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["type", "name", "arguments"],
                    "properties": {
                        "type": {"const": "tool"},
                        "name": {"type": "string", "minLength": 1},
                        "arguments": {"type": "object"},
                    },
                    "additionalProperties": False,
                },
                {
                    "type": "object",
                    "required": ["type", "answer"],
                    "properties": {"type": {"const": "final"}, "answer": {"type": "object"}},
                    "additionalProperties": False,
                },
            ]
        },
    },
    "additionalProperties": False,
}
_STEP_VALIDATOR = jsonschema.Draft202012Validator(STEP_SCHEMA)


def parse_step(raw: Any) -> dict[str, Any]:
    """Decode and validate a step document (dict or JSON text)."""
    doc = raw
    if isinstance(raw, (str, bytes)):
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedStep(f"step is not valid JSON: {exc}") from None
    errors = sorted(_STEP_VALIDATOR.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise MalformedStep(f"step document invalid: {_describe(errors[0])}")
    return doc


def _describe(error: jsonschema.ValidationError) -> str:
    # jsonschema messages embed the instance repr, whose key order would make replayed traces differ
    where = "/".join(map(str, error.absolute_path)) or "step"
    inst = error.instance
    if error.validator == "required":
        return f"{where}: {error.message}"
    if error.validator == "additionalProperties" and isinstance(inst, dict):
        allowed = error.schema.get("properties", {})
        return f"{where}: unexpected properties {sorted(k for k in inst if k not in allowed)}"
    if isinstance(inst, (dict, list)):
        return f"{where}: fails the {error.validator!r} constraint"
    return f"{where}: {error.message}"


@dataclass
class EpisodeState:
    """What the backend sees at step t (x_t)."""

    prompt: str
    messages: list[dict[str, Any]]
    observations: list[dict[str, Any]]
    tools: list[dict[str, Any]]
    context: dict[str, Any]
    invocation_count: int
    cap: int

    def results(self, tool: str) -> list[Any]:
        """Successful results of ``tool`` in call order."""
        return [o["result"] for o in self.observations if o["tool"] == tool and "error" not in o]


class DecisionBackend(Protocol):
    name: str

    def next_step(self, state: EpisodeState) -> Any: ...

    def to_step(self, raw: Any) -> dict[str, Any]: ...


@dataclass
class EpisodeTrace:
    prompt: str
    cap: int
    context: dict[str, Any] = field(default_factory=dict)
    backend: str = ""
    steps: list[dict[str, Any]] = field(default_factory=list)
    final: dict[str, Any] | None = None
    status: str = "running"
    invocation_count: int = 0
    rejection_reason: str | None = None

    @property
    def tool_calls(self) -> list[dict[str, Any]]:
        return [s for s in self.steps if s.get("kind") == "tool" and s.get("executed")]

    def to_dict(self) -> dict[str, Any]:
        return {
            "prompt": self.prompt,
            "cap": self.cap,
            "context": self.context,
            "backend": self.backend,
            "steps": self.steps,
            "final": self.final,
            "status": self.status,
            "invocation_count": self.invocation_count,
            "rejection_reason": self.rejection_reason,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "EpisodeTrace":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, allow_nan=False) + "\n"


def _jsonable(obj: Any) -> Any:
    # tool results must survive a JSON round trip so traces replay identically
    return json.loads(json.dumps(obj, sort_keys=True, allow_nan=False, default=_default))


def _default(obj: Any):
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, (set, frozenset, tuple)):
        return sorted(obj) if isinstance(obj, (set, frozenset)) else list(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def run_episode(
    prompt: str,
    backend: DecisionBackend,
    registry: ToolRegistry,
    cap: int,
    retries: int = DEFAULT_RETRIES,
    context: Mapping[str, Any] | None = None,
    system: str | None = None,
) -> tuple[dict[str, Any] | None, EpisodeTrace]:
    """Alternate backend steps and tool dispatch until a final answer or rejection.

    Returns ``(final answer or None, trace)``. Rejections (cap exceeded, more than
    ``retries`` consecutive malformed steps, auth/backend failure) never raise.
    """
    if cap < 1:
        raise ValueError("invocation cap N must be >= 1")
    ctx = dict(context or {})
    messages: list[dict[str, Any]] = []
    if system:
        messages.append({"role": "system", "content": system})
    messages.append({"role": "user", "content": prompt})
    observations: list[dict[str, Any]] = []
    trace = EpisodeTrace(prompt=prompt, cap=cap, context=_jsonable(ctx), backend=getattr(backend, "name", type(backend).__name__))
    tools = registry.specs()
    bad_in_a_row = 0
    t = 0

    def reject(reason: str) -> tuple[None, EpisodeTrace]:
        trace.status = "rejected"
        trace.rejection_reason = reason
        log.info("episode rejected: %s", reason)
        return None, trace

    while True:
        state = EpisodeState(prompt, list(messages), list(observations), tools, ctx, trace.invocation_count, cap)
        raw = None
        try:
            raw = backend.next_step(state)
            step = backend.to_step(raw)
        except AuthError as exc:
            trace.steps.append({"t": t, "kind": "error", "raw": _safe(raw), "error": f"AuthError: {exc}"})
            return reject(f"AuthError: {exc}")
        except MalformedStep as exc:
            bad_in_a_row += 1
            entry = {"t": t, "kind": "malformed", "raw": _safe(raw), "error": f"{type(exc).__name__}: {exc}"}
            if isinstance(exc, TransportError):
                entry["transport_error"] = True
            trace.steps.append(entry)
            t += 1
            if bad_in_a_row > retries:
                return reject(f"MalformedStep after {retries} retries: {exc}")
            messages.append({"role": "assistant", "content": raw if isinstance(raw, str) else json.dumps(_safe(raw))})
            messages.append(
                {"role": "user", "content": f"Invalid step ({exc}). Reply with one JSON step document: {{thought, action}}."}
            )
            continue
        except Exception as exc:  # a broken backend rejects the episode, never the run
            msg = str(exc) if isinstance(exc, ReplayedFailure) else f"{type(exc).__name__}: {exc}"
            trace.steps.append({"t": t, "kind": "error", "raw": _safe(raw), "error": msg})
            return reject(f"backend failure: {msg}")
        bad_in_a_row = 0
        action = step["action"]

        if action["type"] == "final":
            answer = _jsonable(action["answer"])
            trace.steps.append({"t": t, "kind": "final", "raw": _safe(raw), "thought": step["thought"], "answer": answer})
            trace.final = answer
            trace.status = "completed"
            return answer, trace

        name, args = action["name"], action["arguments"]
        entry = {"t": t, "kind": "tool", "raw": _safe(raw), "thought": step["thought"], "tool": name, "arguments": _safe(args)}
        if trace.invocation_count >= cap:
            entry["executed"] = False
            trace.steps.append(entry)
            return reject(f"CapExceeded: invocation {cap + 1} requested with cap N={cap}")

        trace.invocation_count += 1
        entry["executed"] = True
        call_id = f"call_{t}"
        obs: dict[str, Any] = {"t": t, "tool": name, "arguments": _safe(args)}
        try:
            result = _jsonable(registry.call(name, args))
            obs["result"] = result
            entry["result"] = result
            content = json.dumps(result, sort_keys=True)
        except (ToolError, SchemaViolation, UnknownTool, TypeError, ValueError) as exc:
            err = {"type": type(exc).__name__, "message": str(exc)}
            obs["error"] = err
            entry["error"] = err
            content = json.dumps({"error": err}, sort_keys=True)
        trace.steps.append(entry)
        observations.append(obs)
        messages.append(
            {
                "role": "assistant",
                "content": step["thought"],
                "tool_calls": [
                    {
                        "id": call_id,
                        "type": "function",
                        "function": {"name": name, "arguments": json.dumps(_safe(args), sort_keys=True)},
                    }
                ],
            }
        )
        messages.append({"role": "tool", "tool_call_id": call_id, "name": name, "content": content})
        t += 1


def _safe(obj: Any) -> Any:
    try:
        return _jsonable(obj)
    except (TypeError, ValueError):
        return repr(obj)


class ReplayedFailure(Exception):
    """A recorded backend failure raised again during replay."""


class ReplayBackend:
    """Feeds a trace's recorded backend outputs back through :func:`run_episode`."""

    name = "replay"

    def __init__(self, trace: EpisodeTrace | Mapping[str, Any], to_step=parse_step):
        steps = trace.steps if isinstance(trace, EpisodeTrace) else trace["steps"]
        self._entries = [s for s in steps if s.get("kind") in ("tool", "final", "malformed", "error")]
        self._pos = 0
        self._to_step = to_step

    def next_step(self, state: EpisodeState) -> Any:
        if self._pos >= len(self._entries):
            raise MalformedStep("replay exhausted")
        entry = self._entries[self._pos]
        self._pos += 1
        if entry.get("transport_error"):
            raise TransportError(entry["error"].removeprefix("TransportError: "))
        if entry["kind"] == "error":
            if entry["error"].startswith("AuthError: "):
                raise AuthError(entry["error"][len("AuthError: "):])
            raise ReplayedFailure(entry["error"])
        return entry["raw"]

    def to_step(self, raw: Any) -> dict[str, Any]:
        return self._to_step(raw)
