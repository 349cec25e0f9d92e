"""Deterministic decision backends: named scripted policies and fixed sequences."""

from __future__ import annotations

import importlib
from typing import Any, Callable, Iterable, Mapping

from ..errors import UnknownPolicy
from .episode import EpisodeState, parse_step

Policy = Callable[[EpisodeState, Mapping[str, Any]], Any]

POLICIES: dict[str, Policy] = {}


def register_policy(name: str) -> Callable[[Policy], Policy]:
    def deco(fn: Policy) -> Policy:
        POLICIES[name] = fn
        return fn

    return deco


class ScriptedBackend:
    """Wraps a policy: a pure function of (state, params) returning a step document."""

    def __init__(self, policy: Policy, params: Mapping[str, Any] | None = None, name: str = "scripted"):
        self.policy = policy
        self.params = dict(params or {})
        self.name = name

    def next_step(self, state: EpisodeState) -> Any:
        return self.policy(state, self.params)

    def to_step(self, raw: Any) -> dict[str, Any]:
        return parse_step(raw)


def scripted_backend(policy: str, **params: Any) -> ScriptedBackend:
    if policy not in POLICIES:
        # task policies live in the workflows package and register on import
        importlib.import_module("signagent.workflows")
    if policy not in POLICIES:
        raise UnknownPolicy(f"no scripted policy named {policy!r}; known: {sorted(POLICIES)}")
    return ScriptedBackend(POLICIES[policy], params, name=f"scripted:{policy}")


class SequenceBackend:
    """Emits a fixed list of raw outputs; exceptions in the list are raised.

    After the list is exhausted the last item repeats, which makes flooding and
    malformed-output loops easy to script.
    """

    name = "sequence"

    def __init__(self, outputs: Iterable[Any], to_step=parse_step):
        self.outputs = list(outputs)
        if not self.outputs:
            raise ValueError("SequenceBackend needs at least one output")
        self._pos = 0
        self._to_step = to_step

    def next_step(self, state: EpisodeState) -> Any:
        item = self.outputs[min(self._pos, len(self.outputs) - 1)]
        self._pos += 1
        if isinstance(item, BaseException):
            raise item
        if callable(item):
            return item(state)
        return item

    def to_step(self, raw: Any) -> dict[str, Any]:
        return self._to_step(raw)


def tool_step(name: str, arguments: Mapping[str, Any] | None = None, thought: str = "") -> dict[str, Any]:
    return {"thought": thought, "action": {"type": "tool", "name": name, "arguments": dict(arguments or {})}}


def final_step(answer: Mapping[str, Any], thought: str = "") -> dict[str, Any]:
    return {"thought": thought, "action": {"type": "final", "answer": dict(answer)}}
