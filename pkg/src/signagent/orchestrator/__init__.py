"""Reason-act orchestration: tool registry, episode loop and decision backends."""

from .backends import POLICIES, ScriptedBackend, SequenceBackend, final_step, register_policy, scripted_backend, tool_step
from .episode import (
    DEFAULT_RETRIES,
    STEP_SCHEMA,
    DecisionBackend,
    EpisodeState,
    EpisodeTrace,
    ReplayBackend,
    parse_step,
    run_episode,
)
from .llm_http import HttpBackend, http_backend, message_to_step
from .registry import Tool, ToolRegistry, register_tool

__all__ = [
    "DEFAULT_RETRIES",
    "STEP_SCHEMA",
    "POLICIES",
    "DecisionBackend",
    "EpisodeState",
    "EpisodeTrace",
    "HttpBackend",
    "ReplayBackend",
    "ScriptedBackend",
    "SequenceBackend",
    "Tool",
    "ToolRegistry",
    "final_step",
    "http_backend",
    "message_to_step",
    "parse_step",
    "register_policy",
    "register_tool",
    "run_episode",
    "scripted_backend",
    "tool_step",
]
