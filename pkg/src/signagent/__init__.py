"""Agentic sign-language annotation: tools, knowledge graphs, orchestrator and task workflows."""

__version__ = "0.1.0"
