"""Tool registry with schema-validated dispatch."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Mapping

import jsonschema

from ..errors import DuplicateTool, SchemaViolation, ToolError, UnknownTool


@dataclass(frozen=True)
class Tool:
    name: str
    schema: Mapping[str, Any]
    handler: Callable[..., Any]
    description: str = ""

    def spec(self) -> dict[str, Any]:
        """OpenAI-style function declaration."""
        return {
            "type": "function",
            "function": {"name": self.name, "description": self.description, "parameters": dict(self.schema)},
        }


class ToolRegistry:
    def __init__(self):
        self._tools: dict[str, Tool] = {}

    def register(self, name: str, schema: Mapping[str, Any], handler: Callable[..., Any], description: str = "") -> None:
        if name in self._tools:
            raise DuplicateTool(f"tool {name!r} already registered")
        jsonschema.Draft202012Validator.check_schema(schema)
        self._tools[name] = Tool(name, schema, handler, description)

    def names(self) -> list[str]:
        return sorted(self._tools)

    def __contains__(self, name: str) -> bool:
        return name in self._tools

    def get(self, name: str) -> Tool:
        if name not in self._tools:
            raise UnknownTool(f"no tool named {name!r}")
        return self._tools[name]

    def specs(self) -> list[dict[str, Any]]:
        return [self._tools[n].spec() for n in self.names()]

    def validate(self, name: str, arguments: Mapping[str, Any]) -> None:
        tool = self.get(name)
        errors = list(jsonschema.Draft202012Validator(tool.schema).iter_errors(arguments))
        if errors:
            fields = []
            for e in errors:
                where = "/".join(map(str, e.absolute_path))
                if e.validator == "required":
                    fields.extend(r for r in e.validator_value if not isinstance(e.instance, dict) or r not in e.instance)
                else:
                    fields.append(where or e.validator)
            raise SchemaViolation(fields, f"{name}: invalid arguments: {'; '.join(e.message for e in errors)}")

    def call(self, name: str, arguments: Mapping[str, Any]) -> Any:
        """Validate then dispatch; handler failures surface as :class:`ToolError`."""
        self.validate(name, arguments)
        try:
            return self._tools[name].handler(**arguments)
        except Exception as exc:  # tool failures are data for the agent, not crashes
            raise ToolError(f"{type(exc).__name__}: {exc}") from exc


def register_tool(registry: ToolRegistry, name: str, schema: Mapping[str, Any], handler: Callable[..., Any], description: str = "") -> None:
    registry.register(name, schema, handler, description)
