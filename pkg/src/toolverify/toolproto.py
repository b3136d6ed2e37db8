"""Multi-turn tool-call wire protocol.

Parses ``<tool_call>`` JSON blocks out of model text, dispatches them to
registered tools, and frames results as ``<tool_response>`` turns.  Parsing
never throws: malformed blocks come back as in-band error values.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from . import units as units_mod

__all__ = [
    "ToolCall",
    "MalformedToolCall",
    "ToolResult",
    "ToolRegistry",
    "parse_tool_calls",
    "render_tool_call",
    "render_tool_response",
    "dispatch",
    "default_registry",
]


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: dict


@dataclass(frozen=True)
class MalformedToolCall:
    offset: int
    cause: str


@dataclass(frozen=True)
class ToolResult:
    body: str
    ok: bool = True
    elapsed: float = 0.0


_BLOCK_RE = re.compile(r"<tool_call>\s*(.*?)\s*</tool_call>", re.DOTALL)


def parse_tool_calls(text: str) -> list[Union[ToolCall, MalformedToolCall]]:
    """Extract every <tool_call> block; bad JSON becomes MalformedToolCall."""
    out: list[Union[ToolCall, MalformedToolCall]] = []
    for m in _BLOCK_RE.finditer(text):
        try:
            obj = json.loads(m.group(1))
            if not isinstance(obj, dict) or not isinstance(obj.get("name"), str):
                raise ValueError("tool call must be an object with a 'name' string")
            args = obj.get("arguments", {})
            if not isinstance(args, dict):
                raise ValueError("'arguments' must be an object")
            out.append(ToolCall(obj["name"], args))
        except ValueError as exc:
            out.append(MalformedToolCall(m.start(), str(exc)))
    return out


def render_tool_call(call: ToolCall) -> str:
    payload = json.dumps({"name": call.name, "arguments": call.arguments}, ensure_ascii=False)
    return f"<tool_call>\n{payload}\n</tool_call>"


def render_tool_response(result: ToolResult) -> str:
    return f"<tool_response>\n{result.body}\n</tool_response>"


class ToolRegistry:
    """Name -> handler mapping. Handlers take (arguments, timeout_s) and
    return the response body string."""

    def __init__(self):
        self._tools: dict[str, Callable[[dict, float], str]] = {}

    def register(self, name: str, handler: Callable[[dict, float], str]) -> None:
        self._tools[name] = handler

    def names(self) -> list[str]:
        return sorted(self._tools)

    def get(self, name: str) -> Optional[Callable[[dict, float], str]]:
        return self._tools.get(name)


def _unit_conversion_handler(arguments: dict, timeout: float) -> str:
    req = units_mod.UnitConversionRequest(
        value=float(arguments["value"]),
        source_unit=str(arguments["source_unit"]),
        target_unit=str(arguments["target_unit"]),
    )
    return units_mod.render_tool_response(units_mod.convert(req))


def default_registry(executor=None) -> ToolRegistry:
    """Shipped registry: unit_conversion and, when an executor is supplied,
    python_interpreter."""
    reg = ToolRegistry()
    reg.register("unit_conversion", _unit_conversion_handler)
    if executor is not None:
        from .sandbox import ExecutionRequest

        def _python_handler(arguments: dict, timeout: float) -> str:
            req = ExecutionRequest(code=str(arguments.get("code", "")), timeout=timeout)
            envelope = executor.execute(req)
            return json.dumps(envelope, ensure_ascii=False)

        reg.register("python_interpreter", _python_handler)
    return reg


def dispatch(call: ToolCall, registry: ToolRegistry, budget: float = 10.0) -> ToolResult:
    """Run one tool call. Failures come back as ok=False results; the
    conversation continues and the model must recover."""
    start = time.monotonic()
    handler = registry.get(call.name)
    if handler is None:
        return ToolResult(
            body=f"Error: unknown tool {call.name!r}; available tools: {', '.join(registry.names())}",
            ok=False,
            elapsed=time.monotonic() - start,
        )
    try:
        body = handler(call.arguments, budget)
        return ToolResult(body=body, ok=True, elapsed=time.monotonic() - start)
    except Exception as exc:  # tool errors are conversation content, not crashes
        return ToolResult(
            body=f"Error: {type(exc).__name__}: {exc}",
            ok=False,
            elapsed=time.monotonic() - start,
        )
