"""Unit conversion tool: dimensional analysis over SI base dimensions.

The registry (prefixes, base/derived units, aliases) ships as a data file
so the service and the test suite agree bit-exactly.  Conversion constants
are CODATA-2018 defined values.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Optional

__all__ = [
    "UnknownUnit",
    "DimensionMismatch",
    "UnitExpr",
    "Quantity",
    "UnitConversionRequest",
    "parse_unit",
    "convert",
    "render_tool_response",
]

_DIMS = ("length", "mass", "time", "current", "temperature", "amount", "luminosity")


class UnknownUnit(ValueError):
    def __init__(self, token: str):
        super().__init__(f"unknown unit: {token!r}")
        self.token = token


class DimensionMismatch(ValueError):
    def __init__(self, source_dim, target_dim):
        super().__init__(f"incompatible dimensions: {source_dim} vs {target_dim}")
        self.source_dim = source_dim
        self.target_dim = target_dim


def _load_registry() -> dict:
    with resources.files("toolverify.data").joinpath("units.json").open("r", encoding="utf-8") as f:
        return json.load(f)


_REGISTRY = _load_registry()
_PREFIXES = _REGISTRY["prefixes"]
_UNITS = _REGISTRY["units"]
_ALIASES = _REGISTRY["aliases"]


@dataclass(frozen=True)
class UnitExpr:
    """Product of named units with integer exponents, reduced to a scale
    factor relative to coherent SI and a dimension vector."""

    factor: float
    dims: tuple[int, ...]               # exponents over _DIMS
    terms: tuple[tuple[str, int], ...]  # (long name, exponent) in source order

    def long_form(self) -> str:
        num = [t for t in self.terms if t[1] > 0]
        den = [t for t in self.terms if t[1] < 0]

        def render(name: str, exp: int) -> str:
            e = abs(exp)
            return name if e == 1 else f"{name}^{e}"

        parts = " * ".join(render(n, e) for n, e in num) or "1"
        for n, e in den:
            parts += f" / {render(n, e)}"
        return parts


@dataclass(frozen=True)
class Quantity:
    value: float
    unit: UnitExpr


@dataclass(frozen=True)
class UnitConversionRequest:
    value: float
    source_unit: str
    target_unit: str

    def __post_init__(self):
        assert self.source_unit and self.target_unit


def _resolve_token(token: str) -> tuple[float, dict, str]:
    """Resolve one unit token to (factor, dims, long name)."""
    for candidate in (token, _ALIASES.get(token), _ALIASES.get(token.lower())):
        if candidate and candidate in _UNITS:
            u = _UNITS[candidate]
            return u["factor"], u["dims"], u["long"]
    # SI prefix + unit
    for plen in (2, 1):
        pref, rest = token[:plen], token[plen:]
        if pref in _PREFIXES and rest:
            base = rest if rest in _UNITS else _ALIASES.get(rest) or _ALIASES.get(rest.lower())
            if base and base in _UNITS:
                u = _UNITS[base]
                return (
                    _PREFIXES[pref]["factor"] * u["factor"],
                    u["dims"],
                    _PREFIXES[pref]["long"] + u["long"],
                )
    raise UnknownUnit(token)


_TERM_RE = re.compile(r"^(?P<name>[A-Za-zµΩÅ_]+)(?:\^?(?P<exp>-?\d+))?$")


def parse_unit(text: str) -> UnitExpr:
    """Parse a unit string like "kJ/mol", "m^2", "N*m" into a UnitExpr."""
    s = text.strip().replace("\\", "/").replace("·", "*").replace("**", "^")
    if not s:
        raise UnknownUnit(text)
    factor = 1.0
    dims = [0] * len(_DIMS)
    terms: list[tuple[str, int]] = []
    sign = 1
    for piece in re.split(r"([*/])", s):
        piece = piece.strip()
        if piece == "*" or piece == "":
            continue
        if piece == "/":
            sign = -1
            continue
        m = _TERM_RE.match(piece)
        if not m:
            raise UnknownUnit(piece)
        exp = sign * int(m.group("exp") or 1)
        f, d, long = _resolve_token(m.group("name"))
        factor *= f ** exp
        for i, dim in enumerate(_DIMS):
            dims[i] += d.get(dim, 0) * exp
        terms.append((long, exp))
        sign = 1  # '/' binds only the term that follows it
    return UnitExpr(factor, tuple(dims), tuple(terms))


def convert(req: UnitConversionRequest) -> Quantity:
    """Convert a value between dimensionally compatible units."""
    src = parse_unit(req.source_unit)
    dst = parse_unit(req.target_unit)
    if src.dims != dst.dims:
        raise DimensionMismatch(src.dims, dst.dims)
    # ratio first: value * (src/dst) — the wire format's reference rounding
    return Quantity(req.value * (src.factor / dst.factor), dst)


def render_tool_response(q: Quantity) -> str:
    """Wire format of the unit tool's reply, e.g.
    ``Unit parsed value: 4.369056352122534e+22 electron_volt / mole``."""
    return f"Unit parsed value: {q.value!r} {q.unit.long_form()}"
