"""Answer equivalence: numeric tolerance, light symbolic normalization,
multi-part answers, multiple choice, strings, and unit forgiveness.

``parse_answer`` turns an extracted answer string into an ``AnswerValue``;
``is_equivalent`` compares two parsed values under an ``EquivConfig``;
``verify_by_rubric`` runs the full no-LLM decision and signals
``needs_tools`` when the comparison is beyond in-process arithmetic.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from decimal import Decimal, ROUND_HALF_UP
from enum import Enum
from typing import Optional

from .extract import (
    AnswerForm,
    Completeness,
    RawResponse,
    extract_final_answer,
)

__all__ = [
    "AnswerKind",
    "AnswerValue",
    "EquivConfig",
    "RubricOutcome",
    "ParseError",
    "parse_answer",
    "evaluate_expression",
    "is_equivalent",
    "verify_by_rubric",
]


class AnswerKind(str, Enum):
    number = "number"
    expression = "expression"
    choice = "choice"
    text = "text"
    tuple = "tuple"


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_open: bool
    hi_open: bool


@dataclass(frozen=True)
class AnswerValue:
    kind: AnswerKind
    source_text: str
    numeric_value: Optional[float] = None
    parts: tuple["AnswerValue", ...] = ()
    unit: Optional[str] = None          # normalized unit suffix, e.g. "km", "kj/mol"
    interval: Optional[Interval] = None # set on kind=expression for interval notation
    normalized: str = ""

    def __post_init__(self):
        if self.kind is AnswerKind.number:
            assert self.numeric_value is not None and math.isfinite(self.numeric_value)
        if self.kind is AnswerKind.tuple:
            assert len(self.parts) >= 2


@dataclass(frozen=True)
class EquivConfig:
    decimal_round_places: int = 2
    rel_tol: float = 1e-4
    order_sensitive: bool = False
    strip_units: bool = True

    def __post_init__(self):
        assert self.decimal_round_places >= 0 and self.rel_tol > 0


class RubricOutcome(str, Enum):
    correct = "Correct"
    incorrect = "Incorrect"
    needs_tools = "needs_tools"


class ParseError(ValueError):
    pass


# ---------------------------------------------------------------------------
# numeric expression evaluation
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)(?P<exp>[eE][+-]?\d+)?"
    r"|(?P<name>[A-Za-z_][A-Za-z_]*)"
    r"|(?P<op>[-+*/^(),]))"
)

_CONSTANTS = {"pi": math.pi, "e": math.e}
_FUNCTIONS = {
    "sqrt": math.sqrt,
    "abs": abs,
    "exp": math.exp,
    "ln": math.log,
    "log": math.log10,
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
}


def _tokenize(s: str) -> list:
    tokens = []
    pos = 0
    while pos < len(s):
        m = _TOKEN_RE.match(s, pos)
        if not m or m.end() == m.start():
            if s[pos:].strip() == "":
                break
            raise ParseError(f"bad character at {pos}: {s[pos:]!r}")
        if m.group("num") is not None:
            tokens.append(("num", float(m.group("num") + (m.group("exp") or ""))))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name")))
        else:
            tokens.append(("op", m.group("op")))
        pos = m.end()
    return tokens


class _Parser:
    """Recursive-descent evaluator: + - * / ^, implicit multiplication,
    sqrt/exp/log functions, pi and e."""

    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, op):
        kind, val = self.take()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}")

    def parse(self) -> float:
        v = self.expr()
        if self.i != len(self.toks):
            raise ParseError("trailing tokens")
        return v

    def expr(self) -> float:
        kind, val = self.peek()
        neg = False
        while kind == "op" and val in "+-":
            self.take()
            if val == "-":
                neg = not neg
            kind, val = self.peek()
        v = self.term()
        if neg:
            v = -v
        while True:
            kind, val = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                rhs = self.term()
                v = v + rhs if val == "+" else v - rhs
            else:
                return v

    def term(self) -> float:
        v = self.power()
        while True:
            kind, val = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                rhs = self.power()
                if val == "/":
                    if rhs == 0:
                        raise ParseError("division by zero")
                    v = v / rhs
                else:
                    v = v * rhs
            elif kind == "num" or kind == "name" or (kind == "op" and val == "("):
                v = v * self.power()  # implicit multiplication
            else:
                return v

    def power(self) -> float:
        base = self.unary()
        kind, val = self.peek()
        if kind == "op" and val == "^":
            self.take()
            exponent = self.power()  # right associative
            try:
                return math.pow(base, exponent)
            except ValueError as exc:
                raise ParseError(str(exc))
        return base

    def unary(self) -> float:
        kind, val = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            v = self.unary()
            return -v if val == "-" else v
        return self.primary()

    def primary(self) -> float:
        kind, val = self.take()
        if kind == "num":
            return val
        if kind == "name":
            if val in _CONSTANTS:
                return _CONSTANTS[val]
            if val in _FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                try:
                    return _FUNCTIONS[val](arg)
                except ValueError as exc:
                    raise ParseError(str(exc))
            raise ParseError(f"unknown identifier {val!r}")
        if kind == "op" and val == "(":
            v = self.expr()
            self.expect(")")
            return v
        raise ParseError(f"unexpected token {val!r}")


def _replace_braced_command(s: str, command: str, render) -> str:
    """Rewrite every ``command{a}{b}...`` (balanced braces) via render(args)."""
    nargs = render.__code__.co_argcount
    while True:
        i = s.find(command)
        if i < 0:
            return s
        j = i + len(command)
        args = []
        for _ in range(nargs):
            while j < len(s) and s[j] in " \t":
                j += 1
            if j >= len(s) or s[j] != "{":
                return s  # malformed; leave as-is
            depth, k = 1, j + 1
            while k < len(s) and depth:
                if s[k] == "{":
                    depth += 1
                elif s[k] == "}":
                    depth -= 1
                k += 1
            if depth:
                return s
            args.append(s[j + 1 : k - 1])
            j = k
        s = s[:i] + render(*args) + s[j:]


_LATEX_DROP = (r"\left", r"\right", r"\,", r"\;", r"\!", r"\limits", r"\displaystyle")


def _latexish_to_plain(s: str) -> str:
    s = s.replace("−", "-").replace("–", "-").replace("×", "*").replace("÷", "/")
    s = s.replace("·", "*").replace("√", "sqrt")
    s = s.replace(r"\%", "%")
    for d in _LATEX_DROP:
        s = s.replace(d, "")
    s = re.sub(r"\\(?:text|mathrm|mathbf|mathit|operatorname)\s*{([^{}]*)}", r"\1", s)
    for frac in (r"\frac", r"\dfrac", r"\tfrac"):
        s = _replace_braced_command(s, frac, lambda a, b: f"(({a})/({b}))")
    s = re.sub(r"\\sqrt\s*\[([^\]]*)\]", r"\\nthroot{\1}", s)
    s = _replace_braced_command(s, r"\nthroot", lambda n, x: f"(({x})^(1/({n})))")
    s = _replace_braced_command(s, r"\sqrt", lambda x: f"sqrt({x})")
    s = s.replace(r"\cdot", "*").replace(r"\times", "*").replace(r"\div", "/")
    s = s.replace(r"\pi", " pi ").replace("^{", "^(")
    s = s.replace("{", "(").replace("}", ")")
    s = s.replace("~", " ").replace("$", " ")
    s = re.sub(r"(?<=[\d)])\s*%", "/100", s)
    return s


def evaluate_expression(text: str) -> float:
    """Numerically evaluate a plain or light-LaTeX math expression.

    Raises ParseError when the text is not a closed-form numeric expression.
    """
    plain = _latexish_to_plain(text)
    value = _Parser(_tokenize(plain)).parse()
    if not math.isfinite(value):
        raise ParseError("non-finite result")
    return value


# ---------------------------------------------------------------------------
# parse_answer
# ---------------------------------------------------------------------------

_CHOICE_RE = re.compile(r"^\(?([A-Ja-j])\)?\.?$")
_NUMBER_UNIT_RE = re.compile(
    r"^(?P<num>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)\s*"
    r"(?P<unit>[A-Za-zµΩ°%][A-Za-zµΩ°0-9.]*(?:\s*[/\\*·]\s*[A-Za-zµΩ°][A-Za-zµΩ°0-9.]*)*)$"
)
_INTERVAL_RE = re.compile(r"^(?P<lo_br>[\[(])(?P<lo>[^,]+),(?P<hi>[^,]+)(?P<hi_br>[\])])$")


def _split_top_level(s: str, sep: str = ",") -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in s:
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def _normalize_text(s: str) -> str:
    s = re.sub(r"\\(?:text|mathrm|mathbf|mathit)\s*{([^{}]*)}", r"\1", s)
    s = s.replace("$", " ").replace("~", " ")
    s = re.sub(r"\s+", " ", s).strip().strip('"').strip("'").rstrip(".")
    return s.lower()


def _normalize_unit(u: str) -> str:
    u = u.replace("\\", "/").replace("·", "*")
    u = re.sub(r"\s+", "", u)
    return u.lower()


def parse_answer(text: str) -> AnswerValue:
    """Parse an answer string into a typed value.

    Falls back to kind=text; never raises.
    """
    raw = text
    s = text.strip()
    s = re.sub(r"^\\\[(.*)\\\]$", r"\1", s, flags=re.DOTALL)
    s = re.sub(r"^\\\((.*)\\\)$", r"\1", s, flags=re.DOTALL)
    s = s.strip().strip("$").strip()
    if not s:
        return AnswerValue(AnswerKind.text, raw, normalized="")

    m = _CHOICE_RE.match(s)
    if m:
        return AnswerValue(AnswerKind.choice, raw, normalized=m.group(1).upper())

    # interval notation with at least one square bracket: unambiguous
    m = _INTERVAL_RE.match(s.replace(" ", "")) if ("[" in s or "]" in s) else None
    if m:
        try:
            lo = evaluate_expression(m.group("lo"))
            hi = evaluate_expression(m.group("hi"))
            return AnswerValue(
                AnswerKind.expression,
                raw,
                interval=Interval(lo, hi, m.group("lo_br") == "(", m.group("hi_br") == ")"),
                normalized=_normalize_text(s),
            )
        except ParseError:
            pass

    parts = [p for p in _split_top_level(s) if p.strip()]
    if len(parts) >= 2:
        return AnswerValue(
            AnswerKind.tuple,
            raw,
            parts=tuple(parse_answer(p) for p in parts),
            normalized=_normalize_text(s),
        )

    try:
        value = evaluate_expression(s)
        return AnswerValue(AnswerKind.number, raw, numeric_value=value, normalized=repr(value))
    except ParseError:
        pass

    m = _NUMBER_UNIT_RE.match(_latexish_to_plain(s).strip())
    if m:
        return AnswerValue(
            AnswerKind.number,
            raw,
            numeric_value=float(m.group("num")),
            unit=_normalize_unit(m.group("unit")),
            normalized=m.group("num"),
        )

    # mathy but unevaluable: keep as expression so the rubric can escalate
    if re.search(r"\\[a-zA-Z]+|[=^_]|\d.*[+*/-].*\d", s):
        return AnswerValue(AnswerKind.expression, raw, normalized=_normalize_text(s))
    return AnswerValue(AnswerKind.text, raw, normalized=_normalize_text(s))


# ---------------------------------------------------------------------------
# equivalence
# ---------------------------------------------------------------------------


def _round_half_away(x: float, places: int) -> Decimal:
    q = Decimal(1).scaleb(-places)
    return Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP)


def _numbers_match(a: float, b: float, cfg: EquivConfig) -> bool:
    if a == b:
        return True
    if _round_half_away(a, cfg.decimal_round_places) == _round_half_away(b, cfg.decimal_round_places):
        return True
    return abs(a - b) <= cfg.rel_tol * max(abs(a), abs(b))


def _tuple_match(cand: tuple, ref: tuple, cfg: EquivConfig) -> bool:
    if len(cand) != len(ref):
        return False
    if cfg.order_sensitive:
        return all(is_equivalent(c, r, cfg) for c, r in zip(cand, ref))
    # order-free: backtracking perfect matching, all parts must pair up
    used = [False] * len(ref)

    def match(i: int) -> bool:
        if i == len(cand):
            return True
        for j, r in enumerate(ref):
            if not used[j] and is_equivalent(cand[i], r, cfg):
                used[j] = True
                if match(i + 1):
                    return True
                used[j] = False
        return False

    return match(0)


def is_equivalent(cand: AnswerValue, ref: AnswerValue, cfg: EquivConfig = EquivConfig()) -> bool:
    """Decide equivalence of two parsed answers under the rubric rules."""
    ck, rk = cand.kind, ref.kind

    if ck is AnswerKind.tuple or rk is AnswerKind.tuple:
        if ck is not rk:
            return False
        return _tuple_match(cand.parts, ref.parts, cfg)

    if cand.interval is not None or ref.interval is not None:
        if cand.interval is None or ref.interval is None:
            return False
        a, b = cand.interval, ref.interval
        return (
            _numbers_match(a.lo, b.lo, cfg)
            and _numbers_match(a.hi, b.hi, cfg)
            and a.lo_open == b.lo_open
            and a.hi_open == b.hi_open
        )

    if ck is AnswerKind.number and rk is AnswerKind.number:
        if cand.unit and ref.unit and cand.unit != ref.unit:
            return False  # same-dimension conversion is the tool path's job
        if (cand.unit or ref.unit) and not cfg.strip_units and cand.unit != ref.unit:
            return False
        return _numbers_match(cand.numeric_value, ref.numeric_value, cfg)

    if ck is AnswerKind.choice and rk is AnswerKind.choice:
        return cand.normalized == ref.normalized

    if AnswerKind.choice in (ck, rk):
        choice, other = (cand, ref) if ck is AnswerKind.choice else (ref, cand)
        if other.kind is AnswerKind.text:
            words = re.findall(r"[a-j]\b", other.normalized)
            if choice.normalized.lower() in words:
                return True
            return choice.normalized.lower() == other.normalized
        return False

    if ck is AnswerKind.text and rk is AnswerKind.text:
        return cand.normalized == ref.normalized

    if AnswerKind.expression in (ck, rk):
        return cand.normalized == ref.normalized and cand.normalized != ""

    # number vs text: a reference option's content may embed the value
    num, other = (cand, ref) if ck is AnswerKind.number else (ref, cand)
    try:
        return _numbers_match(num.numeric_value, evaluate_expression(other.source_text), cfg)
    except ParseError:
        return False


# ---------------------------------------------------------------------------
# rubric verification
# ---------------------------------------------------------------------------


def _pairwise_equivalent(values: list[AnswerValue], cfg: EquivConfig) -> bool:
    return all(
        is_equivalent(values[i], values[j], cfg)
        for i in range(len(values))
        for j in range(i + 1, len(values))
    )


def _comparable(cand: AnswerValue, ref: AnswerValue) -> bool:
    """False when in-process comparison can't be trusted and tools are needed."""
    if AnswerKind.expression in (cand.kind, ref.kind) and not (cand.interval and ref.interval):
        return False
    if (
        cand.kind is AnswerKind.number
        and ref.kind is AnswerKind.number
        and cand.unit
        and ref.unit
        and cand.unit != ref.unit
    ):
        return False
    if cand.kind is AnswerKind.tuple and ref.kind is AnswerKind.tuple:
        return all(_comparable(c, r) for c in cand.parts for r in ref.parts)
    return True


def verify_by_rubric(task, cfg: EquivConfig = EquivConfig()) -> RubricOutcome:
    """Run the no-LLM verification rubric over a VerificationTask.

    Returns needs_tools when either side resists numeric parsing (deep
    symbolic work or cross-unit conversion), which the verifier loop uses
    as its escalation signal.
    """
    extracted = extract_final_answer(task.candidate)
    if extracted.completeness is not Completeness.complete:
        return RubricOutcome.incorrect
    cand = parse_answer(extracted.payload)
    refs = [parse_answer(r) for r in task.references]

    if any(not _comparable(cand, r) for r in refs):
        return RubricOutcome.needs_tools

    def covers(ref: AnswerValue) -> bool:
        # a tuple candidate may satisfy a scalar reference with one of its parts
        if is_equivalent(cand, ref, cfg):
            return True
        if cand.kind is AnswerKind.tuple and ref.kind is not AnswerKind.tuple:
            return any(is_equivalent(p, ref, cfg) for p in cand.parts)
        return False

    if len(refs) == 1 or _pairwise_equivalent(refs, cfg):
        ok = any(covers(r) for r in refs)
    else:
        ok = all(covers(r) for r in refs)
    return RubricOutcome.correct if ok else RubricOutcome.incorrect
