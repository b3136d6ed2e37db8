"""Answer and verdict extraction from free-form model output.

Recovers the final answer from a candidate model's response (boxed LaTeX,
``Answer:`` lines, choice letters, trailing expressions) and the verdict
token from a verifier model's response.  All functions are pure and never
raise on malformed input.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

__all__ = [
    "Origin",
    "AnswerForm",
    "Completeness",
    "RawResponse",
    "ExtractedAnswer",
    "find_boxed",
    "extract_final_answer",
    "extract_verdict",
    "DEFAULT_REFUSAL_PHRASES",
]


class Origin(str, Enum):
    candidate_model = "candidate_model"
    verifier_model = "verifier_model"


class AnswerForm(str, Enum):
    boxed_latex = "boxed_latex"
    answer_line = "answer_line"
    choice_letter = "choice_letter"
    bare_tail = "bare_tail"
    none = "none"


class Completeness(str, Enum):
    complete = "complete"
    truncated = "truncated"
    repetitive = "repetitive"
    refusal = "refusal"


@dataclass(frozen=True)
class RawResponse:
    text: str
    origin: Origin = Origin.candidate_model


@dataclass(frozen=True)
class ExtractedAnswer:
    payload: str
    form: AnswerForm
    completeness: Completeness = Completeness.complete

    def __post_init__(self):
        # form == none exactly when there is no payload
        assert (self.form is AnswerForm.none) == (self.payload == "")


DEFAULT_REFUSAL_PHRASES = (
    "cannot answer",
    "can't answer",
    "unable to answer",
    "unanswerable",
    "i cannot provide",
    "no definitive answer",
)

_ANSWER_LINE_RE = re.compile(r"^\s*\**\s*(?:final\s+)?answer\s*\**\s*[:=]\s*(.+?)\s*$", re.IGNORECASE)
_CHOICE_RE = re.compile(r"^\(?([A-Ja-j])\)?\.?$")
# character set of a plausible trailing math expression
_MATHISH_RE = re.compile(r"^[\w\\{}()\[\]^+\-*/=.,%$!|<>~:; ]+$")


def find_boxed(text: str) -> list[str]:
    """All ``\\boxed{...}`` contents with balanced braces, in document order."""
    out = []
    i = 0
    n = len(text)
    while True:
        i = text.find(r"\boxed", i)
        if i < 0:
            break
        j = i + len(r"\boxed")
        while j < n and text[j] in " \t\n":
            j += 1
        if j >= n or text[j] != "{":
            i = j
            continue
        depth = 1
        k = j + 1
        while k < n and depth:
            if text[k] == "{":
                depth += 1
            elif text[k] == "}":
                depth -= 1
            k += 1
        if depth == 0:
            out.append(text[j + 1 : k - 1].strip())
            i = k
        else:
            break  # unbalanced: trailing truncation, no usable box
    return out


def _looks_repetitive(text: str, min_len: int = 20, min_repeats: int = 5) -> bool:
    # a >=20-char chunk repeated >=5 times back to back
    if len(text) < min_len * min_repeats:
        return False
    pat = re.compile(r"(.{%d,200}?)\1{%d,}" % (min_len, min_repeats - 1), re.DOTALL)
    return pat.search(text) is not None


def _looks_truncated(text: str) -> bool:
    stripped = text.rstrip()
    if not stripped:
        return False
    if stripped.count("{") != stripped.count("}"):
        return True
    if stripped.endswith("\\") or re.search(r"\\[a-zA-Z]+$", stripped):
        return True
    # ends mid-word with no sentence terminator
    return stripped[-1] not in ".!?}\")]'`$"


def _tail_expression(text: str) -> Optional[str]:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        return None
    tail = lines[-1].rstrip(".")
    tail = tail.strip()
    if not tail or len(tail) > 200:
        return None
    if _CHOICE_RE.match(tail):
        return tail
    if _MATHISH_RE.match(tail) and (any(c.isdigit() for c in tail) or "\\" in tail):
        return tail
    return None


def extract_final_answer(
    resp: RawResponse,
    refusal_phrases: tuple[str, ...] = DEFAULT_REFUSAL_PHRASES,
) -> ExtractedAnswer:
    """Extract the candidate's final answer.

    Priority: last balanced ``\\boxed{}`` > last ``Answer: ...`` line >
    trailing mathematical expression.  Completeness is judged heuristically
    (truncation, looping repetition, refusal phrasing).
    """
    text = resp.text.rstrip()
    low = text.lower()

    completeness = Completeness.complete
    if any(p in low for p in refusal_phrases):
        completeness = Completeness.refusal
    elif _looks_repetitive(text):
        completeness = Completeness.repetitive

    boxed = find_boxed(text)
    if boxed and boxed[-1]:
        return ExtractedAnswer(boxed[-1], AnswerForm.boxed_latex, completeness)

    for line in reversed(text.splitlines()):
        m = _ANSWER_LINE_RE.match(line)
        if m:
            payload = m.group(1).strip().rstrip(".")
            if not payload:
                continue
            form = AnswerForm.choice_letter if _CHOICE_RE.match(payload) else AnswerForm.answer_line
            if form is AnswerForm.choice_letter:
                payload = _CHOICE_RE.match(payload).group(1).upper()
            return ExtractedAnswer(payload, form, completeness)

    tail = _tail_expression(text)
    if completeness is Completeness.complete and _looks_truncated(text):
        completeness = Completeness.truncated
    if tail is not None:
        form = AnswerForm.choice_letter if _CHOICE_RE.match(tail) else AnswerForm.bare_tail
        if form is AnswerForm.choice_letter:
            tail = _CHOICE_RE.match(tail).group(1).upper()
        return ExtractedAnswer(tail, form, completeness)
    return ExtractedAnswer("", AnswerForm.none, completeness)


_VERDICT_TOKENS = {"correct": "Correct", "incorrect": "Incorrect"}


def extract_verdict(resp: RawResponse) -> Optional[str]:
    """Return "Correct"/"Incorrect" from the last verdict box, else None.

    Accepts both ``\\boxed{[Incorrect]}`` and ``\\boxed{Incorrect}``.
    """
    for content in reversed(find_boxed(resp.text)):
        token = content.strip().strip("[]").strip().lower()
        if token in _VERDICT_TOKENS:
            return _VERDICT_TOKENS[token]
    return None
