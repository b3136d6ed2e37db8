"""Data curation: multi-annotator majority voting with escalation, error
taxonomy bookkeeping, long-tail quota planning, iterative hard-case
synthesis, and cold-start trace filtering with loss-mask emission.

Every stage reads/writes JSONL keyed by task id so runs are resumable.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

__all__ = [
    "ERROR_TAXONOMY",
    "AnnotationRecord",
    "ColdStartTrace",
    "SynthesisState",
    "majority_annotate",
    "classify_error",
    "longtail_sample_plan",
    "synthesize_hard",
    "filter_coldstart",
    "count_tokens",
    "read_jsonl",
    "write_jsonl",
]

# 15-category error taxonomy with observed priors (fractions sum to 1.0)
ERROR_TAXONOMY: dict[str, float] = {
    "Calculation Inaccuracy": 0.25089,
    "Comparison Judgment Error": 0.19618,
    "Format Error": 0.16085,
    "Incomplete Answer Error": 0.15957,
    "Precision/Boundary Error": 0.07843,
    "Invalid Query": 0.06007,
    "Incorrect Simplification": 0.02938,
    "Constraint Violation": 0.02166,
    "Missing Final Result": 0.01836,
    "Refusal or Inconclusive Response": 0.01355,
    "Extraneous Content Error": 0.00677,
    "Self-Correction Failure": 0.00285,
    "Truncated Response": 0.00085,
    "Garbled or Corrupted Output": 0.00046,
    "Meaningless Repetition Error": 0.00013,
}

UNCLASSIFIED = "unclassified"


def read_jsonl(path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# majority-vote annotation
# ---------------------------------------------------------------------------


@dataclass
class AnnotationRecord:
    task_id: str
    votes: list[list[Optional[str]]]   # annotators x samples; None = abstention
    majority: str
    differing_count: int
    in_disagreement_set: bool
    escalated: bool
    final_label: str
    judge_votes: list[str] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "votes": self.votes,
            "majority": self.majority,
            "differing_count": self.differing_count,
            "in_disagreement_set": self.in_disagreement_set,
            "escalated": self.escalated,
            "final_label": self.final_label,
            "judge_votes": self.judge_votes,
            "flags": self.flags,
        }


def _majority(labels: Sequence[str]) -> str:
    # ties break toward Incorrect: a doubtful label must not reward
    counts = Counter(labels)
    if counts.get("Correct", 0) > counts.get("Incorrect", 0):
        return "Correct"
    return "Incorrect"


def majority_annotate(
    task: dict,
    annotators: Sequence[Callable[[dict], str]],
    samples: int = 3,
    judge: Optional[Callable[[dict], str]] = None,
    judge_votes: int = 3,
    escalation_threshold: int = 3,
) -> AnnotationRecord:
    """Collect len(annotators) x samples votes; escalate to the judge when
    more than ``escalation_threshold`` votes differ from the majority.

    Annotator failures are recorded as abstentions; the record is flagged
    when more than two votes are missing.
    """
    votes: list[list[Optional[str]]] = []
    for annotate in annotators:
        row: list[Optional[str]] = []
        for _ in range(samples):
            try:
                row.append(annotate(task))
            except Exception:
                row.append(None)
        votes.append(row)

    flat = [v for row in votes for v in row if v is not None]
    abstentions = len(annotators) * samples - len(flat)
    flags = []
    if abstentions > 2:
        flags.append("too_many_abstentions")
    majority = _majority(flat) if flat else "Incorrect"
    differing = sum(1 for v in flat if v != majority) + abstentions
    disagreement = len(set(flat)) > 1 or abstentions > 0
    escalated = differing > escalation_threshold

    judge_labels: list[str] = []
    final = majority
    if escalated and judge is not None:
        for _ in range(judge_votes):
            try:
                judge_labels.append(judge(task))
            except Exception:
                pass
        if judge_labels:
            final = _majority(judge_labels)
        else:
            flags.append("judge_unavailable")

    return AnnotationRecord(
        task_id=str(task.get("task_id", "")),
        votes=votes,
        majority=majority,
        differing_count=differing,
        in_disagreement_set=disagreement,
        escalated=escalated,
        final_label=final,
        judge_votes=judge_labels,
        flags=flags,
    )


# ---------------------------------------------------------------------------
# error classification
# ---------------------------------------------------------------------------


def _boxed_category(text: str) -> Optional[str]:
    from .extract import find_boxed

    for content in reversed(find_boxed(text)):
        name = re.sub(r"^\d+\.?\s*", "", content.strip())
        for known in ERROR_TAXONOMY:
            if name.lower() == known.lower():
                return known
    return None


def classify_error(
    task: dict,
    classifier: Callable[[dict], str],
    taxonomy: dict[str, float] = ERROR_TAXONOMY,
) -> str:
    """Ask the classifier endpoint for a boxed category name; names outside
    the taxonomy get one retry, then bucket as unclassified."""
    for _ in range(2):
        try:
            reply = classifier(task)
        except Exception:
            continue
        category = _boxed_category(reply)
        if category is not None and category in taxonomy:
            return category
    return UNCLASSIFIED


ERROR_ANALYSIS_PROMPT = """\
You are an expert assistant for error analysis of answer verifications.
Compare the flawed verification to the correct one and pick the single
error category that best describes the mistake. Choose only from the
category names listed below; do not invent new ones, and ignore the
numbering. Wrap your chosen category name in \\boxed{{}}.

Categories:
{categories}

Question: {question}
Model Answer: {answer}
Reference Answer: {ref_answer}
Correct Verification: {golden_verify}
Incorrect Verification: {error_verify}

Your classified error category:"""


def build_error_analysis_prompt(task: dict) -> str:
    categories = "\n".join(f"{i+1}. {name}" for i, name in enumerate(ERROR_TAXONOMY))
    return ERROR_ANALYSIS_PROMPT.format(
        categories=categories,
        question=task.get("question", ""),
        answer=task.get("answer", ""),
        ref_answer=task.get("ref_answer", ""),
        golden_verify=task.get("golden_verify", ""),
        error_verify=task.get("error_verify", ""),
    )


# ---------------------------------------------------------------------------
# long-tail quota planning
# ---------------------------------------------------------------------------


def longtail_sample_plan(
    target_count: int,
    taxonomy: dict[str, float] = ERROR_TAXONOMY,
    exponent: float = 0.5,
    floor_frac: float = 0.01,
) -> dict[str, int]:
    """Inverse-prior quotas (weight = prior^-exponent) with a per-category
    floor; largest-remainder rounding makes quotas sum to target exactly."""
    assert target_count > 0
    floor = max(0, int(floor_frac * target_count))
    if floor * len(taxonomy) > target_count:
        floor = target_count // len(taxonomy)
    weights = {name: prior ** (-exponent) for name, prior in taxonomy.items()}
    total_w = sum(weights.values())
    remaining = target_count - floor * len(taxonomy)
    raw = {name: floor + remaining * w / total_w for name, w in weights.items()}

    quotas = {name: int(v) for name, v in raw.items()}
    remainders = sorted(raw.items(), key=lambda kv: kv[1] - int(kv[1]), reverse=True)
    short = target_count - sum(quotas.values())
    for name, _ in remainders[:short]:
        quotas[name] += 1
    return quotas


# ---------------------------------------------------------------------------
# iterative hard-case synthesis
# ---------------------------------------------------------------------------


@dataclass
class SynthesisState:
    round: int
    reference_set: list[dict]
    corpus: list[dict]


def _question_key(item: dict) -> str:
    return re.sub(r"\s+", " ", str(item.get("question", ""))).strip().lower()


def synthesize_hard(
    initial_hard_set: Sequence[dict],
    questioner: Callable[[Sequence[dict]], list[dict]],
    solver: Callable[[dict], bool],
    rounds: int,
    on_round: Optional[Callable[[SynthesisState], None]] = None,
) -> list[dict]:
    """Iteratively grow a corpus of solver failures.

    Per round: the questioner generates new items conditioned on the
    current reference set; items the solver gets wrong join both the corpus
    and the next round's context.  Exact-duplicate questions are dropped.
    A questioner failure aborts the round, not the run.
    """
    assert rounds >= 1
    reference: list[dict] = list(initial_hard_set)
    seen = {_question_key(x) for x in reference}
    corpus: list[dict] = []
    for t in range(1, rounds + 1):
        try:
            generated = questioner(reference)
        except Exception:
            continue
        failures = []
        for item in generated:
            key = _question_key(item)
            if key in seen:
                continue
            seen.add(key)
            try:
                solved = solver(item)
            except Exception:
                solved = False
            if not solved:
                failures.append(item)
        corpus.extend(failures)
        reference.extend(failures)
        if on_round is not None:
            on_round(SynthesisState(t, list(reference), list(corpus)))
    return corpus


# ---------------------------------------------------------------------------
# cold-start trace filtering
# ---------------------------------------------------------------------------

_THINK_RE = re.compile(r"<think>.*?</think>", re.DOTALL)
_TOOL_RESPONSE_RE = re.compile(r"<tool_response>.*?</tool_response>", re.DOTALL)
_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def count_tokens(text: str) -> int:
    """Whitespace+punctuation token approximation; swap in a real tokenizer
    via the ``tokenizer`` argument of filter_coldstart when available."""
    return len(_TOKEN_RE.findall(text))


@dataclass
class ColdStartTrace:
    text: str                      # full trace with think blocks stripped
    correct: bool
    tool_calls: int
    token_count: int
    mask_spans: list[tuple[int, int]]

    def __post_init__(self):
        prev_end = 0
        for start, end in self.mask_spans:
            assert 0 <= start <= end <= len(self.text)
            assert start >= prev_end  # disjoint, ordered
            prev_end = end


def filter_coldstart(
    traces: Sequence[dict],
    max_tokens: int = 200,
    tokenizer: Callable[[str], int] = count_tokens,
) -> list[ColdStartTrace]:
    """Keep short, correct, tool-using traces; mask tool-response spans.

    Each input record: {"text": str, "correct": bool, "tool_calls": int}.
    Think blocks are stripped before token counting.
    """
    accepted = []
    for rec in traces:
        text = _THINK_RE.sub("", rec["text"])
        tokens = tokenizer(text)
        u = int(rec.get("tool_calls", len(re.findall(r"<tool_call>", text))))
        if not rec.get("correct", False) or u < 1 or tokens > max_tokens:
            continue
        spans = [(m.start(), m.end()) for m in _TOOL_RESPONSE_RE.finditer(text)]
        accepted.append(
            ColdStartTrace(
                text=text,
                correct=True,
                tool_calls=u,
                token_count=tokens,
                mask_spans=spans,
            )
        )
    return accepted
