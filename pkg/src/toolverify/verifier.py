"""Multi-turn verification engine.

Builds the verification prompt, converses with a pluggable chat-completion
endpoint, interleaves tool dispatch, and produces a binary Verdict.  Also
supports a no-LLM rubric mode and a single-token labeling mode.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

from .equiv import EquivConfig, RubricOutcome, verify_by_rubric
from .extract import Origin, RawResponse, extract_verdict
from .toolproto import (
    MalformedToolCall,
    ToolRegistry,
    ToolResult,
    dispatch,
    parse_tool_calls,
    render_tool_response,
)

__all__ = [
    "VerifyMode",
    "VerificationTask",
    "Verdict",
    "ChatEndpointConfig",
    "ChatEndpoint",
    "HTTPChatEndpoint",
    "ScriptedChatEndpoint",
    "EndpointError",
    "TaskFailure",
    "build_prompt",
    "verify",
    "verify_batch",
]


class VerifyMode(str, Enum):
    tool = "tool"
    label = "label"
    rubric = "rubric"


@dataclass(frozen=True)
class VerificationTask:
    question: str
    candidate: RawResponse
    references: tuple[str, ...]
    mode: VerifyMode = VerifyMode.rubric
    task_id: Optional[str] = None

    def __post_init__(self):
        assert len(self.references) >= 1

    @classmethod
    def make(cls, question: str, candidate_text: str, references: Sequence[str], mode="rubric", task_id=None):
        return cls(
            question=question,
            candidate=RawResponse(candidate_text, Origin.candidate_model),
            references=tuple(references),
            mode=VerifyMode(mode),
            task_id=task_id,
        )


@dataclass
class Verdict:
    label: str                      # "Correct" | "Incorrect"
    tool_calls_used: int = 0
    transcript: list[dict] = field(default_factory=list)
    tokens_out: int = 0
    latency: float = 0.0
    flags: list[str] = field(default_factory=list)

    @property
    def r(self) -> int:
        return 1 if self.label == "Correct" else 0

    def to_dict(self, include_transcript: bool = False) -> dict:
        out = {
            "label": self.label,
            "r": self.r,
            "tool_calls_used": self.tool_calls_used,
            "tokens_out": self.tokens_out,
            "latency": self.latency,
            "flags": list(self.flags),
        }
        if include_transcript:
            out["transcript"] = list(self.transcript)
        return out


@dataclass(frozen=True)
class ChatEndpointConfig:
    base_url: str = ""
    model: str = ""
    auth_token_env: str = "TOOLVERIFY_API_TOKEN"
    temperature: float = 0.0
    max_turns: int = 4
    max_tokens_per_turn: int = 2048
    retries: int = 2
    backoff: float = 0.5

    def __post_init__(self):
        assert self.max_turns >= 1


class EndpointError(RuntimeError):
    pass


@dataclass
class TaskFailure:
    """In-band batch slot for a task whose verification raised."""

    error: str
    task_id: Optional[str] = None


class ChatEndpoint:
    """Abstract chat transport: messages in, one assistant reply out."""

    config: ChatEndpointConfig = ChatEndpointConfig()

    def complete(self, messages: list[dict]) -> dict:
        """Return {"text": str, "tokens_out": int}."""
        raise NotImplementedError


class HTTPChatEndpoint(ChatEndpoint):
    """Speaks the common chat-completions JSON shape over HTTP."""

    def __init__(self, config: ChatEndpointConfig):
        import httpx

        self.config = config
        self._client = httpx.Client(base_url=config.base_url, timeout=120.0)

    def _headers(self) -> dict:
        import os

        token = os.environ.get(self.config.auth_token_env, "")
        return {"Authorization": f"Bearer {token}"} if token else {}

    def complete(self, messages: list[dict]) -> dict:
        import httpx

        payload = {
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens_per_turn,
        }
        last_exc = None
        for attempt in range(self.config.retries + 1):
            try:
                resp = self._client.post("/chat/completions", json=payload, headers=self._headers())
                resp.raise_for_status()
                data = resp.json()
                choice = data["choices"][0]
                text = choice["message"]["content"] or ""
                tokens = data.get("usage", {}).get("completion_tokens")
                if tokens is None:
                    tokens = len(text.split())
                return {"text": text, "tokens_out": int(tokens)}
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last_exc = exc
                time.sleep(self.config.backoff * (2**attempt))
        raise EndpointError(f"chat endpoint failed after retries: {last_exc}")


class ScriptedChatEndpoint(ChatEndpoint):
    """Replays a fixed sequence of assistant replies; for tests and replay."""

    def __init__(self, replies: Sequence[str], config: ChatEndpointConfig = ChatEndpointConfig()):
        self.replies = list(replies)
        self.config = config
        self.requests: list[list[dict]] = []
        self._i = 0

    def complete(self, messages: list[dict]) -> dict:
        self.requests.append([dict(m) for m in messages])
        if self._i >= len(self.replies):
            raise EndpointError("scripted endpoint exhausted")
        text = self.replies[self._i]
        self._i += 1
        return {"text": text, "tokens_out": len(text.split())}


VERIFICATION_SYSTEM_PROMPT = """\
You are a careful and precise assistant that judges whether a model's response answers a question correctly. You will be given a question, an output sentence, and the gold answer. Decide whether the output sentence answers the question correctly according to the gold answer. You may make a short tool call and reason briefly. Finish by wrapping either [Correct] or [Incorrect] in \\boxed{}.

Judging rules:
1. The gold answer is authoritative and the question is valid; never dispute either. Compare only the candidate's final answer against the gold answer and ignore flaws in its reasoning, formatting, or style.
2. Treat mathematically equivalent forms as matching: simplify, or round both values to two decimal places before comparing. Differences in units or domain annotations alone (e.g. a bare number versus the same number with a unit) do not make an answer wrong. Convert between units when needed to compare.
3. Multi-part answers must match the gold answer in every part; partial matches are wrong. Unless the question fixes an order, part order may vary.
4. For multiple-choice questions, accept either the correct option's letter or its content.
5. When several gold answers are given and they are equivalent, matching any one suffices; when they are inequivalent, all must be matched.
6. Responses that are cut off, stuck repeating themselves, self-negating at the end, or refusing to answer are [Incorrect]. A numerically correct answer without units is [Correct].

Available tools:
1. python_interpreter: run Python code to settle a computation.
2. unit_conversion: convert a value between physical units.
"""

LABEL_SUFFIX = (
    "\nAnswer with exactly one token, Correct or Incorrect, and nothing else."
)


def build_prompt(task: VerificationTask) -> list[dict]:
    """Messages for the tool/label verification conversation."""
    assert task.mode in (VerifyMode.tool, VerifyMode.label)
    reference = "; ".join(task.references)
    user = (
        f'Question: """{task.question}"""\n\n'
        f'Output sentence: """{task.candidate.text}"""\n\n'
        f"Correct answer: {reference}\n\n"
        "Judgement:"
    )
    if task.mode is VerifyMode.label:
        user += LABEL_SUFFIX
    return [
        {"role": "system", "content": VERIFICATION_SYSTEM_PROMPT},
        {"role": "user", "content": user},
    ]


def _rubric_verdict(task: VerificationTask, equiv_cfg: EquivConfig, start: float) -> Verdict:
    outcome = verify_by_rubric(task, equiv_cfg)
    flags = []
    u = 0
    if outcome is RubricOutcome.needs_tools:
        flags.append("needs_tools")
        u = 1  # engine-internal escalation attempt
        label = "Incorrect"
    else:
        label = outcome.value
    return Verdict(label=label, tool_calls_used=u, flags=flags, latency=time.monotonic() - start)


def _label_verdict_token(text: str) -> Optional[str]:
    boxed = extract_verdict(RawResponse(text, Origin.verifier_model))
    if boxed:
        return boxed
    token = text.strip().strip(".").strip("[]").lower()
    if token in ("correct", "incorrect"):
        return token.capitalize()
    return None


def verify(
    task: VerificationTask,
    endpoint: Optional[ChatEndpoint] = None,
    registry: Optional[ToolRegistry] = None,
    equiv_cfg: EquivConfig = EquivConfig(),
    tool_budget: float = 10.0,
) -> Verdict:
    """Produce a Verdict for one task.

    tool/label modes converse with the endpoint; rubric mode is fully
    in-process.  Undecided conversations get one retry demanding the boxed
    verdict, then default to Incorrect (flagged) — a false Correct is the
    costlier error for reward use.
    """
    start = time.monotonic()
    if task.mode is VerifyMode.rubric:
        return _rubric_verdict(task, equiv_cfg, start)
    if endpoint is None:
        raise EndpointError("tool/label modes need a chat endpoint")

    messages = build_prompt(task)
    transcript = list(messages)
    tokens_out = 0
    u = 0
    flags: list[str] = []
    label: Optional[str] = None
    max_turns = endpoint.config.max_turns

    for turn in range(max_turns):
        reply = endpoint.complete(messages)
        tokens_out += reply["tokens_out"]
        assistant = {"role": "assistant", "content": reply["text"]}
        messages.append(assistant)
        transcript.append(assistant)

        if task.mode is VerifyMode.label:
            label = _label_verdict_token(reply["text"])
            if label is None and turn == 0:
                retry = {"role": "user", "content": "Reply with exactly Correct or Incorrect."}
                messages.append(retry)
                transcript.append(retry)
                continue
            break

        calls = parse_tool_calls(reply["text"]) if registry is not None else []
        real_calls = [c for c in calls if not isinstance(c, MalformedToolCall)]
        if calls:
            bodies = []
            for c in calls:
                if isinstance(c, MalformedToolCall):
                    bodies.append(render_tool_response(ToolResult(f"Error: malformed tool call: {c.cause}", ok=False)))
                else:
                    u += 1
                    bodies.append(render_tool_response(dispatch(c, registry, tool_budget)))
            tool_msg = {"role": "user", "content": "\n".join(bodies)}
            messages.append(tool_msg)
            transcript.append(tool_msg)
            if turn == max_turns - 1:
                flags.append("budget_exceeded")
            continue

        verdict = extract_verdict(RawResponse(reply["text"], Origin.verifier_model))
        if verdict is not None:
            label = verdict
            break
        if turn < max_turns - 1 and "verdict_retry" not in flags:
            flags.append("verdict_retry")
            retry = {
                "role": "user",
                "content": "Give your final judgement now: \\boxed{[Correct]} or \\boxed{[Incorrect]}.",
            }
            messages.append(retry)
            transcript.append(retry)

    if label is None:
        flags.append("undecided_default_incorrect")
        label = "Incorrect"
    return Verdict(
        label=label,
        tool_calls_used=u,
        transcript=transcript,
        tokens_out=tokens_out,
        latency=time.monotonic() - start,
        flags=flags,
    )


def verify_batch(
    tasks: Sequence[VerificationTask],
    endpoint: Optional[ChatEndpoint] = None,
    parallelism: int = 4,
    registry: Optional[ToolRegistry] = None,
    equiv_cfg: EquivConfig = EquivConfig(),
) -> list[Union[Verdict, TaskFailure]]:
    """Order-preserving concurrent verification; one failure never aborts
    the batch."""
    assert parallelism >= 1
    if not tasks:
        return []

    def run(task: VerificationTask):
        try:
            return verify(task, endpoint=endpoint, registry=registry, equiv_cfg=equiv_cfg)
        except Exception as exc:
            return TaskFailure(error=f"{type(exc).__name__}: {exc}", task_id=task.task_id)

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(run, tasks))
