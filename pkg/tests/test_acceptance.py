"""Acceptance gate: one test per release criterion, each printing a single
pass/fail line.  The whole suite runs against the deterministic scripted
executor — no live sandbox or chat endpoint is required."""

import itertools
import math
import random
import sys
import time
from contextlib import contextmanager

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from toolverify.bench import BenchRecord, bench_report
from toolverify.cli import main as cli_main
from toolverify.equiv import (
    EquivConfig,
    evaluate_expression,
    is_equivalent,
    parse_answer,
    verify_by_rubric,
)
from toolverify.pipeline import (
    filter_coldstart,
    majority_annotate,
    read_jsonl,
    synthesize_hard,
    count_tokens,
)
from toolverify.reward import (
    FilterStatus,
    RolloutGroup,
    RolloutRecord,
    advantages,
    dapo_objective,
    group_filter,
    shaped_reward,
)
from toolverify.sandbox import ScriptedExecutor
from toolverify.service import create_app
from toolverify.toolproto import default_registry
from toolverify.units import UnitConversionRequest, convert, render_tool_response
from toolverify.verifier import ScriptedChatEndpoint, VerificationTask, verify

import expr_oracle
from conftest import CALC_CODE, CALC_STDOUT, STRING_CODE, STRING_STDOUT, REPLAY_CASES
from rubric_fixtures import RUBRIC_CASES
from test_reward import brute_force_objective, random_group_with_logprobs
from test_service import bench_rows, poll_job, write_jsonl_file


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"FAIL  {name}", file=sys.stderr)
        raise
    print(f"PASS  {name}", file=sys.stderr)


def make_stub():
    ex = ScriptedExecutor()
    ex.add(CALC_CODE, CALC_STDOUT)
    ex.add(STRING_CODE, STRING_STDOUT)
    return ex


def test_unit_conversion_bit_exact():
    with criterion("unit conversion renders reference string bit-for-bit, < 1 ms"):
        req = UnitConversionRequest(7.0, "kJ/mol", "eV/mole")
        start = time.perf_counter()
        rendered = render_tool_response(convert(req))
        elapsed = time.perf_counter() - start
        assert rendered == "Unit parsed value: 4.369056352122534e+22 electron_volt / mole"
        assert elapsed < 0.001


def test_numeric_case_study_parity():
    with criterion("expression engine reproduces reference stdout values; not equivalent"):
        cand = evaluate_expression("8*sqrt(5+2.5*sqrt(3))/5")
        gold = evaluate_expression("sqrt(1604*(2+sqrt(3))/505)")
        assert cand == pytest.approx(4.887241058965765, rel=1e-12)
        assert gold == pytest.approx(3.4429464400122507, rel=1e-12)
        assert not is_equivalent(parse_answer(repr(cand)), parse_answer(repr(gold)))


def test_rubric_fixture_file_all_pass():
    with criterion(f"rubric fixture file passes 100% ({len(RUBRIC_CASES)} cases)"):
        assert len(RUBRIC_CASES) >= 20
        for candidate, references, expected in RUBRIC_CASES:
            task = VerificationTask.make("", candidate, references, mode="rubric")
            got = verify_by_rubric(task).value
            assert got == expected, (candidate, references, expected, got)


def test_reward_table_and_filter():
    with criterion("reward table exact; group filter exhaustive for G <= 6"):
        assert shaped_reward(True, 1) == 1.5
        assert shaped_reward(True, 0) == 1.0
        assert shaped_reward(False, 1) == 0.0
        assert shaped_reward(False, 0) == -0.5
        for g in range(2, 7):
            for pattern in itertools.product([True, False], repeat=g):
                group = RolloutGroup("p", "a", [RolloutRecord(c, 0) for c in pattern])
                kept = group_filter(group) is FilterStatus.kept
                assert kept == (0 < sum(pattern) < g)


def test_advantage_normalization_and_objective():
    with criterion("advantages normalized on 1000 groups; objective matches brute force on 500"):
        start = time.perf_counter()
        rng = random.Random(11)
        for _ in range(1000):
            g = rng.randint(2, 16)
            n_correct = rng.randint(1, g - 1)
            flags = [True] * n_correct + [False] * (g - n_correct)
            rng.shuffle(flags)
            group = RolloutGroup(
                "p", "a", [RolloutRecord(c, rng.randint(0, 3)) for c in flags]
            )
            advs = advantages(group)
            assert abs(sum(advs) / g) <= 1e-9
            assert abs(math.sqrt(sum(a * a for a in advs) / g) - 1.0) <= 1e-9
        for _ in range(500):
            group = random_group_with_logprobs(rng)
            assert dapo_objective(group) == pytest.approx(
                brute_force_objective(group), rel=1e-12, abs=1e-15
            )
        assert time.perf_counter() - start < 5.0


def test_transcript_replay():
    with criterion("scripted replay reproduces 3 verdicts, tool counts, response bodies"):
        registry = default_registry(make_stub())
        for case in REPLAY_CASES:
            task = VerificationTask.make(
                case["question"], case["candidate"], case["references"], mode="tool"
            )
            verdict = verify(task, endpoint=ScriptedChatEndpoint(case["replies"]), registry=registry)
            assert verdict.label == "Incorrect"
            assert verdict.tool_calls_used == 1
            responses = [
                t["content"] for t in verdict.transcript
                if t["role"] == "user" and "<tool_response>" in t["content"]
            ]
            assert len(responses) == 1
            if "tool_stdout" in case:
                assert case["tool_stdout"] in responses[0].replace("\\n", "\n")
            if "tool_body" in case:
                assert case["tool_body"] in responses[0]


def test_pipeline_rules():
    with criterion("annotation sweep (2^9), synthesis union (T=4), cold-start partition (50 traces)"):
        # escalation happens exactly when > 3 of 9 votes differ from the majority
        for pattern in itertools.product(["Correct", "Incorrect"], repeat=9):
            rows = [list(pattern[0:3]), list(pattern[3:6]), list(pattern[6:9])]
            iters = [iter(r) for r in rows]
            rec = majority_annotate(
                {"task_id": "t"},
                [lambda t, it=it: next(it) for it in iters],
                judge=lambda t: "Correct",
            )
            n_major = max(pattern.count("Correct"), pattern.count("Incorrect"))
            if pattern.count("Correct") == pattern.count("Incorrect"):
                n_major = pattern.count("Incorrect")
            assert rec.escalated == (9 - n_major > 3)

        # corpus is exactly the union of scripted per-round failure sets
        rounds = {
            1: [{"question": "a", "solved": False}],
            2: [{"question": "b", "solved": True}, {"question": "c", "solved": False}],
            3: [],
            4: [{"question": "d", "solved": False}, {"question": "c", "solved": False}],
        }
        state = {"t": 0}

        def questioner(reference):
            state["t"] += 1
            return rounds[state["t"]]

        corpus = synthesize_hard([], questioner, solver=lambda i: i["solved"], rounds=4)
        assert sorted(x["question"] for x in corpus) == ["a", "c", "d"]

        # cold-start filter partitions a 50-trace fixture exactly
        rng = random.Random(5)
        traces, keep = [], 0
        for i in range(50):
            n_words = rng.choice([40, 120, 300])
            correct = rng.random() < 0.5
            tools = rng.choice([0, 1, 2])
            tool_part = (
                "<tool_call>\n{\"name\": \"python_interpreter\"}\n</tool_call>\n"
                "<tool_response>\nout\n</tool_response>\n" * tools
            )
            text = " ".join(["w"] * n_words) + "\n" + tool_part + "\\boxed{[Correct]}"
            traces.append({"text": text, "correct": correct, "tool_calls": tools})
            if correct and tools >= 1 and count_tokens(text) <= 200:
                keep += 1
        assert len(filter_coldstart(traces)) == keep
        assert 0 < keep < 50  # fixture exercises both sides of every rule


def test_parse_oracle_agreement():
    with criterion("parser agrees with direct tree evaluation on 1000 random expressions"):
        for text, value in expr_oracle.sample_cases(1000, seed=42):
            got = evaluate_expression(text)
            assert got == pytest.approx(value, rel=1e-12, abs=1e-12), text
        # rational-vs-decimal invariants; rounding is half-away-from-zero
        from decimal import Decimal, ROUND_HALF_UP

        rng = random.Random(6)
        cfg = EquivConfig()
        for _ in range(200):
            p, q = rng.randint(-400, 400), rng.randint(1, 60)
            frac = rf"\frac{{{p}}}{{{q}}}"
            dec = str((Decimal(p) / Decimal(q)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))
            assert is_equivalent(parse_answer(frac), parse_answer(dec), cfg), (frac, dec)
            off = f"{p / q + 0.2:.4f}"
            assert not is_equivalent(parse_answer(frac), parse_answer(off), cfg), (frac, off)


def test_service_parity_and_report():
    with criterion("CLI vs HTTP verdict/reward parity (30 tasks); mean@3 report hand-check"):
        client = TestClient(create_app(executor=make_stub()))
        runner = CliRunner()
        tasks = [
            {
                "task_id": f"t{i}",
                "question": "",
                "candidate": rf"\boxed{{{i}}}",
                "references": [str(i if i % 2 == 0 else i + 1)],
                "mode": "rubric",
            }
            for i in range(30)
        ]
        with runner.isolated_filesystem():
            write_jsonl_file("in.jsonl", tasks)
            result = runner.invoke(
                cli_main, ["verify", "run", "--input", "in.jsonl", "--output", "out.jsonl"]
            )
            assert result.exit_code == 0
            cli_rows = read_jsonl("out.jsonl")
        resp = client.post("/v1/verify", json={"tasks": tasks})
        assert resp.status_code == 202
        http_rows = poll_job(client, resp.json()["job_id"]).json()["verdicts"]
        for c, h in zip(cli_rows, http_rows):
            assert (c["label"], c["r"], c["tool_calls_used"]) == (
                h["label"], h["r"], h["tool_calls_used"]
            )

        # reward parity on one mixed group
        group_row = {
            "prompt_id": "p",
            "rollouts": [
                {"correct": True, "tool_uses": 1},
                {"correct": False, "tool_uses": 0},
                {"correct": True, "tool_uses": 0},
            ],
        }
        with runner.isolated_filesystem():
            write_jsonl_file("groups.jsonl", [group_row])
            result = runner.invoke(
                cli_main, ["reward", "--input", "groups.jsonl", "--output", "out.jsonl"]
            )
            assert result.exit_code == 0
            [cli_reward] = read_jsonl("out.jsonl")
        http_reward = client.post("/v1/reward", json={"groups": [group_row]}).json()["groups"][0]
        assert cli_reward["rewards"] == http_reward["rewards"]
        assert cli_reward["advantages"] == pytest.approx(http_reward["advantages"])
        assert cli_reward["filter_status"] == http_reward["filter_status"]

        # mean@3 on the 10-record fixture: per-run accuracies 1.0, 0.9, 0.8
        report = bench_report([BenchRecord.from_dict(r) for r in bench_rows()])
        assert report["mean_at_k"] == pytest.approx((1.0 + 0.9 + 0.8) / 3)
