"""Command-line interface.

Exit codes: 0 success, 1 task-level failure, 2 config/usage/IO failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import pipeline as pipeline_mod
from . import reward as reward_mod
from .bench import BenchRecord, bench_report, render_report_figures, render_report_table
from .config import ConfigError, load_config
from .pipeline import read_jsonl, write_jsonl
from .sandbox import LocalPythonExecutor, RunnerPoolExecutor
from .toolproto import default_registry
from .verifier import (
    ChatEndpoint,
    HTTPChatEndpoint,
    TaskFailure,
    VerificationTask,
    verify_batch,
)


@click.group()
def main():
    """Tool-augmented answer verification and RLVR reward utilities."""


def _load_cfg(config_path):
    try:
        return load_config(config_path)
    except (ConfigError, OSError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)


def _read_input(path):
    try:
        return read_jsonl(path)
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(2)


def _build_executor(cfg):
    if cfg.sandbox.runner_command:
        return RunnerPoolExecutor(cfg.sandbox.runner_command, pool_size=cfg.sandbox.pool_size)
    return LocalPythonExecutor(memory_bytes=cfg.sandbox.memory_bytes)


@main.group()
def verify():
    """Verification commands."""


@verify.command("run")
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["tool", "label", "rubric"]), default="rubric")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--parallelism", type=int, default=4)
@click.option("--transcripts", is_flag=True, default=False)
def verify_run(input_path, output_path, mode, config_path, parallelism, transcripts):
    """Verify tasks from a JSONL file (question, candidate, references)."""
    cfg = _load_cfg(config_path)
    rows = _read_input(input_path)
    tasks = [
        VerificationTask.make(
            question=r.get("question", ""),
            candidate_text=r["candidate"],
            references=r["references"],
            mode=mode,
            task_id=r.get("task_id"),
        )
        for r in rows
    ]
    endpoint = None
    registry = None
    if mode in ("tool", "label"):
        if not cfg.endpoint.base_url:
            click.echo("config error: endpoint.base_url required for tool/label modes", err=True)
            sys.exit(2)
        endpoint = HTTPChatEndpoint(cfg.endpoint.to_chat_config())
        registry = default_registry(_build_executor(cfg))
    results = verify_batch(tasks, endpoint=endpoint, parallelism=parallelism, registry=registry)
    out = []
    failed = False
    for task, res in zip(tasks, results):
        if isinstance(res, TaskFailure):
            failed = True
            out.append({"task_id": task.task_id, "error": res.error})
        else:
            payload = res.to_dict(include_transcript=transcripts)
            payload["task_id"] = task.task_id
            out.append(payload)
    write_jsonl(output_path, out)
    sys.exit(1 if failed else 0)


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--k", type=int, default=3)
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option("--figures", "figures_dir", type=click.Path(), default=None)
def bench(input_path, k, report_path, figures_dir):
    """Score k verification runs per task against gold labels."""
    rows = _read_input(input_path)
    records = [BenchRecord.from_dict(r) for r in rows]
    if any(len(r.verdicts) != k for r in records):
        click.echo(f"input error: all records must carry exactly k={k} verdicts", err=True)
        sys.exit(2)
    report = bench_report(records)
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2)
        f.write("\n")
    click.echo(render_report_table(report))
    if figures_dir:
        for path in render_report_figures(report, records, figures_dir):
            click.echo(f"figure: {path}")
    sys.exit(0)


@main.command("reward")
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--output", "output_path", type=click.Path(), default=None)
def reward_cmd(input_path, output_path):
    """Compute rewards/filters/advantages for JSONL rollout groups."""
    rows = _read_input(input_path)
    results = []
    failed = False
    for row in rows:
        try:
            group = reward_mod.RolloutGroup(
                prompt_id=str(row["prompt_id"]),
                gold_answer=row.get("gold_answer", ""),
                rollouts=[
                    reward_mod.RolloutRecord(
                        correct=r["correct"],
                        tool_uses=r.get("tool_uses", 0),
                        logprob_new=r.get("logprob_new"),
                        logprob_old=r.get("logprob_old"),
                    )
                    for r in row["rollouts"]
                ],
                eps_low=row.get("eps_low", reward_mod.EPS_LOW_DEFAULT),
                eps_high=row.get("eps_high", reward_mod.EPS_HIGH_DEFAULT),
            )
        except (KeyError, ValueError) as exc:
            results.append({"prompt_id": row.get("prompt_id"), "error": str(exc)})
            failed = True
            continue
        results.extend(reward_mod.reward_batch([group]))
    if output_path:
        write_jsonl(output_path, results)
    else:
        for entry in results:
            click.echo(json.dumps(entry))
    sys.exit(1 if failed else 0)


@main.group("pipeline")
def pipeline_grp():
    """Data-curation stages (JSONL in, JSONL out)."""


@pipeline_grp.command()
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--output", "output_path", required=True, type=click.Path())
def annotate(input_path, output_path):
    """Aggregate precollected annotator votes into final labels.

    Input rows: {"task_id", "votes": [[label,...],...], "judge_votes": [...]}.
    """
    rows = _read_input(input_path)
    out = []
    for row in rows:
        votes = row["votes"]
        judge_votes = list(row.get("judge_votes", []))

        def make_annotator(row_votes):
            it = iter(row_votes)
            return lambda task: next(it)

        judge_iter = iter(judge_votes)
        record = pipeline_mod.majority_annotate(
            task=row,
            annotators=[make_annotator(v) for v in votes],
            samples=len(votes[0]) if votes else 0,
            judge=(lambda task: next(judge_iter)) if judge_votes else None,
            judge_votes=len(judge_votes),
        )
        out.append(record.to_dict())
    write_jsonl(output_path, out)
    sys.exit(0)


@pipeline_grp.command()
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--output", "output_path", required=True, type=click.Path())
def classify(input_path, output_path):
    """Classify mislabeled verifications from recorded classifier replies.

    Input rows carry a "reply" field (the classifier model's text).
    """
    rows = _read_input(input_path)
    out = []
    for row in rows:
        category = pipeline_mod.classify_error(row, classifier=lambda task: task.get("reply", ""))
        out.append({"task_id": row.get("task_id"), "category": category})
    write_jsonl(output_path, out)
    sys.exit(0)


@pipeline_grp.command("augment-plan")
@click.option("--target", type=int, required=True)
@click.option("--exponent", type=float, default=0.5)
@click.option("--floor-frac", type=float, default=0.01)
@click.option("--output", "output_path", required=True, type=click.Path())
def augment_plan(target, exponent, floor_frac, output_path):
    """Emit per-category long-tail synthesis quotas."""
    if target <= 0:
        click.echo("config error: --target must be positive", err=True)
        sys.exit(2)
    plan = pipeline_mod.longtail_sample_plan(target, exponent=exponent, floor_frac=floor_frac)
    with open(output_path, "w", encoding="utf-8") as f:
        json.dump(plan, f, indent=2)
        f.write("\n")
    sys.exit(0)


@pipeline_grp.command()
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--rounds", type=int, default=4)
def synthesize(input_path, output_path, rounds):
    """Replay iterative hard-case synthesis from recorded rounds.

    Input rows: {"round": t, "items": [{"question", "solved": bool}, ...]};
    an optional row with round 0 seeds the reference set.
    """
    rows = _read_input(input_path)
    seed = []
    per_round: dict[int, list[dict]] = {}
    for row in rows:
        t = int(row.get("round", 0))
        if t == 0:
            seed.extend(row.get("items", []))
        else:
            per_round.setdefault(t, []).extend(row.get("items", []))

    def questioner(reference):
        questioner.t += 1
        return per_round.get(questioner.t, [])

    questioner.t = 0
    corpus = pipeline_mod.synthesize_hard(
        seed,
        questioner,
        solver=lambda item: bool(item.get("solved", False)),
        rounds=rounds,
    )
    write_jsonl(output_path, corpus)
    sys.exit(0)


@pipeline_grp.command("coldstart-filter")
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--max-tokens", type=int, default=200)
def coldstart_filter(input_path, output_path, max_tokens):
    """Keep short, correct, tool-using traces and emit loss-mask spans."""
    rows = _read_input(input_path)
    accepted = pipeline_mod.filter_coldstart(rows, max_tokens=max_tokens)
    write_jsonl(
        output_path,
        [
            {
                "text": t.text,
                "tool_calls": t.tool_calls,
                "token_count": t.token_count,
                "mask_spans": t.mask_spans,
            }
            for t in accepted
        ],
    )
    sys.exit(0)


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None)
def serve(config_path):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    cfg = _load_cfg(config_path)
    endpoint = None
    if cfg.endpoint.base_url:
        endpoint = HTTPChatEndpoint(cfg.endpoint.to_chat_config())
    app = create_app(cfg, endpoint=endpoint, executor=_build_executor(cfg))
    uvicorn.run(app, host=cfg.listen_host, port=cfg.listen_port)


if __name__ == "__main__":
    main()
