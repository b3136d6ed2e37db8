"""Benchmark harness: mean@k accuracy and token accounting, with a plain
JSON report, a text table, and optional matplotlib figures rendered to
files alongside the delimited output."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

__all__ = ["BenchRecord", "MixedK", "bench_report", "render_report_table", "render_report_figures"]


class MixedK(ValueError):
    pass


@dataclass(frozen=True)
class BenchRecord:
    task_id: str
    gold: str                       # "Correct" | "Incorrect"
    verdicts: tuple[str, ...]       # k predicted labels
    tokens_out: tuple[int, ...]     # per-run output tokens
    latency: tuple[float, ...] = ()
    domain: Optional[str] = None

    def __post_init__(self):
        assert len(self.verdicts) >= 1
        assert self.gold in ("Correct", "Incorrect")

    @classmethod
    def from_dict(cls, d: dict) -> "BenchRecord":
        return cls(
            task_id=str(d["task_id"]),
            gold=d["gold"],
            verdicts=tuple(d["verdicts"]),
            tokens_out=tuple(d.get("tokens_out", [0] * len(d["verdicts"]))),
            latency=tuple(d.get("latency", [])),
            domain=d.get("domain"),
        )


def _mean_at_k(records: Sequence[BenchRecord], k: int) -> float:
    per_run = []
    for j in range(k):
        hits = sum(1 for r in records if r.verdicts[j] == r.gold)
        per_run.append(hits / len(records))
    return sum(per_run) / k


def bench_report(records: Sequence[BenchRecord]) -> dict:
    """mean@k accuracy, average output tokens, and a per-domain breakdown
    when records carry domain tags."""
    if not records:
        return {"k": 0, "n_tasks": 0, "mean_at_k": None, "avg_tokens": None, "domains": {}}
    ks = {len(r.verdicts) for r in records}
    if len(ks) != 1:
        raise MixedK(f"records carry different k values: {sorted(ks)}")
    k = ks.pop()
    all_tokens = [t for r in records for t in r.tokens_out]
    all_latency = [x for r in records for x in r.latency]
    report = {
        "k": k,
        "n_tasks": len(records),
        "mean_at_k": _mean_at_k(records, k),
        "avg_tokens": sum(all_tokens) / len(all_tokens) if all_tokens else 0.0,
        "avg_latency": sum(all_latency) / len(all_latency) if all_latency else None,
        "domains": {},
    }
    domains = sorted({r.domain for r in records if r.domain is not None})
    for dom in domains:
        sub = [r for r in records if r.domain == dom]
        sub_tokens = [t for r in sub for t in r.tokens_out]
        report["domains"][dom] = {
            "n_tasks": len(sub),
            "mean_at_k": _mean_at_k(sub, k),
            "avg_tokens": sum(sub_tokens) / len(sub_tokens) if sub_tokens else 0.0,
        }
    return report


def render_report_table(report: dict) -> str:
    lines = [
        f"tasks: {report['n_tasks']}   k: {report['k']}",
        f"mean@{report['k']}: {report['mean_at_k']:.4f}" if report["mean_at_k"] is not None else "mean@k: n/a",
        f"avg tokens: {report['avg_tokens']:.2f}" if report["avg_tokens"] is not None else "avg tokens: n/a",
    ]
    if report["domains"]:
        lines.append("")
        lines.append(f"{'domain':<20} {'n':>5} {'mean@k':>8} {'tokens':>8}")
        for dom, stats in report["domains"].items():
            lines.append(
                f"{dom:<20} {stats['n_tasks']:>5} {stats['mean_at_k']:>8.4f} {stats['avg_tokens']:>8.2f}"
            )
    return "\n".join(lines)


def render_report_figures(report: dict, records: Sequence[BenchRecord], out_dir) -> list[str]:
    """Write accuracy/token figures next to the report; returns file paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    if report["domains"]:
        names = list(report["domains"])
        accs = [report["domains"][d]["mean_at_k"] for d in names]
        fig, ax = plt.subplots(figsize=(max(4, len(names) * 0.9), 3.2))
        ax.bar(names, accs, color="#4878d0")
        ax.set_ylabel(f"mean@{report['k']} accuracy")
        ax.set_ylim(0, 1.05)
        ax.tick_params(axis="x", rotation=30)
        fig.tight_layout()
        path = out_dir / "accuracy_by_domain.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(str(path))

    tokens = [t for r in records for t in r.tokens_out]
    if tokens:
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        ax.hist(tokens, bins=min(30, max(5, len(set(tokens)))), color="#d65f5f")
        ax.set_xlabel("output tokens per verdict")
        ax.set_ylabel("count")
        fig.tight_layout()
        path = out_dir / "tokens_hist.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(str(path))

    return written
