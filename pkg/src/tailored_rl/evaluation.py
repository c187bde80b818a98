"""Sampling-based evaluation and the analysis tables built on it."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .dataset import ProblemSet
from .errors import InputError, ParseError
from .modes import ReasoningMode
from .policy import DecodeConfig
from .rollout import sample_responses

EVAL_K = 16
EVAL_TEMPERATURE = 0.6
EVAL_TOP_P = 0.95


def eval_decode(train_max_new_tokens: int) -> DecodeConfig:
    """Evaluation sampler with twice the training token budget."""
    return DecodeConfig(2 * train_max_new_tokens, EVAL_TEMPERATURE, EVAL_TOP_P)


@dataclass(frozen=True)
class ProblemEval:
    mode: ReasoningMode
    correct_mask: tuple[bool, ...]
    lengths: tuple[int, ...]

    @property
    def sample_count(self) -> int:
        return len(self.correct_mask)

    @property
    def pass_count(self) -> int:
        return sum(self.correct_mask)

    @property
    def mean_length(self) -> float:
        return float(np.mean(self.lengths))

    @property
    def mean_len_correct(self) -> float:
        xs = [l for l, c in zip(self.lengths, self.correct_mask) if c]
        return float(np.mean(xs)) if xs else 0.0

    @property
    def mean_len_incorrect(self) -> float:
        xs = [l for l, c in zip(self.lengths, self.correct_mask) if not c]
        return float(np.mean(xs)) if xs else 0.0


@dataclass(frozen=True)
class EvalReport:
    per_problem: dict[str, ProblemEval]
    mode: ReasoningMode
    decode: DecodeConfig

    def __post_init__(self):
        ks = {p.sample_count for p in self.per_problem.values()}
        if len(ks) > 1:
            raise InputError("every problem needs the same number of samples")

    @property
    def accuracy(self) -> float:
        if not self.per_problem:
            return 0.0
        return float(np.mean([p.pass_count / p.sample_count
                              for p in self.per_problem.values()]))

    @property
    def mean_length(self) -> float:
        if not self.per_problem:
            return 0.0
        return float(np.mean([p.mean_length for p in self.per_problem.values()]))

    @property
    def k(self) -> int:
        return next(iter(self.per_problem.values())).sample_count if self.per_problem else 0


def evaluate(source, problems: ProblemSet, mode: ReasoningMode, k: int = EVAL_K,
             cfg: DecodeConfig | None = None, root_seed: int = 0) -> EvalReport:
    if k < 1:
        raise InputError("k must be at least 1")
    cfg = cfg or eval_decode(8)
    mode = ReasoningMode(mode)
    per = {}
    for p in problems:
        rs = sample_responses(source, p, mode, k, cfg, root_seed)
        per[p.id] = ProblemEval(mode, tuple(r.reward == 1 for r in rs),
                                tuple(r.length for r in rs))
    return EvalReport(per, mode, cfg)


def oracle_union(report_thinking: EvalReport, report_nothinking: EvalReport) -> float:
    """Share of problems solved by at least one sample of either mode."""
    a, b = report_thinking.per_problem, report_nothinking.per_problem
    if set(a) != set(b):
        raise InputError("reports cover different problem sets")
    if report_thinking.k != report_nothinking.k:
        raise InputError("reports use different sample counts")
    if not a:
        return 0.0
    return float(np.mean([any(a[i].correct_mask) or any(b[i].correct_mask) for i in a]))


def bucket_by_difficulty(report: EvalReport, problems: ProblemSet, buckets):
    """Rows ``((lo, hi), n_problems, accuracy, mean_length)`` per inclusive bucket."""
    buckets = [(int(lo), int(hi)) for lo, hi in buckets]
    ordered = sorted(buckets)
    for (l1, h1), (l2, h2) in zip(ordered, ordered[1:]):
        if l2 <= h1:
            raise InputError(f"buckets {(l1, h1)} and {(l2, h2)} overlap")
    members = {b: [] for b in buckets}
    for pid, ev in report.per_problem.items():
        d = problems[pid].difficulty
        for lo, hi in buckets:
            if lo <= d <= hi:
                members[(lo, hi)].append(ev)
                break
        else:
            raise InputError(f"difficulty {d} of {pid} falls in no bucket")
    rows = []
    for b in buckets:
        evs = members[b]
        acc = float(np.mean([e.pass_count / e.sample_count for e in evs])) if evs else 0.0
        length = float(np.mean([e.mean_length for e in evs])) if evs else 0.0
        rows.append((b, len(evs), acc, length))
    return rows


def correct_incorrect_lengths(report: EvalReport) -> dict[str, tuple[float, float]]:
    """Per problem (mean correct length, mean incorrect length); a missing side is 0."""
    return {pid: (e.mean_len_correct, e.mean_len_incorrect)
            for pid, e in report.per_problem.items()}


def write_eval_report(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pid, e in report.per_problem.items():
            fh.write(json.dumps({
                "id": pid, "mode": e.mode.value, "pass_count": e.pass_count,
                "sample_count": e.sample_count, "mean_length": e.mean_length,
                "correct_mask": list(e.correct_mask), "lengths": list(e.lengths),
                "mean_len_correct": e.mean_len_correct,
                "mean_len_incorrect": e.mean_len_incorrect,
            }) + "\n")
        fh.write(json.dumps({"summary": {
            "mode": report.mode.value, "accuracy": report.accuracy,
            "mean_length": report.mean_length, "k": report.k,
            "decode": report.decode.to_dict()}}) + "\n")


def read_eval_report(path) -> EvalReport:
    per, summary = {}, None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if "summary" in rec:
                    summary = rec["summary"]
                    continue
                per[rec["id"]] = ProblemEval(ReasoningMode(rec["mode"]),
                                             tuple(bool(x) for x in rec["correct_mask"]),
                                             tuple(int(x) for x in rec["lengths"]))
            except (ValueError, KeyError, TypeError) as exc:
                raise ParseError(f"bad eval record ({exc})", lineno) from None
    if summary is None:
        raise ParseError("eval report lacks its summary record")
    return EvalReport(per, ReasoningMode(summary["mode"]), DecodeConfig(**summary["decode"]))


def write_plot_data(path, x_name: str, xs, series: dict[str, list]) -> None:
    """Comma-separated ``x, metric...`` table for external plotting."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([x_name, *series])
        for i, x in enumerate(xs):
            w.writerow([x, *(repr(float(v[i])) for v in series.values())])


def step_curves(metric_runs) -> tuple[list[int], dict[str, list[float]]]:
    """Concatenate per-stage metrics into one global step axis."""
    xs, series = [], {"clip_ratio": [], "mean_length_thinking": [],
                      "mean_length_nothinking": [], "mean_reward": []}
    offset = 0
    for rows in metric_runs:
        for r in rows:
            xs.append(offset + r.step)
            for k in series:
                series[k].append(getattr(r, k))
        offset += len(rows)
    return xs, series
