"""GRPO training over curriculum stages and the three-stage schedule."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import grpo
from .curriculum import (CategorizationReport, StageManifest, StageRule, build_stage,
                         categorize_dataset, write_manifest, write_report)
from .dataset import ProblemSet
from .errors import InputError
from .grpo import ClipBounds, RatioGranularity
from .modes import ReasoningMode
from .policy import DecodeConfig, PolicyParams
from .rollout import RolloutGroup, clip_ratio, rollout_group

log = logging.getLogger(__name__)

# learning rate used at LLM scale; the toy logits live on a unit scale and need
# a step several orders of magnitude larger
LLM_LEARNING_RATE = 1e-6
TOY_LEARNING_RATE = 3.0


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    group_size: int = 8
    learning_rate: float = TOY_LEARNING_RATE
    steps: int = 100
    bounds: ClipBounds = ClipBounds()
    granularity: RatioGranularity = RatioGranularity.PER_TOKEN
    max_new_tokens: int = 8
    mode_mix: float = 0.5
    root_seed: int = 0
    temperature: float = 1.0
    top_p: float = 1.0

    def __post_init__(self):
        if self.batch_size < 1:
            raise InputError("batch_size must be positive")
        if self.group_size < 2:
            raise InputError("training groups need at least two responses")
        if self.learning_rate <= 0 or self.steps < 1:
            raise InputError("learning_rate and steps must be positive")
        if not 0 <= self.mode_mix <= 1:
            raise InputError("mode_mix must lie in [0, 1]")
        object.__setattr__(self, "granularity", RatioGranularity(self.granularity))

    @property
    def decode(self) -> DecodeConfig:
        return DecodeConfig(self.max_new_tokens, self.temperature, self.top_p)


@dataclass(frozen=True)
class MetricsRow:
    step: int
    mean_reward: float
    clip_ratio: float
    mean_length_thinking: float
    mean_length_nothinking: float
    objective: float
    skipped_groups: int


METRICS_HEADER = [f.name for f in fields(MetricsRow)]


def format_metrics_row(row: MetricsRow) -> list[str]:
    return [repr(v) if isinstance(v, float) else str(v) for v in asdict(row).values()]


class MetricsWriter:
    """Append-only CSV sink; rows must arrive in strictly increasing step order."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", encoding="utf-8", newline="")
        self._csv = csv.writer(self._fh, lineterminator="\n")
        self._csv.writerow(METRICS_HEADER)
        self._last = None

    def __call__(self, row: MetricsRow):
        if self._last is not None and row.step <= self._last:
            raise InputError("metrics steps must strictly increase")
        self._last = row.step
        self._csv.writerow(format_metrics_row(row))
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path) -> list[MetricsRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return [MetricsRow(int(r["step"]), float(r["mean_reward"]), float(r["clip_ratio"]),
                           float(r["mean_length_thinking"]),
                           float(r["mean_length_nothinking"]), float(r["objective"]),
                           int(r["skipped_groups"])) for r in reader]


def with_advantages(group: RolloutGroup) -> RolloutGroup:
    if group.advantages is not None or group.skipped:
        return group
    return group.with_advantages(grpo.advantages(group.rewards))


def _mean_length(groups, mode) -> float:
    lengths = [r.length for g in groups if g.mode is mode for r in g.responses]
    # 0.0 marks a step without any group in this mode
    return float(np.mean(lengths)) if lengths else 0.0


def update_step(params: PolicyParams, batch, cfg: TrainConfig, step: int = 0):
    """One on-policy ascent step on the clipped objective."""
    batch = [with_advantages(g) for g in batch]
    if not batch:
        raise InputError("update_step needs a nonempty batch")
    responses = [r for g in batch for r in g.responses]
    live = [g for g in batch if not g.skipped]
    if live:
        obj, grad = grpo.objective_and_grad(params, params, live, cfg.bounds, cfg.granularity)
        new = params.with_theta(params.theta + cfg.learning_rate * grad)
    else:
        obj, new = 0.0, params
    row = MetricsRow(
        step=step,
        mean_reward=float(np.mean([r.reward for r in responses])),
        clip_ratio=clip_ratio(responses),
        mean_length_thinking=_mean_length(batch, ReasoningMode.THINKING),
        mean_length_nothinking=_mean_length(batch, ReasoningMode.NOTHINKING),
        objective=float(obj),
        skipped_groups=len(batch) - len(live),
    )
    return new, row


def train_stage(params: PolicyParams, manifest: StageManifest, problems: ProblemSet,
                cfg: TrainConfig, sink=None) -> PolicyParams:
    """Run `cfg.steps` updates on problems drawn with replacement from `manifest`."""
    if not manifest.problem_ids:
        raise InputError("cannot train on an empty manifest")
    pool = [problems[i] for i in manifest.problem_ids]
    decode = cfg.decode
    for step in range(cfg.steps):
        rng = np.random.default_rng(
            np.random.SeedSequence(cfg.root_seed, spawn_key=(manifest.stage_index, step)))
        picks = rng.integers(0, len(pool), size=cfg.batch_size)
        nothink = rng.random(cfg.batch_size) < cfg.mode_mix
        batch = []
        for slot, (k, nt) in enumerate(zip(picks, nothink)):
            mode = ReasoningMode.NOTHINKING if nt else ReasoningMode.THINKING
            batch.append(rollout_group(params, pool[k], mode, cfg.group_size, decode,
                                       cfg.root_seed, tags=(manifest.stage_index, step, slot)))
        params, row = update_step(params, batch, cfg, step)
        if sink is not None:
            sink(row)
    return params


def write_checkpoint(params: PolicyParams, path) -> None:
    buf = io.StringIO()
    np.savetxt(buf, params.theta, fmt="%.17g")
    header = (f"# version={params.version} window={params.window} "
              f"feature_dim={params.feature_dim} vocab_size={params.vocab_size}\n")
    Path(path).write_text(header + buf.getvalue(), encoding="utf-8")


def read_checkpoint(path) -> PolicyParams:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        meta = dict(kv.split("=") for kv in header.lstrip("# ").split())
        theta = np.loadtxt(fh, ndmin=2)
    shape = (int(meta["feature_dim"]), int(meta["vocab_size"]))
    if theta.shape != shape:
        raise InputError(f"checkpoint body {theta.shape} disagrees with header {shape}")
    return PolicyParams(theta, int(meta["window"]), int(meta["version"]))


@dataclass
class ScheduleResult:
    params: PolicyParams
    reports: list[CategorizationReport] = field(default_factory=list)
    manifests: list[StageManifest] = field(default_factory=list)
    checkpoints: list[PolicyParams] = field(default_factory=list)
    metrics: list[list[MetricsRow]] = field(default_factory=list)
    out_dir: Path | None = None


DIRECT_TRAIN = {1: StageRule.FULL_DATASET, 2: StageRule.FULL_DATASET,
                3: StageRule.FULL_DATASET}


def run_schedule(problems: ProblemSet, stage_cfgs, initial: PolicyParams, out_dir=None,
                 rules: dict | None = None,
                 categorize_mode: ReasoningMode = ReasoningMode.THINKING) -> ScheduleResult:
    """Categorise, build stage 1, train; repeat for stage 2; stage 3 on everything.

    Pass ``rules=DIRECT_TRAIN`` for the no-curriculum ablation.  Artifacts are
    written to `out_dir` as each stage completes.
    """
    stage_cfgs = list(stage_cfgs)
    if len(stage_cfgs) != 3:
        raise InputError("the schedule needs exactly three stage configs")
    rules = rules or {}
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_checkpoint(initial, out / "checkpoint_stage0.txt")
    result = ScheduleResult(initial, checkpoints=[initial], out_dir=out)
    params = initial
    for stage, cfg in enumerate(stage_cfgs, 1):
        report = None
        if stage < 3:
            report = categorize_dataset(params, problems,
                                        DecodeConfig(cfg.max_new_tokens, greedy=True),
                                        categorize_mode)
            result.reports.append(report)
            log.info("stage %d categorisation: G1/G2/G3 = %s", stage, report.counts)
            if out is not None:
                write_report(report, out / f"report_stage{stage}.jsonl")
        manifest = build_stage(report, stage, problems, rules.get(stage))
        result.manifests.append(manifest)
        if out is not None:
            write_manifest(manifest, out / f"manifest_stage{stage}.txt")
        rows: list[MetricsRow] = []
        if out is not None:
            with MetricsWriter(out / f"metrics_stage{stage}.csv") as writer:
                def sink(row, _w=writer):
                    rows.append(row)
                    _w(row)
                params = train_stage(params, manifest, problems, cfg, sink)
        else:
            params = train_stage(params, manifest, problems, cfg, rows.append)
        result.metrics.append(rows)
        result.checkpoints.append(params)
        if out is not None:
            write_checkpoint(params, out / f"checkpoint_stage{stage}.txt")
    result.params = params
    return result
