"""Proficiency-based categorisation and per-stage training sets.

Every problem is decoded greedily with the current policy and labelled G1
(correct), G2 (complete but wrong) or G3 (ran out of tokens).  Stages 1 and 2
train on G1 and G2 together; stage 3 trains on the whole corpus.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import ProblemSet
from .errors import InputError, ParseError, ValidationError
from .modes import ReasoningMode
from .policy import DecodeConfig, PolicyParams
from .reward import DifficultyGroup, classify
from .rollout import sample_responses


@dataclass(frozen=True)
class LabelRecord:
    group: DifficultyGroup
    response_length: int
    truncated: bool
    correct: bool


@dataclass(frozen=True)
class CategorizationReport:
    labels: dict[str, DifficultyGroup]
    policy_version: int
    decode: DecodeConfig
    details: dict[str, LabelRecord] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.decode.greedy:
            raise ValidationError("categorisation must use greedy decoding")

    @property
    def counts(self) -> tuple[int, int, int]:
        vals = list(self.labels.values())
        return tuple(vals.count(g) for g in DifficultyGroup)

    def ids_in(self, *groups: DifficultyGroup) -> list[str]:
        return [i for i, g in self.labels.items() if g in groups]


def categorize_dataset(source, problems: ProblemSet, cfg: DecodeConfig,
                       mode: ReasoningMode = ReasoningMode.THINKING) -> CategorizationReport:
    """One greedy response per problem, labelled in corpus order."""
    if not cfg.greedy:
        raise InputError("categorisation requires greedy decoding")
    labels, details = {}, {}
    for p in problems:
        (resp,) = sample_responses(source, p, mode, 1, cfg)
        g = classify(p, resp)
        labels[p.id] = g
        details[p.id] = LabelRecord(g, resp.length, resp.truncated, g is DifficultyGroup.G1)
    version = source.version if isinstance(source, PolicyParams) else -1
    return CategorizationReport(labels, version, cfg, details)


class StageRule(str, enum.Enum):
    G1_UNION_G2 = "G1_union_G2"
    FULL_DATASET = "FullDataset"


DEFAULT_RULES = {1: StageRule.G1_UNION_G2, 2: StageRule.G1_UNION_G2,
                 3: StageRule.FULL_DATASET}


@dataclass(frozen=True)
class StageManifest:
    stage_index: int
    problem_ids: tuple[str, ...]
    rule: StageRule
    source_report: CategorizationReport | None = field(default=None, compare=False)

    def __len__(self):
        return len(self.problem_ids)


def build_stage(report: CategorizationReport | None, stage_index: int,
                full_set: ProblemSet, rule: StageRule | None = None) -> StageManifest:
    if stage_index not in (1, 2, 3):
        raise InputError("stage_index must be 1, 2 or 3")
    rule = StageRule(rule or DEFAULT_RULES[stage_index])
    if rule is StageRule.FULL_DATASET:
        return StageManifest(stage_index, tuple(full_set.ids), rule, report)
    if report is None:
        raise InputError(f"stage {stage_index} needs a categorisation report")
    keep = {DifficultyGroup.G1, DifficultyGroup.G2}
    ids = tuple(i for i in full_set.ids if report.labels.get(i) in keep)
    if not ids:
        raise ValidationError(f"stage {stage_index} has no G1/G2 problems to train on")
    return StageManifest(stage_index, ids, rule, report)


def data_complexity_table(manifests, base_report: CategorizationReport):
    """Composition of each stage's training set under one reference labelling.

    Returns rows ``(stage_index, g1_pct, g2_pct, g3_pct, total)``.
    """
    rows = []
    for m in manifests:
        n = len(m.problem_ids)
        counts = [0, 0, 0]
        order = list(DifficultyGroup)
        for i in m.problem_ids:
            counts[order.index(base_report.labels[i])] += 1
        pct = [100.0 * c / n if n else 0.0 for c in counts]
        rows.append((m.stage_index, *pct, n))
    return rows


def format_complexity_table(rows) -> str:
    lines = [f"{'':8s}{'G1 (%)':>8s}{'G2 (%)':>8s}{'G3 (%)':>8s}{'Total (#)':>11s}"]
    for stage, g1, g2, g3, total in rows:
        lines.append(f"{'Stage ' + str(stage):8s}{g1:8.1f}{g2:8.1f}{g3:8.1f}{total:11d}")
    return "\n".join(lines)


def write_report(report: CategorizationReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pid, g in report.labels.items():
            d = report.details.get(pid)
            fh.write(json.dumps({
                "id": pid, "group": g.value,
                "response_length": d.response_length if d else None,
                "truncated": d.truncated if d else g is DifficultyGroup.G3,
                "correct": d.correct if d else g is DifficultyGroup.G1,
            }) + "\n")
        n1, n2, n3 = report.counts
        fh.write(json.dumps({"summary": {
            "counts": [n1, n2, n3], "policy_version": report.policy_version,
            "decode": report.decode.to_dict()}}) + "\n")


def read_report(path) -> CategorizationReport:
    labels, details = {}, {}
    summary = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if "summary" in rec:
                    summary = rec["summary"]
                    continue
                g = DifficultyGroup(rec["group"])
                labels[rec["id"]] = g
                details[rec["id"]] = LabelRecord(g, rec["response_length"],
                                                 rec["truncated"], rec["correct"])
            except (ValueError, KeyError, TypeError) as exc:
                raise ParseError(f"bad report record ({exc})", lineno) from None
    if summary is None:
        version, decode = -1, DecodeConfig(greedy=True)
    else:
        version, decode = summary["policy_version"], DecodeConfig(**summary["decode"])
        if list(summary["counts"]) != [list(labels.values()).count(g) for g in DifficultyGroup]:
            raise ValidationError("report summary counts disagree with its records")
    return CategorizationReport(labels, version, decode, details)


def write_manifest(manifest: StageManifest, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps({"stage_index": manifest.stage_index,
                             "rule": manifest.rule.value,
                             "count": len(manifest.problem_ids)}) + "\n")
        for pid in manifest.problem_ids:
            fh.write(pid + "\n")


def read_manifest(path) -> StageManifest:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ParseError("empty manifest file", 1)
    try:
        header = json.loads(lines[0])
        stage, rule, count = header["stage_index"], StageRule(header["rule"]), header["count"]
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"bad manifest header ({exc})", 1) from None
    ids = tuple(l for l in lines[1:] if l)
    if len(ids) != count:
        raise ValidationError(f"manifest header says {count} ids, found {len(ids)}")
    return StageManifest(stage, ids, rule)
