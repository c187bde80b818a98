"""Command-line entry point: ``python -m tailored_rl <command> ...``.

Exit status is 0 on success, 1 for invalid input or configuration and 2 for
runtime or transport failures.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import curriculum, dataset, evaluation, policy, trainer
from .adapter import GenerationClient
from .config import RunConfig
from .errors import InputError, NumericError, TransportError, ValidationError
from .modes import ReasoningMode
from .policy import DecodeConfig

log = logging.getLogger("tailored_rl")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# flag destination -> configuration key
FLAG_KEYS = {
    "count": "dataset.count", "min_difficulty": "dataset.difficulty_min",
    "max_difficulty": "dataset.difficulty_max", "seed": "dataset.seed",
    "root_seed": "run.root_seed", "output_dir": "run.output_dir", "run_name": "run.run_name",
    "window": "policy.window", "init": "policy.init",
    "adapter_url": "adapter.url", "timeout_ms": "adapter.timeout_ms",
}
CMD_FLAG_KEYS = {
    "categorize": {"max_new_tokens": "categorize.max_new_tokens", "mode": "categorize.mode"},
    "eval": {"max_new_tokens": "eval.max_new_tokens", "mode": "eval.mode", "k": "eval.k",
             "temperature": "eval.temperature", "top_p": "eval.top_p"},
    "train": {"max_new_tokens": "train.max_new_tokens", "steps": "train.steps",
              "learning_rate": "train.learning_rate", "batch_size": "train.batch_size",
              "group_size": "train.group_size", "mode_mix": "train.mode_mix",
              "granularity": "train.granularity"},
}


def _common(p, *names):
    if "config" in names:
        p.add_argument("--config", help="INI run configuration")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override any configuration key")
    if "source" in names:
        p.add_argument("--checkpoint", help="policy checkpoint (default: policy.init)")
        p.add_argument("--adapter", action="store_true",
                       help="use the generation server at adapter.url")
        p.add_argument("--adapter-url", dest="adapter_url")
        p.add_argument("--timeout-ms", dest="timeout_ms", type=int)
        p.add_argument("--window", type=int)
    if "problems" in names:
        p.add_argument("--problems", help="problem file (default: synthesize from the config)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="tailored_rl", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a toy problem file")
    _common(p, "config")
    p.add_argument("--count", type=int)
    p.add_argument("--min-difficulty", dest="min_difficulty", type=int)
    p.add_argument("--max-difficulty", dest="max_difficulty", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("categorize", help="greedy G1/G2/G3 labelling")
    _common(p, "config", "source", "problems")
    p.add_argument("--greedy", action="store_true", default=True,
                   help="greedy decoding (always on; categorisation is greedy)")
    p.add_argument("--max-new-tokens", dest="max_new_tokens", type=int)
    p.add_argument("--mode", choices=[m.value for m in ReasoningMode])
    p.add_argument("--out", required=True)

    p = sub.add_parser("stage", help="build a stage manifest from a report")
    _common(p, "config", "problems")
    p.add_argument("--report")
    p.add_argument("--stage-index", dest="stage_index", type=int, required=True,
                   choices=[1, 2, 3])
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train one stage")
    _common(p, "config", "source", "problems")
    p.add_argument("--manifest", required=True)
    for flag, typ in (("steps", int), ("learning-rate", float), ("batch-size", int),
                      ("group-size", int), ("mode-mix", float), ("max-new-tokens", int)):
        p.add_argument(f"--{flag}", dest=flag.replace("-", "_"), type=typ)
    p.add_argument("--granularity", choices=["per_token", "per_sequence"])
    p.add_argument("--root-seed", dest="root_seed", type=int)
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--run-name", dest="run_name")

    p = sub.add_parser("schedule", help="full three-stage curriculum run")
    _common(p, "config", "problems")
    p.add_argument("--direct-train", action="store_true",
                   help="ablation: every stage trains on the full dataset")
    p.add_argument("--root-seed", dest="root_seed", type=int)
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--run-name", dest="run_name")
    p.add_argument("--init")
    p.add_argument("--window", type=int)

    p = sub.add_parser("eval", help="sampling evaluation in one mode")
    _common(p, "config", "source", "problems")
    p.add_argument("--mode", choices=[m.value for m in ReasoningMode])
    p.add_argument("--k", type=int)
    p.add_argument("--temperature", type=float)
    p.add_argument("--top-p", dest="top_p", type=float)
    p.add_argument("--max-new-tokens", dest="max_new_tokens", type=int)
    p.add_argument("--root-seed", dest="root_seed", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="analysis tables and plot data")
    _common(p, "problems")
    rsub = p.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    r = rsub.add_parser("buckets", help="accuracy/length per difficulty bucket")
    r.add_argument("--eval", required=True, dest="eval_path")
    r.add_argument("--problems", required=True)
    r.add_argument("--bucket", action="append", required=True, metavar="LO-HI")
    r.add_argument("--csv")
    r = rsub.add_parser("union", help="oracle union of two eval reports")
    r.add_argument("--thinking", required=True)
    r.add_argument("--nothinking", required=True)
    r = rsub.add_parser("lengths", help="per-problem correct/incorrect mean lengths")
    r.add_argument("--eval", required=True, dest="eval_path")
    r.add_argument("--csv")
    r = rsub.add_parser("curves", help="per-step metric curves from metrics files")
    r.add_argument("--metrics", nargs="+", required=True)
    r.add_argument("--csv", required=True)
    r = rsub.add_parser("complexity", help="stage composition under a reference report")
    r.add_argument("--base-report", dest="base_report", required=True)
    r.add_argument("--manifests", nargs="+", required=True)
    return ap


def resolve_config(args) -> RunConfig:
    overrides = {}
    keymap = dict(FLAG_KEYS, **CMD_FLAG_KEYS.get(args.command, {}))
    for dest, key in keymap.items():
        val = getattr(args, dest, None)
        if val is not None:
            overrides[key] = val
            if key in CMD_FLAG_KEYS["train"].values():
                # a flag beats a per-stage value from the file as well
                for stage in (1, 2, 3):
                    overrides[key.replace("train.", f"train.stage{stage}.", 1)] = val
    for item in getattr(args, "set", []) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    return RunConfig.load(getattr(args, "config", None), overrides)


def load_problems(cfg: RunConfig, path=None, section="dataset") -> dataset.ProblemSet:
    """Read `path`, else `dataset.path`, else synthesize from `section`."""
    path = path or cfg.get("dataset.path")
    if path:
        return dataset.read_problems(path)
    return dataset.synth_dataset(cfg.getint(f"{section}.count"),
                                 (cfg.getint(f"{section}.difficulty_min"),
                                  cfg.getint(f"{section}.difficulty_max")),
                                 cfg.getint(f"{section}.seed"),
                                 prefix="p" if section == "dataset" else "e")


def initial_policy(cfg: RunConfig) -> policy.PolicyParams:
    init = cfg.get("policy.init")
    window = cfg.getint("policy.window")
    if init == "base":
        return policy.base_policy(cfg.getfloat("policy.base_strength"), window)
    if init == "zeros":
        return policy.zeros(window)
    return trainer.read_checkpoint(init)


def response_source(args, cfg: RunConfig):
    if getattr(args, "adapter", False):
        return GenerationClient.from_config(cfg.section("adapter"))
    if getattr(args, "checkpoint", None):
        return trainer.read_checkpoint(args.checkpoint)
    return initial_policy(cfg)


def run_dir(cfg: RunConfig) -> Path:
    name = cfg.get("run.run_name") or time.strftime("%Y%m%d-%H%M%S")
    out = Path(cfg.get("run.output_dir")) / name
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved.cfg").write_text(cfg.dumps(), encoding="utf-8")
    return out


def _parse_bucket(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("-")
    try:
        return (int(lo), int(hi if sep else lo))
    except ValueError:
        raise ValidationError(f"bucket must look like LO-HI, got {text!r}") from None


def cmd_synth(args, cfg):
    ps = dataset.synth_dataset(cfg.getint("dataset.count"),
                               (cfg.getint("dataset.difficulty_min"),
                                cfg.getint("dataset.difficulty_max")),
                               cfg.getint("dataset.seed"))
    dataset.write_problems(ps, args.out)
    print(f"wrote {len(ps)} problems to {args.out}")


def cmd_categorize(args, cfg):
    problems = load_problems(cfg, args.problems)
    decode = DecodeConfig(cfg.getint("categorize.max_new_tokens"), greedy=True)
    report = curriculum.categorize_dataset(response_source(args, cfg), problems, decode,
                                           ReasoningMode(cfg.get("categorize.mode")))
    curriculum.write_report(report, args.out)
    n1, n2, n3 = report.counts
    print(f"G1={n1} G2={n2} G3={n3} -> {args.out}")


def cmd_stage(args, cfg):
    problems = load_problems(cfg, args.problems)
    report = curriculum.read_report(args.report) if args.report else None
    manifest = curriculum.build_stage(report, args.stage_index, problems)
    curriculum.write_manifest(manifest, args.out)
    print(f"stage {manifest.stage_index}: {len(manifest)} problems -> {args.out}")


def cmd_train(args, cfg):
    if args.adapter:
        raise ValidationError("training runs on the built-in policy only")
    problems = load_problems(cfg, args.problems)
    manifest = curriculum.read_manifest(args.manifest)
    missing = [i for i in manifest.problem_ids if i not in problems]
    if missing:
        raise ValidationError(f"manifest ids not in problem set: {missing[:5]}")
    params = response_source(args, cfg)
    tcfg = cfg.stage_config(manifest.stage_index)
    out = run_dir(cfg)
    with trainer.MetricsWriter(out / f"metrics_stage{manifest.stage_index}.csv") as sink:
        params = trainer.train_stage(params, manifest, problems, tcfg, sink)
    trainer.write_checkpoint(params, out / f"checkpoint_stage{manifest.stage_index}.txt")
    print(f"trained stage {manifest.stage_index} for {tcfg.steps} steps -> {out}")


def cmd_schedule(args, cfg):
    problems = load_problems(cfg, args.problems)
    out = run_dir(cfg)
    cfgs = [cfg.stage_config(s) for s in (1, 2, 3)]
    rules = trainer.DIRECT_TRAIN if args.direct_train else None
    result = trainer.run_schedule(problems, cfgs, initial_policy(cfg), out, rules=rules,
                                  categorize_mode=ReasoningMode(cfg.get("categorize.mode")))
    table = curriculum.data_complexity_table(result.manifests, result.reports[0])
    text = curriculum.format_complexity_table(table)
    (out / "data_complexity.txt").write_text(text + "\n", encoding="utf-8")
    xs, series = evaluation.step_curves(result.metrics)
    evaluation.write_plot_data(out / "curves.csv", "step", xs, series)
    print(text)
    print(f"artifacts in {out}")


def cmd_eval(args, cfg):
    # held-out set defaults to the [eval] synthesis keys
    problems = (dataset.read_problems(args.problems) if args.problems
                else load_problems(cfg, None, "eval"))
    decode = DecodeConfig(cfg.getint("eval.max_new_tokens"), cfg.getfloat("eval.temperature"),
                          cfg.getfloat("eval.top_p"))
    report = evaluation.evaluate(response_source(args, cfg), problems,
                                 ReasoningMode(cfg.get("eval.mode")), cfg.getint("eval.k"),
                                 decode, cfg.getint("run.root_seed"))
    evaluation.write_eval_report(report, args.out)
    print(f"{report.mode.value}: accuracy={report.accuracy:.4f} "
          f"mean_length={report.mean_length:.2f} -> {args.out}")


def cmd_report(args, cfg):
    if args.kind == "buckets":
        report = evaluation.read_eval_report(args.eval_path)
        rows = evaluation.bucket_by_difficulty(report, dataset.read_problems(args.problems),
                                               [_parse_bucket(b) for b in args.bucket])
        for (lo, hi), n, acc, length in rows:
            print(f"{lo}-{hi}\t{n}\t{acc:.4f}\t{length:.2f}")
        if args.csv:
            evaluation.write_plot_data(args.csv, "bucket", [f"{lo}-{hi}" for (lo, hi), *_ in rows],
                                       {"n": [r[1] for r in rows], "accuracy": [r[2] for r in rows],
                                        "mean_length": [r[3] for r in rows]})
    elif args.kind == "union":
        a = evaluation.read_eval_report(args.thinking)
        b = evaluation.read_eval_report(args.nothinking)
        print(f"thinking\t{a.accuracy:.4f}\nnothinking\t{b.accuracy:.4f}\n"
              f"oracle_union\t{evaluation.oracle_union(a, b):.4f}")
    elif args.kind == "lengths":
        report = evaluation.read_eval_report(args.eval_path)
        table = evaluation.correct_incorrect_lengths(report)
        for pid, (c, i) in table.items():
            print(f"{pid}\t{c:.2f}\t{i:.2f}")
        if args.csv:
            evaluation.write_plot_data(args.csv, "id", list(table),
                                       {"mean_len_correct": [v[0] for v in table.values()],
                                        "mean_len_incorrect": [v[1] for v in table.values()]})
    elif args.kind == "curves":
        runs = [trainer.read_metrics(p) for p in args.metrics]
        xs, series = evaluation.step_curves(runs)
        evaluation.write_plot_data(args.csv, "step", xs, series)
        print(f"{len(xs)} steps -> {args.csv}")
    elif args.kind == "complexity":
        base = curriculum.read_report(args.base_report)
        manifests = [curriculum.read_manifest(m) for m in args.manifests]
        print(curriculum.format_complexity_table(curriculum.data_complexity_table(manifests, base)))


COMMANDS = {"synth": cmd_synth, "categorize": cmd_categorize, "stage": cmd_stage,
            "train": cmd_train, "schedule": cmd_schedule, "eval": cmd_eval,
            "report": cmd_report}


def dispatch(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args) if args.command != "report" else None
        COMMANDS[args.command](args, cfg)
    except (ValidationError, InputError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TransportError, NumericError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(dispatch())
