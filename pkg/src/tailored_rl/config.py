"""Flat-sectioned run configuration (INI syntax).

Keys are addressed as ``section.key``; per-stage training blocks are the
sections ``train.stage1`` .. ``train.stage3`` and inherit from ``train``.
Defaults follow the toy laboratory; the LLM-scale constants (batch 128,
rollout 8, clip 0.2/0.28, steps 280/350/1250) are kept in ``LLM_SCALE``.
"""
from __future__ import annotations

import configparser
import io
from pathlib import Path

from .errors import ValidationError
from .grpo import ClipBounds
from .trainer import TrainConfig

DEFAULTS = {
    "run": {"output_dir": "runs", "root_seed": "0", "run_name": ""},
    "dataset": {"path": "", "count": "400", "difficulty_min": "1",
                "difficulty_max": "2", "seed": "1"},
    "policy": {"init": "base", "window": "5", "base_strength": "4.0"},
    "train": {"batch_size": "32", "group_size": "8", "learning_rate": "3.0",
              "steps": "150", "eps_low": "0.2", "eps_high": "0.28",
              "granularity": "per_token", "max_new_tokens": "8", "mode_mix": "0.5",
              "temperature": "1.0", "top_p": "1.0"},
    "train.stage1": {}, "train.stage2": {}, "train.stage3": {},
    "categorize": {"max_new_tokens": "8", "mode": "thinking", "greedy": "true"},
    "eval": {"k": "16", "temperature": "0.6", "top_p": "0.95", "max_new_tokens": "16",
             "mode": "thinking", "count": "200", "difficulty_min": "1",
             "difficulty_max": "2", "seed": "2"},
    "adapter": {"url": "", "timeout_ms": "60000", "max_retries": "2"},
}

LLM_SCALE = {
    "train": {"batch_size": "128", "group_size": "8", "learning_rate": "1e-6",
              "eps_low": "0.2", "eps_high": "0.28", "max_new_tokens": "8192"},
    "train.stage1": {"steps": "280"},
    "train.stage2": {"steps": "350"},
    "train.stage3": {"steps": "1250"},
    "categorize": {"max_new_tokens": "8192"},
    "eval": {"k": "16", "temperature": "0.6", "top_p": "0.95", "max_new_tokens": "16384"},
}

STAGE_SECTIONS = ("train.stage1", "train.stage2", "train.stage3")


class RunConfig:
    def __init__(self, parser: configparser.ConfigParser):
        self._cp = parser

    @classmethod
    def load(cls, path=None, overrides: dict[str, str] | None = None,
             base: dict | None = None) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.read_dict(DEFAULTS)
        if base:
            cp.read_dict(base)
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise ValidationError(f"config file {path} not found")
            cp.read(path, encoding="utf-8")
        for dotted, value in (overrides or {}).items():
            section, key = split_key(dotted)
            if not cp.has_section(section):
                cp.add_section(section)
            cp.set(section, key, str(value))
        return cls(cp)

    def get(self, dotted: str, fallback=None) -> str:
        section, key = split_key(dotted)
        if section in STAGE_SECTIONS and not self._cp.has_option(section, key):
            section = "train"
        return self._cp.get(section, key, fallback=fallback)

    def getint(self, dotted: str) -> int:
        return int(self.get(dotted))

    def getfloat(self, dotted: str) -> float:
        return float(self.get(dotted))

    def getbool(self, dotted: str) -> bool:
        return self.get(dotted).strip().lower() in ("1", "true", "yes", "on")

    def section(self, name: str) -> dict[str, str]:
        return dict(self._cp.items(name)) if self._cp.has_section(name) else {}

    def stage_config(self, stage: int) -> TrainConfig:
        s = f"train.stage{stage}"
        return TrainConfig(
            batch_size=self.getint(f"{s}.batch_size"),
            group_size=self.getint(f"{s}.group_size"),
            learning_rate=self.getfloat(f"{s}.learning_rate"),
            steps=self.getint(f"{s}.steps"),
            bounds=ClipBounds(self.getfloat(f"{s}.eps_low"), self.getfloat(f"{s}.eps_high")),
            granularity=self.get(f"{s}.granularity"),
            max_new_tokens=self.getint(f"{s}.max_new_tokens"),
            mode_mix=self.getfloat(f"{s}.mode_mix"),
            root_seed=self.getint("run.root_seed"),
            temperature=self.getfloat(f"{s}.temperature"),
            top_p=self.getfloat(f"{s}.top_p"),
        )

    def dumps(self) -> str:
        buf = io.StringIO()
        self._cp.write(buf)
        return buf.getvalue()


def split_key(dotted: str) -> tuple[str, str]:
    section, sep, key = dotted.rpartition(".")
    if not sep or not section or not key:
        raise ValidationError(f"configuration keys look like section.key, got {dotted!r}")
    return section, key
