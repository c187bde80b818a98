"""Problem records, the arithmetic-chain toy task, and JSONL problem files."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, ParseError, ValidationError

SOURCES = ("synthetic", "external")


@dataclass(frozen=True)
class ProblemRecord:
    id: str
    operands: tuple[int, ...]
    difficulty: int
    answer: str
    source: str = "synthetic"
    # free-text prompt for external problems; synthetic ones render from operands
    prompt: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "operands", tuple(int(x) for x in self.operands))
        if self.source not in SOURCES:
            raise ValidationError(f"{self.id}: unknown source {self.source!r}")
        if self.difficulty < 1:
            raise ValidationError(f"{self.id}: difficulty must be positive")
        if self.source == "synthetic":
            if len(self.operands) != self.difficulty:
                raise ValidationError(f"{self.id}: difficulty != operand count")
            if any(not 0 <= d <= 9 for d in self.operands):
                raise ValidationError(f"{self.id}: operands must be digits")
            if self.answer != str(sum(self.operands) % 10):
                raise ValidationError(f"{self.id}: answer is not the operand sum mod 10")

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "operands": list(self.operands),
            "difficulty": self.difficulty,
            "answer": self.answer,
            "source": self.source,
        }
        if self.prompt is not None:
            d["prompt"] = self.prompt
        return d


@dataclass(frozen=True)
class ProblemSet:
    problems: tuple[ProblemRecord, ...] = ()
    seed: int = 0
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "problems", tuple(self.problems))
        index = {}
        for p in self.problems:
            if p.id in index:
                raise ValidationError(f"duplicate problem id {p.id!r}")
            index[p.id] = p
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.problems)

    def __iter__(self):
        return iter(self.problems)

    def __getitem__(self, problem_id: str) -> ProblemRecord:
        return self._index[problem_id]

    def __contains__(self, problem_id) -> bool:
        return problem_id in self._index

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.problems]

    def subset(self, ids) -> "ProblemSet":
        return ProblemSet(tuple(self._index[i] for i in ids), self.seed)


def make_problem(operands, problem_id: str) -> ProblemRecord:
    operands = tuple(int(x) for x in operands)
    return ProblemRecord(problem_id, operands, len(operands), str(sum(operands) % 10))


def synth_dataset(count: int, difficulty_range: tuple[int, int], seed: int,
                  prefix: str = "p") -> ProblemSet:
    """Draw `count` arithmetic-chain problems; answers are the operand sum mod 10."""
    lo, hi = difficulty_range
    if count < 1:
        raise InputError("count must be at least 1")
    if lo < 1 or lo > hi:
        raise InputError(f"invalid difficulty range [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    problems = []
    for i in range(count):
        n = int(rng.integers(lo, hi + 1))
        ops = rng.integers(0, 10, size=n)
        problems.append(make_problem(ops, f"{prefix}{i}"))
    return ProblemSet(tuple(problems), seed)


def _record_from_dict(d: dict, lineno: int) -> ProblemRecord:
    try:
        return ProblemRecord(
            id=str(d["id"]),
            operands=tuple(d["operands"]),
            difficulty=int(d["difficulty"]),
            answer=str(d["answer"]),
            source=d.get("source", "synthetic"),
            prompt=d.get("prompt"),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bad problem record ({exc})", lineno) from None
    except ValidationError as exc:
        raise ParseError(str(exc), lineno) from None


def read_problems(path) -> ProblemSet:
    """Read a line-delimited problem file.

    The optional header ``{"seed": ...}`` line written by :func:`write_problems`
    restores the generation seed; files without it get seed 0.
    """
    problems = []
    seed = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
            if not isinstance(d, dict):
                raise ParseError("record is not an object", lineno)
            if set(d) == {"seed"}:
                seed = int(d["seed"])
                continue
            problems.append(_record_from_dict(d, lineno))
    return ProblemSet(tuple(problems), seed)


def write_problems(problem_set: ProblemSet, path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if problem_set.seed:
            fh.write(json.dumps({"seed": problem_set.seed}) + "\n")
        for p in problem_set.problems:
            fh.write(json.dumps(p.to_dict(), ensure_ascii=False) + "\n")
