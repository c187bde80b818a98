"""Reasoning modes, the toy vocabulary and prompt rendering.

Thinking prompts stop right after the opening marker so the model writes its
own thinking span.  NoThinking prompts close the span themselves with a fixed
filler, leaving only the answer to generate.
"""
from __future__ import annotations

import enum
import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .dataset import ProblemRecord

# Token ids.  Digits map to themselves.
PLUS = 10
THINK_OPEN = 11
THINK_CLOSE = 12
ANSWER = 13
EOS = 14
FILLER = 15
VOCAB_SIZE = 16

TOKEN_TEXT = [str(d) for d in range(10)] + [
    "+", "<thinking>", "</thinking>", "<answer>", "<eos>", "<filler>",
]

FILLER_SENTENCE = "Okay, I think I can solve it directly."


class ReasoningMode(str, enum.Enum):
    THINKING = "thinking"
    NOTHINKING = "nothinking"


def is_digit(token: int) -> bool:
    return 0 <= token <= 9


def detokenize(tokens) -> str:
    return "".join(TOKEN_TEXT[t] for t in tokens)


def operand_tokens(problem: ProblemRecord) -> list[int]:
    out: list[int] = []
    for i, d in enumerate(problem.operands):
        if i:
            out.append(PLUS)
        out.append(int(d))
    return out


def render_prompt(problem: ProblemRecord, mode: ReasoningMode) -> tuple[int, ...]:
    """Token prompt for the built-in policy."""
    toks = operand_tokens(problem) + [THINK_OPEN]
    if ReasoningMode(mode) is ReasoningMode.NOTHINKING:
        toks += [FILLER, THINK_CLOSE]
    return tuple(toks)


def prompt_length(difficulty: int, mode: ReasoningMode) -> int:
    base = 2 * difficulty  # operands, pluses and the opening marker
    return base + (2 if ReasoningMode(mode) is ReasoningMode.NOTHINKING else 0)


@lru_cache(maxsize=None)
def _default_templates() -> dict[str, str]:
    text = resources.files(__package__).joinpath("templates.json").read_text("utf-8")
    return load_templates_text(text)


def load_templates_text(text: str) -> dict[str, str]:
    data = json.loads(text)
    missing = {"thinking", "nothinking"} - set(data)
    if missing:
        raise ValueError(f"template file lacks entries: {sorted(missing)}")
    if FILLER_SENTENCE not in data["nothinking"]:
        raise ValueError("nothinking template must contain the filler sentence verbatim")
    return {"thinking": data["thinking"], "nothinking": data["nothinking"]}


def load_templates(path: str | Path | None = None) -> dict[str, str]:
    if path is None:
        return _default_templates()
    return load_templates_text(Path(path).read_text("utf-8"))


def problem_text(problem: ProblemRecord) -> str:
    if problem.prompt is not None:
        return problem.prompt
    expr = " + ".join(str(d) for d in problem.operands)
    return f"What is ({expr}) mod 10?"


def render_text_prompt(problem: ProblemRecord, mode: ReasoningMode,
                       templates: dict[str, str] | None = None) -> str:
    """Text prompt for the generation-server path."""
    templates = templates or _default_templates()
    return templates[ReasoningMode(mode).value].format(problem=problem_text(problem))
