"""Answer extraction, rule-based verification and difficulty groups."""
from __future__ import annotations

import enum
import re

from . import modes
from .dataset import ProblemRecord
from .modes import ReasoningMode
from .policy import Response

_INTEGER = re.compile(r"[+-]?\d+")


class DifficultyGroup(str, enum.Enum):
    G1 = "G1_correct"
    G2 = "G2_complete_incorrect"
    G3 = "G3_truncated"


def extract_boxed(text: str) -> str | None:
    """Contents of the last ``\\boxed{...}``, honouring nested braces."""
    start = text.rfind("\\boxed{")
    if start < 0:
        return None
    i = start + len("\\boxed{")
    depth = 1
    for j in range(i, len(text)):
        if text[j] == "{":
            depth += 1
        elif text[j] == "}":
            depth -= 1
            if depth == 0:
                return text[i:j]
    return None


def extract_token_answer(tokens, mode: ReasoningMode) -> str | None:
    """Tokens between the last ANSWER marker and the next EOS.

    The marker only counts outside the thinking span: in Thinking mode the
    response itself must have closed the span before it.
    """
    tokens = list(tokens)
    try:
        a = len(tokens) - 1 - tokens[::-1].index(modes.ANSWER)
    except ValueError:
        return None
    if mode is ReasoningMode.THINKING and modes.THINK_CLOSE not in tokens[:a]:
        return None
    try:
        e = tokens.index(modes.EOS, a + 1)
    except ValueError:
        return None
    return modes.detokenize(tokens[a + 1:e])


def extract_answer(response: Response) -> str | None:
    if response.text is not None:
        return extract_boxed(response.text)
    return extract_token_answer(response.tokens, response.mode)


def normalize(answer: str) -> str:
    answer = answer.strip()
    if _INTEGER.fullmatch(answer):
        return str(int(answer))
    return answer


def verify(problem: ProblemRecord, answer: str | None) -> bool:
    if answer is None:
        return False
    return normalize(answer) == normalize(problem.answer)


def reward(problem: ProblemRecord, response: Response) -> int:
    if response.truncated:
        return 0
    return int(verify(problem, extract_answer(response)))


def classify(problem: ProblemRecord, response: Response) -> DifficultyGroup:
    if response.truncated:
        return DifficultyGroup.G3
    if verify(problem, extract_answer(response)):
        return DifficultyGroup.G1
    return DifficultyGroup.G2


def score(problem: ProblemRecord, response: Response) -> Response:
    """Fill in the extracted answer and reward."""
    return response.scored(extract_answer(response), reward(problem, response))
