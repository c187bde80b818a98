"""Groups of sampled responses and truncation statistics."""
from __future__ import annotations

import zlib
from dataclasses import dataclass, replace

import numpy as np

from . import modes
from .dataset import ProblemRecord
from .errors import InputError
from .modes import ReasoningMode
from .policy import DecodeConfig, PolicyParams, Response, generate
from .reward import score


@dataclass(frozen=True)
class RolloutGroup:
    problem_id: str
    mode: ReasoningMode
    prompt: tuple[int, ...]
    responses: tuple[Response, ...]
    advantages: tuple[float, ...] | None = None
    skipped: bool = False

    def __post_init__(self):
        for r in self.responses:
            if r.problem_id != self.problem_id or r.mode != self.mode:
                raise InputError("all responses of a group share problem and mode")
        if self.advantages is not None and len(self.advantages) != len(self.responses):
            raise InputError("one advantage per response")

    @property
    def rewards(self) -> list[float]:
        return [float(r.reward) for r in self.responses]

    def with_advantages(self, advantages) -> "RolloutGroup":
        if advantages is None:
            return replace(self, advantages=None, skipped=True)
        return replace(self, advantages=tuple(float(a) for a in advantages), skipped=False)


def stream(root_seed: int, problem_id: str, index: int, *tags: int) -> np.random.Generator:
    """Independent random stream keyed by (root seed, problem id, index, tags...)."""
    key = (zlib.crc32(problem_id.encode("utf-8")), *tags, index)
    return np.random.default_rng(np.random.SeedSequence(root_seed, spawn_key=key))


def rollout_group(params: PolicyParams, problem: ProblemRecord, mode: ReasoningMode,
                  G: int, cfg: DecodeConfig, root_seed: int = 0,
                  tags: tuple[int, ...] = ()) -> RolloutGroup:
    """Sample `G` scored responses for one (problem, mode) pair.

    `tags` further separates streams, e.g. the training step and batch slot
    when the same problem is drawn more than once.
    """
    if G < 1:
        raise InputError("group size must be at least 1")
    mode = ReasoningMode(mode)
    prompt = modes.render_prompt(problem, mode)
    responses = []
    for i in range(G):
        rng = None if cfg.greedy else stream(root_seed, problem.id, i, *tags)
        r = generate(params, prompt, cfg, rng, problem_id=problem.id, mode=mode)
        responses.append(score(problem, r))
    return RolloutGroup(problem.id, mode, prompt, tuple(responses))


def clip_ratio(responses) -> float:
    """Fraction of responses cut off by the token budget."""
    responses = list(responses)
    if not responses:
        raise InputError("clip_ratio of an empty batch")
    return sum(1 for r in responses if r.truncated) / len(responses)


def sample_responses(source, problem: ProblemRecord, mode: ReasoningMode, n: int,
                     cfg: DecodeConfig, root_seed: int = 0,
                     tags: tuple[int, ...] = ()) -> list[Response]:
    """`n` scored responses from the built-in policy or a generation server."""
    from .adapter import GenerationClient
    from .errors import TransportError

    mode = ReasoningMode(mode)
    if isinstance(source, PolicyParams):
        return list(rollout_group(source, problem, mode, n, cfg, root_seed, tags).responses)
    if not isinstance(source, GenerationClient):
        raise InputError(f"unsupported response source {type(source).__name__}")
    text = modes.render_text_prompt(problem, mode)
    try:
        completions = source.generate(text, n, cfg.max_new_tokens, cfg.temperature,
                                      cfg.top_p, cfg.greedy)
    except TransportError as exc:
        exc.problem_id = problem.id
        exc.args = (f"problem {problem.id}: {exc.args[0]}",)
        raise
    return [score(problem, Response(problem.id, mode, (), (), not c.finished,
                                    length=c.token_count, text=c.text))
            for c in completions]
