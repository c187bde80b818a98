"""Built-in log-linear autoregressive policy.

The next-token logits are a linear function of one-hot features of the last
``window`` context tokens (position specific, zero padded) plus a bias row::

    logits(ctx) = theta[bias] + sum_j theta[j * V + ctx[-1 - j]]

so log-probabilities and their gradients are exact and cheap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import modes
from .errors import InputError, NumericError
from .modes import ReasoningMode


@dataclass(frozen=True, eq=False)
class PolicyParams:
    theta: np.ndarray
    window: int = 4
    version: int = 0

    def __post_init__(self):
        theta = np.array(self.theta, dtype=np.float64)
        if theta.ndim != 2:
            raise InputError("theta must be a (feature_dim, vocab_size) matrix")
        if self.window < 1:
            raise InputError("window must be positive")
        if theta.shape[0] != self.window * theta.shape[1] + 1:
            raise InputError(
                f"theta has {theta.shape[0]} feature rows, expected "
                f"{self.window * theta.shape[1] + 1} for window {self.window}")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def vocab_size(self) -> int:
        return self.theta.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.theta.shape[0]

    @cached_property
    def _padded(self) -> np.ndarray:
        # trailing zero row absorbs out-of-context window slots
        return np.vstack([self.theta, np.zeros((1, self.vocab_size))])

    def check_finite(self):
        if not np.all(np.isfinite(self.theta)):
            raise NumericError("policy parameters contain non-finite values")

    def with_theta(self, theta, version: int | None = None) -> "PolicyParams":
        return PolicyParams(theta, self.window,
                            self.version + 1 if version is None else version)

    def __eq__(self, other):
        if not isinstance(other, PolicyParams):
            return NotImplemented
        return (self.window == other.window and self.version == other.version
                and np.array_equal(self.theta, other.theta))


def zeros(window: int = 4, vocab_size: int = modes.VOCAB_SIZE) -> PolicyParams:
    return PolicyParams(np.zeros((window * vocab_size + 1, vocab_size)), window)


def random_params(rng: np.random.Generator, scale: float = 1.0, window: int = 4,
                  vocab_size: int = modes.VOCAB_SIZE) -> PolicyParams:
    return PolicyParams(scale * rng.standard_normal((window * vocab_size + 1, vocab_size)),
                        window)


def base_policy(strength: float = 4.0, window: int = 5) -> PolicyParams:
    """A "pretrained" starting point for the toy task.

    Knows the response grammar (close the thinking span, emit the answer
    marker, one digit, then stop) but not the arithmetic, so greedy decoding
    answers "0" on every short problem.  When the prompt has a ``+`` two
    positions before the opening marker the policy starts a thinking chain of
    digits and pluses that it never closes, i.e. multi-operand problems run
    out of context.
    """
    V = modes.VOCAB_SIZE
    if window < 3:
        raise InputError("base policy needs a window of at least 3")
    theta = np.zeros((window * V + 1, V))
    s = strength
    digits = slice(0, 10)

    def row(offset, token):
        return offset * V + token

    theta[row(0, modes.THINK_OPEN), modes.THINK_CLOSE] = s
    theta[row(0, modes.THINK_CLOSE), modes.ANSWER] = s
    theta[row(0, modes.ANSWER), digits] = s
    theta[row(1, modes.ANSWER), modes.EOS] = 2 * s
    for d in range(10):
        theta[row(0, d), modes.PLUS] = s
    theta[row(0, modes.PLUS), digits] = s
    theta[row(2, modes.PLUS), digits] = 2 * s
    return PolicyParams(theta, window)


def feature_rows(context, window: int, vocab_size: int) -> np.ndarray:
    """Rows of the padded parameter matrix selected by `context` (bias last)."""
    pad = window * vocab_size + 1
    rows = np.full(window + 1, pad, dtype=np.intp)
    n = len(context)
    for j in range(min(window, n)):
        rows[j] = j * vocab_size + context[n - 1 - j]
    rows[window] = window * vocab_size
    return rows


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def logits(params: PolicyParams, context) -> np.ndarray:
    if len(context) == 0:
        raise InputError("context must be nonempty")
    params.check_finite()
    rows = feature_rows(context, params.window, params.vocab_size)
    return params._padded[rows].sum(axis=0)


def token_distribution(params: PolicyParams, context) -> np.ndarray:
    return _softmax(logits(params, context))


def logprob_and_grad(params: PolicyParams, context, token: int):
    """Log-probability of `token` after `context` and its gradient w.r.t. theta."""
    if not 0 <= token < params.vocab_size:
        raise InputError(f"token {token} outside vocabulary")
    z = logits(params, context)
    z = z - z.max()
    lse = math.log(np.exp(z).sum())
    p = np.exp(z - lse)
    grad = np.zeros((params.feature_dim + 1, params.vocab_size))
    coef = -p
    coef[token] += 1.0
    rows = feature_rows(context, params.window, params.vocab_size)
    for r in rows:
        grad[r] += coef
    return float(z[token] - lse), grad[:-1]


def _sequence_rows(params: PolicyParams, prompt, tokens) -> np.ndarray:
    full = np.asarray(tuple(prompt) + tuple(tokens), dtype=np.intp)
    P, T, w, V = len(prompt), len(tokens), params.window, params.vocab_size
    rows = np.full((T, w + 1), w * V + 1, dtype=np.intp)
    t = np.arange(T)
    for j in range(w):
        pos = P + t - 1 - j
        ok = pos >= 0
        rows[ok, j] = j * V + full[pos[ok]]
    rows[:, w] = w * V
    return rows


def sequence_logprobs(params: PolicyParams, prompt, tokens, with_probs: bool = False):
    """Per-token log-probabilities of `tokens` continuing `prompt`."""
    if len(prompt) == 0:
        raise InputError("prompt must be nonempty")
    params.check_finite()
    tokens = np.asarray(tokens, dtype=np.intp)
    if len(tokens) == 0:
        empty = np.zeros(0)
        return (empty, np.zeros((0, params.vocab_size)), None) if with_probs else empty
    rows = _sequence_rows(params, prompt, tokens)
    z = params._padded[rows].sum(axis=1)
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    lps = logp[np.arange(len(tokens)), tokens]
    if with_probs:
        return lps, np.exp(logp), rows
    return lps


def weighted_logprob_grad(params: PolicyParams, prompt, tokens, weights) -> np.ndarray:
    """sum_t weights[t] * grad log pi(tokens[t] | prefix)."""
    tokens = np.asarray(tokens, dtype=np.intp)
    grad = np.zeros((params.feature_dim + 1, params.vocab_size))
    if len(tokens) == 0:
        return grad[:-1]
    _, probs, rows = sequence_logprobs(params, prompt, tokens, with_probs=True)
    w = np.asarray(weights, dtype=np.float64)
    coef = -probs * w[:, None]
    coef[np.arange(len(tokens)), tokens] += w
    np.add.at(grad, rows, coef[:, None, :])
    return grad[:-1]


@dataclass(frozen=True)
class DecodeConfig:
    max_new_tokens: int = 8
    temperature: float = 1.0
    top_p: float = 1.0
    greedy: bool = False

    def __post_init__(self):
        if self.max_new_tokens < 1:
            raise InputError("max_new_tokens must be at least 1")
        if self.temperature < 0:
            raise InputError("temperature must be nonnegative")
        if not 0 < self.top_p <= 1:
            raise InputError("top_p must lie in (0, 1]")

    def to_dict(self) -> dict:
        return {"max_new_tokens": self.max_new_tokens, "temperature": self.temperature,
                "top_p": self.top_p, "greedy": self.greedy}


GREEDY = DecodeConfig(greedy=True)


@dataclass(frozen=True)
class Response:
    problem_id: str
    mode: ReasoningMode
    tokens: tuple[int, ...]
    token_logprobs: tuple[float, ...]
    truncated: bool
    extracted_answer: str | None = None
    reward: int = 0
    length: int = field(default=-1)
    # completion text on the generation-server path
    text: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", ReasoningMode(self.mode))
        if self.length < 0:
            object.__setattr__(self, "length", len(self.tokens))
        if len(self.token_logprobs) != len(self.tokens):
            raise InputError("token_logprobs must align with tokens")
        if self.reward not in (0, 1):
            raise InputError("reward must be 0 or 1")

    def scored(self, answer: str | None, reward: int) -> "Response":
        return replace(self, extracted_answer=answer, reward=reward)


def is_truncated(tokens, max_new_tokens: int, eos: int = modes.EOS) -> bool:
    return len(tokens) == max_new_tokens and (not tokens or tokens[-1] != eos)


def sampler_distribution(z: np.ndarray, cfg: DecodeConfig) -> np.ndarray:
    """Selection distribution after temperature scaling and nucleus truncation."""
    if cfg.greedy or cfg.temperature == 0:
        q = np.zeros_like(z)
        q[int(np.argmax(z))] = 1.0
        return q
    p = _softmax(z / cfg.temperature)
    if cfg.top_p >= 1.0:
        return p
    order = np.argsort(-p, kind="stable")
    cum = np.cumsum(p[order])
    k = min(int(np.searchsorted(cum, cfg.top_p)) + 1, len(p))
    q = np.zeros_like(p)
    keep = order[:k]
    q[keep] = p[keep] / p[keep].sum()
    return q


def _select(z: np.ndarray, cfg: DecodeConfig, rng) -> int:
    if cfg.greedy or cfg.temperature == 0:
        return int(np.argmax(z))
    q = sampler_distribution(z, cfg)
    idx = int(np.searchsorted(np.cumsum(q), rng.random(), side="right"))
    if idx >= len(q):  # cumulative rounding fell short of 1
        idx = int(np.flatnonzero(q)[-1])
    return idx


def generate(params: PolicyParams, prompt, cfg: DecodeConfig, rng=None,
             problem_id: str = "", mode: ReasoningMode = ReasoningMode.THINKING,
             eos: int = modes.EOS) -> Response:
    """Sample one response; recorded log-probabilities are untempered."""
    if len(prompt) == 0:
        raise InputError("prompt must be nonempty")
    if rng is None and not (cfg.greedy or cfg.temperature == 0):
        raise InputError("sampling requires a random stream")
    params.check_finite()
    w, V, table = params.window, params.vocab_size, params._padded
    ctx = list(prompt)
    tokens, lps = [], []
    for _ in range(cfg.max_new_tokens):
        z = table[feature_rows(ctx, w, V)].sum(axis=0)
        tok = _select(z, cfg, rng)
        zs = z - z.max()
        lps.append(float(zs[tok] - math.log(np.exp(zs).sum())))
        tokens.append(tok)
        ctx.append(tok)
        if tok == eos:
            break
    return Response(problem_id, mode, tuple(tokens), tuple(lps),
                    is_truncated(tokens, cfg.max_new_tokens, eos))
