"""Group-relative advantages and the clipped surrogate objective.

No KL penalty and no reference policy: the objective depends only on the
current and the behaviour (old) parameters.  Clipping is asymmetric, with a
wider upper bound.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericError
from .policy import PolicyParams, sequence_logprobs, weighted_logprob_grad


@dataclass(frozen=True)
class ClipBounds:
    eps_low: float = 0.2
    eps_high: float = 0.28

    def __post_init__(self):
        if self.eps_low <= 0 or self.eps_high <= 0:
            raise InputError("clip epsilons must be positive")
        if 1 - self.eps_low <= 0:
            raise InputError("1 - eps_low must be positive")


class RatioGranularity(str, enum.Enum):
    PER_TOKEN = "per_token"
    PER_SEQUENCE = "per_sequence"


def advantages(rewards) -> np.ndarray | None:
    """(r - mean) / std with the population std; ``None`` for a constant group."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.ndim != 1 or len(r) < 2:
        raise InputError("advantages need a group of at least two rewards")
    centered = r - r.mean()
    std = math.sqrt(float(np.mean(centered ** 2)))
    # rewards are exact binary values in practice; tolerate rounding of affine maps
    if std <= 1e-12 * max(1.0, float(np.abs(r).max())):
        return None
    return centered / std


def _ratio(logp_new, logp_old):
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = np.exp(np.asarray(logp_new, dtype=np.float64) - logp_old)
    if not np.all(np.isfinite(ratio)):
        raise NumericError("non-finite importance ratio")
    return ratio


def surrogate(logp_new: float, logp_old: float, advantage: float,
              bounds: ClipBounds = ClipBounds()) -> float:
    ratio = float(_ratio(logp_new, logp_old))
    clipped = min(max(ratio, 1 - bounds.eps_low), 1 + bounds.eps_high)
    return min(ratio * advantage, clipped * advantage)


def _surrogate_terms(ratio: np.ndarray, advantage: float, bounds: ClipBounds):
    """Elementwise surrogate values and d(surrogate)/d(ratio)."""
    clipped = np.clip(ratio, 1 - bounds.eps_low, 1 + bounds.eps_high)
    unclipped_val = ratio * advantage
    clipped_val = clipped * advantage
    value = np.minimum(unclipped_val, clipped_val)
    # the unclipped branch carries the gradient wherever it attains the min
    active = unclipped_val <= clipped_val
    if advantage > 0:
        active &= ratio <= 1 + bounds.eps_high
    elif advantage < 0:
        active &= ratio >= 1 - bounds.eps_low
    dratio = np.where(active, advantage, 0.0)
    return value, dratio


def response_term(params: PolicyParams, old_params: PolicyParams, prompt, tokens,
                  advantage: float, bounds: ClipBounds, granularity: RatioGranularity,
                  with_grad: bool = True):
    """Surrogate contribution of a single response and its gradient."""
    tokens = tuple(tokens)
    if not tokens:
        zero = np.zeros_like(params.theta) if with_grad else None
        return 0.0, zero
    lp_new = sequence_logprobs(params, prompt, tokens)
    lp_old = sequence_logprobs(old_params, prompt, tokens)
    if RatioGranularity(granularity) is RatioGranularity.PER_TOKEN:
        ratio = _ratio(lp_new, lp_old)
        value, dratio = _surrogate_terms(ratio, advantage, bounds)
        obj = float(value.mean())
        weights = dratio * ratio / len(tokens)
    else:
        ratio = _ratio(lp_new.sum(), lp_old.sum()).reshape(1)
        value, dratio = _surrogate_terms(ratio, advantage, bounds)
        obj = float(value[0])
        weights = np.full(len(tokens), dratio[0] * ratio[0])
    if not with_grad:
        return obj, None
    if not np.any(weights):
        return obj, np.zeros_like(params.theta)
    return obj, weighted_logprob_grad(params, prompt, tokens, weights)


def objective_and_grad(params: PolicyParams, old_params: PolicyParams, groups,
                       bounds: ClipBounds = ClipBounds(),
                       granularity: RatioGranularity = RatioGranularity.PER_TOKEN,
                       with_grad: bool = True):
    """Clipped objective averaged over responses, then over groups."""
    groups = list(groups)
    if not groups:
        raise InputError("objective over an empty group list")
    total = 0.0
    grad = np.zeros_like(params.theta) if with_grad else None
    for g in groups:
        if g.skipped or g.advantages is None:
            raise InputError(f"group {g.problem_id!r} is skipped or lacks advantages")
        g_obj = 0.0
        for resp, adv in zip(g.responses, g.advantages):
            obj, gr = response_term(params, old_params, g.prompt, resp.tokens, adv,
                                    bounds, granularity, with_grad)
            g_obj += obj
            if with_grad:
                grad += gr / (len(g.responses) * len(groups))
        total += g_obj / len(g.responses)
    return total / len(groups), grad
