"""
Sampling from the log-linear policy
===================================

The "pretrained" starting point knows the answer grammar but not arithmetic.
Watch what it does on an easy and a harder prompt, greedy and sampled.
"""
import numpy as np

from tailored_rl import dataset, policy
from tailored_rl.modes import ReasoningMode, detokenize, render_prompt

params = policy.base_policy()
print("theta", params.theta.shape, "window", params.window)

easy = dataset.make_problem([7], "easy")
hard = dataset.make_problem([3, 8], "hard")

# greedy: difficulty 1 answers at once, difficulty 2 keeps "thinking" until cut off
greedy = policy.DecodeConfig(8, greedy=True)
for p in (easy, hard):
    for mode in ReasoningMode:
        prompt = render_prompt(p, mode)
        r = policy.generate(params, prompt, greedy, mode=mode)
        print(f"{p.id:5s} {mode.value:10s} {detokenize(prompt):24s} -> "
              f"{detokenize(r.tokens):28s} truncated={r.truncated}")

# sampled at the evaluation temperature; log-probs are recorded untempered
rng = np.random.default_rng(0)
cfg = policy.DecodeConfig(8, temperature=0.6, top_p=0.95)
prompt = render_prompt(easy, ReasoningMode.THINKING)
for _ in range(5):
    r = policy.generate(params, prompt, cfg, rng)
    print(f"{detokenize(r.tokens):28s} logp={sum(r.token_logprobs):7.3f}")

# the distribution the sampler actually draws from, after top-p truncation
z = policy.logits(params, list(prompt))
q = policy.sampler_distribution(z, cfg)
print("tokens kept by the nucleus:", np.flatnonzero(q).tolist())
