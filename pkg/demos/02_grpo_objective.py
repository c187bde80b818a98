"""
Group-relative advantages and the clipped objective
===================================================
"""
import numpy as np

from tailored_rl import dataset, grpo, policy, rollout
from tailored_rl.modes import ReasoningMode

# advantages are rewards standardised inside one group
print(grpo.advantages([1, 0, 0, 1]))
print(grpo.advantages([1, 0, 0, 0, 0, 0, 0, 0]).round(4))
print(grpo.advantages([1, 1, 1, 1]))          # nothing to learn: skipped

# clip-higher: the upper edge (1.28) sits further out than the lower one (0.8)
b = grpo.ClipBounds()
for ratio in (0.5, 0.9, 1.1, 1.5):
    print(f"ratio {ratio}: A=+1 -> {grpo.surrogate(np.log(ratio), 0.0, 1.0, b):.3f}   "
          f"A=-1 -> {grpo.surrogate(np.log(ratio), 0.0, -1.0, b):.3f}")

# one real batch: sample, score, normalise, differentiate
params = policy.base_policy()
problems = dataset.synth_dataset(16, (1, 1), seed=3)
cfg = policy.DecodeConfig(8)
groups = []
for i, p in enumerate(problems):
    g = rollout.rollout_group(params, p, ReasoningMode.THINKING, 8, cfg, root_seed=0, tags=(i,))
    groups.append(g.with_advantages(grpo.advantages(g.rewards)))
live = [g for g in groups if not g.skipped]
print(f"{len(live)} of {len(groups)} groups carry signal")

for gran in grpo.RatioGranularity:
    obj, grad = grpo.objective_and_grad(params, params, live, b, gran)
    # on-policy the objective is zero but the gradient is not
    print(f"{gran.value:12s} objective={obj:+.2e} |grad|={np.linalg.norm(grad):.4f}")

# a small step along the gradient raises the objective
obj, grad = grpo.objective_and_grad(params, params, live)
stepped = params.with_theta(params.theta + 0.5 * grad)
print("after one step:", round(grpo.objective_and_grad(stepped, params, live,
                                                       with_grad=False)[0], 4))
