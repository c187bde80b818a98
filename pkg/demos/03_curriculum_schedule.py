"""
Tailored curriculum on the toy task
===================================

The base policy solves some single-digit problems, gets the rest wrong, and
never finishes two-operand ones.  Stages 1 and 2 train on what it can at
least complete; stage 3 uses everything.  Under two minutes on one core.
"""
import tempfile
from pathlib import Path

import numpy as np

from tailored_rl import curriculum, dataset, evaluation, policy, trainer
from tailored_rl.modes import ReasoningMode

problems = dataset.synth_dataset(400, (1, 2), seed=1)
held_out = dataset.synth_dataset(200, (1, 1), seed=10_001, prefix="h")
cfgs = [trainer.TrainConfig(steps=s, learning_rate=trainer.TOY_LEARNING_RATE, root_seed=1)
        for s in (150, 150, 300)]

out = Path(tempfile.mkdtemp(prefix="toy-schedule-"))
result = trainer.run_schedule(problems, cfgs, policy.base_policy(), out)

for k, rep in enumerate(result.reports, 1):
    print(f"categorisation before stage {k}: G1/G2/G3 = {rep.counts}")

# composition of every stage under the initial labelling
rows = curriculum.data_complexity_table(result.manifests, result.reports[0])
print(curriculum.format_complexity_table(rows))

greedy = policy.DecodeConfig(16, greedy=True)
for k, ck in enumerate(result.checkpoints):
    acc = evaluation.evaluate(ck, held_out, ReasoningMode.THINKING, 1, greedy).accuracy
    print(f"after stage {k}: greedy held-out accuracy {acc:.3f}")

rows = [r for stage in result.metrics for r in stage]
reward = np.array([r.mean_reward for r in rows])
print("reward per 50 steps:", reward.reshape(-1, 50).mean(axis=1).round(3))
print("artifacts:", sorted(p.name for p in out.iterdir()))

# the ablation: every stage sees the full set from the start
direct = trainer.run_schedule(problems, cfgs, policy.base_policy(), rules=trainer.DIRECT_TRAIN)
acc = evaluation.evaluate(direct.params, held_out, ReasoningMode.THINKING, 1, greedy).accuracy
print(f"direct-train greedy held-out accuracy {acc:.3f}")
