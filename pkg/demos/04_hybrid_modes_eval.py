"""
Thinking vs NoThinking after hybrid training
============================================

Trains a short single-stage run with half the groups in each mode, then
samples 16 answers per problem per mode and compares them.
"""
import numpy as np

from tailored_rl import curriculum, dataset, evaluation, policy, trainer
from tailored_rl.modes import ReasoningMode

problems = dataset.synth_dataset(400, (1, 2), seed=1)
held_out = dataset.synth_dataset(100, (1, 2), seed=7, prefix="h")

cfg = trainer.TrainConfig(steps=200, mode_mix=0.5, root_seed=3)
stage = curriculum.build_stage(None, 3, problems)
rows = []
params = trainer.train_stage(policy.base_policy(), stage, problems, cfg, rows.append)

lt = [r.mean_length_thinking for r in rows if r.mean_length_thinking > 0]
ln = [r.mean_length_nothinking for r in rows if r.mean_length_nothinking > 0]
print(f"training lengths: thinking {np.mean(lt):.2f}  nothinking {np.mean(ln):.2f}")

decode = evaluation.eval_decode(cfg.max_new_tokens)
think = evaluation.evaluate(params, held_out, ReasoningMode.THINKING, 16, decode)
direct = evaluation.evaluate(params, held_out, ReasoningMode.NOTHINKING, 16, decode)
for rep in (think, direct):
    print(f"{rep.mode.value:10s} accuracy {rep.accuracy:.3f} mean length {rep.mean_length:.2f}")
print(f"oracle union {evaluation.oracle_union(think, direct):.3f}")

for (lo, hi), n, acc, length in evaluation.bucket_by_difficulty(think, held_out, [(1, 1), (2, 2)]):
    print(f"difficulty {lo}-{hi}: n={n} accuracy={acc:.3f} length={length:.2f}")

# per-problem length split between correct and incorrect samples
table = evaluation.correct_incorrect_lengths(think)
c = [v[0] for v in table.values() if v[0] > 0]
w = [v[1] for v in table.values() if v[1] > 0]
print(f"mean length correct {np.mean(c):.2f} incorrect {np.mean(w) if w else 0:.2f}")
