"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

The lines are printed as they are decided and again in the terminal summary.
"""
import math
import time
import zlib

import numpy as np
import pytest

from tailored_rl import curriculum, dataset, evaluation, policy, reward, trainer
from tailored_rl.curriculum import CategorizationReport, StageRule
from tailored_rl.grpo import ClipBounds, RatioGranularity, advantages, objective_and_grad
from tailored_rl.modes import (ANSWER, EOS, PLUS, THINK_CLOSE, THINK_OPEN, ReasoningMode,
                               render_prompt)
from tailored_rl.policy import DecodeConfig, PolicyParams, Response
from tailored_rl.reward import DifficultyGroup
from tailored_rl.rollout import RolloutGroup, clip_ratio

from conftest import ACCEPTANCE
from oracles import central_fd, enumerate_sequences, rel_err

GRANS = list(RatioGranularity)
TOY_SEED = 1
TOY_STEPS = (150, 150, 300)


def record(n: int, ok: bool, detail: str):
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


# --- shared toy runs -------------------------------------------------------

def _toy_run(out_dir):
    probs = dataset.synth_dataset(400, (1, 2), seed=TOY_SEED)
    cfgs = [trainer.TrainConfig(steps=s, learning_rate=trainer.TOY_LEARNING_RATE,
                                root_seed=TOY_SEED) for s in TOY_STEPS]
    t0 = time.perf_counter()
    res = trainer.run_schedule(probs, cfgs, policy.base_policy(window=5), out_dir)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def toy_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("toy")
    return [_toy_run(base / name) for name in ("a", "b")]


@pytest.fixture(scope="session")
def held_out():
    return dataset.synth_dataset(200, (1, 1), seed=10_000 + TOY_SEED, prefix="h")


# --- 1 ---------------------------------------------------------------------

def test_c01_advantages():
    exact = np.array_equal(advantages([1, 0, 0, 1]), np.array([1.0, -1.0, -1.0, 1.0]))
    rng = np.random.default_rng(101)
    worst_mean = worst_std = 0.0
    for _ in range(2000):
        G = int(rng.integers(2, 33))
        kind = rng.integers(3)
        if kind == 0:
            r = rng.integers(0, 2, size=G).astype(float)
        elif kind == 1:
            r = rng.normal(size=G) * 10 ** rng.uniform(-3, 3)
        else:
            r = rng.integers(-5, 6, size=G).astype(float)
        if np.ptp(r) == 0:
            continue
        a = advantages(r)
        worst_mean = max(worst_mean, abs(a.mean()))
        worst_std = max(worst_std, abs(a.std() - 1.0))
    skipped = all(advantages([c] * G) is None for c in (0.0, 1.0, 0.37) for G in (2, 8, 16))
    ok = exact and worst_mean <= 1e-9 and worst_std <= 1e-9 and skipped
    record(1, ok, f"[1,0,0,1] exact={exact} max|mean|={worst_mean:.1e} "
                  f"max|std-1|={worst_std:.1e} constant skipped={skipped}")


# --- 2 ---------------------------------------------------------------------

def _random_groups(rng, V, n_groups, G=4, max_len=4, prompt_len=2):
    groups = []
    for gi in range(n_groups):
        prompt = tuple(int(x) for x in rng.integers(0, V, size=prompt_len))
        resps = []
        for _ in range(G):
            toks = tuple(int(x) for x in rng.integers(0, V, size=rng.integers(1, max_len + 1)))
            resps.append(Response(f"g{gi}", ReasoningMode.THINKING, toks,
                                  (0.0,) * len(toks), False))
        r = rng.integers(0, 2, size=G).astype(float)
        if np.ptp(r) == 0:
            r[0] = 1.0 - r[0]
        groups.append(RolloutGroup(f"g{gi}", ReasoningMode.THINKING, prompt, tuple(resps),
                                   tuple(advantages(r))))
    return groups


def test_c02_gradient_fidelity():
    rng = np.random.default_rng(202)
    bounds = ClipBounds(0.2, 0.28)
    worst = 0.0
    for i in range(100):
        gran = GRANS[i % 2]
        old = policy.random_params(rng, 0.8, window=2, vocab_size=4)
        new = PolicyParams(old.theta + 0.2 * rng.standard_normal(old.theta.shape), 2)
        groups = _random_groups(rng, 4, n_groups=2)
        _, g = objective_and_grad(new, old, groups, bounds, gran)
        fd = central_fd(lambda th: objective_and_grad(PolicyParams(th, 2), old, groups, bounds,
                                                      gran, with_grad=False)[0], new.theta)
        worst = max(worst, rel_err(g, fd))

    # saturation: every ratio beyond its clip edge on the side that clips
    sat_norm = 0.0
    V = 4
    old = policy.zeros(window=2, vocab_size=V)
    for adv_sign, tok, shift in ((1.0, 1, 3.0), (-1.0, 1, -3.0)):
        theta = old.theta.copy()
        theta[:, tok] += shift
        new = PolicyParams(theta, 2)
        toks = (tok, tok, tok)
        r = Response("s", ReasoningMode.THINKING, toks, (0.0,) * 3, False)
        grp = RolloutGroup("s", ReasoningMode.THINKING, (0, 2), (r, r), (adv_sign, adv_sign))
        for gran in GRANS:
            _, g = objective_and_grad(new, old, [grp], bounds, gran)
            sat_norm = max(sat_norm, float(np.linalg.norm(g)))
    ok = worst < 1e-5 and sat_norm < 1e-8
    record(2, ok, f"100 instances max rel err={worst:.2e}; saturated grad norm={sat_norm:.1e}")


# --- 3 ---------------------------------------------------------------------

def test_c03_on_policy_identity():
    rng = np.random.default_rng(303)
    worst = 0.0
    for i in range(1000):
        V = int(rng.integers(3, 17))
        p = policy.random_params(rng, 1.0, window=int(rng.integers(1, 5)), vocab_size=V)
        groups = _random_groups(rng, V, n_groups=int(rng.integers(1, 5)),
                                G=int(rng.integers(2, 9)), max_len=6)
        obj, _ = objective_and_grad(p, p, groups, granularity=GRANS[i % 2], with_grad=False)
        worst = max(worst, abs(obj))
    record(3, worst <= 1e-9, f"1000 batches max |objective|={worst:.1e}")


# --- 4 ---------------------------------------------------------------------

def test_c04_sampler():
    rng = np.random.default_rng(404)
    params = policy.random_params(rng, 0.5, window=4, vocab_size=16)
    prompt = [3, PLUS, 4, THINK_OPEN]
    cfg = DecodeConfig(2, temperature=0.6, top_p=0.95)
    exact = enumerate_sequences(params.theta, 4, prompt, 2, EOS, 0.6, 0.95)
    n = 100_000
    gen = np.random.default_rng(405)
    counts = {}
    for _ in range(n):
        toks = policy.generate(params, prompt, cfg, gen).tokens
        counts[toks] = counts.get(toks, 0) + 1
    stray = set(counts) - set(exact)
    worst_z = 0.0
    for seq, p in exact.items():
        se = math.sqrt(p * (1 - p) / n)
        worst_z = max(worst_z, abs(counts.get(seq, 0) / n - p) / se if se else 0.0)

    greedy_ok = True
    for _ in range(200):
        q = policy.random_params(rng, 1.0, window=4, vocab_size=16)
        pr = [int(x) for x in rng.integers(0, 16, size=3)]
        a = policy.generate(q, pr, DecodeConfig(6, temperature=0.0), np.random.default_rng(1))
        b = policy.generate(q, pr, DecodeConfig(6, greedy=True), np.random.default_rng(2))
        greedy_ok &= a.tokens == b.tokens and a.token_logprobs == b.token_logprobs
    ok = not stray and worst_z <= 3.0 and greedy_ok
    record(4, ok, f"{len(exact)} sequences, max |z|={worst_z:.2f}, unsupported seen={len(stray)}, "
                  f"T=0 equals greedy={greedy_ok}")


# --- 5 ---------------------------------------------------------------------

def _structured_tokens(rng, problem, max_new):
    """Random responses biased toward well-formed answers so every group occurs."""
    body = [int(x) for x in rng.integers(0, 16, size=rng.integers(0, 4))]
    tail = []
    if rng.random() < 0.7:
        ans = problem.answer if rng.random() < 0.5 else str(int(rng.integers(0, 10)))
        tail = [THINK_CLOSE] * int(rng.random() < 0.8) + [ANSWER] + [int(c) for c in ans] + [EOS]
    toks = (body + tail)[:max_new]
    if EOS in toks:
        toks = toks[:toks.index(EOS) + 1]
    return toks


def test_c05_classification_partition():
    rng = np.random.default_rng(505)
    probs = dataset.synth_dataset(50, (1, 3), seed=5)
    params = policy.random_params(rng, 1.0, window=4, vocab_size=16)
    bad = {"partition": 0, "reward": 0, "truncation": 0}
    seen = set()
    for i in range(10_000):
        p = probs.problems[i % len(probs)]
        mode = ReasoningMode.THINKING if rng.random() < 0.5 else ReasoningMode.NOTHINKING
        max_new = int(rng.integers(1, 9))
        if i % 2:
            r = policy.generate(params, render_prompt(p, mode),
                                DecodeConfig(max_new), rng, p.id, mode)
        else:
            toks = tuple(_structured_tokens(rng, p, max_new))
            r = Response(p.id, mode, toks, (0.0,) * len(toks),
                         policy.is_truncated(toks, max_new))
        r = reward.score(p, r)
        toks = r.tokens
        # truncation: budget spent without emitting EOS
        expect_trunc = len(toks) == max_new and EOS not in toks
        bad["truncation"] += r.truncated != expect_trunc
        g = reward.classify(p, r)
        memberships = [g is DifficultyGroup.G1, g is DifficultyGroup.G2, g is DifficultyGroup.G3]
        bad["partition"] += sum(memberships) != 1
        bad["reward"] += (r.reward == 1) != (g is DifficultyGroup.G1)
        bad["truncation"] += (g is DifficultyGroup.G3) != r.truncated
        seen.add(g)
    ok = not any(bad.values()) and len(seen) == 3
    record(5, ok, f"10000 responses, violations={bad}, groups seen={len(seen)}")


# --- 6 ---------------------------------------------------------------------

def test_c06_curriculum_construction():
    rng = np.random.default_rng(606)
    probs = dataset.synth_dataset(300, (1, 3), seed=6)
    groups = list(DifficultyGroup)
    labels = {i: groups[int(rng.integers(3))] for i in probs.ids}
    rep = CategorizationReport(labels, 0, DecodeConfig(8, greedy=True))
    g12 = {i for i, g in labels.items() if g is not DifficultyGroup.G3}
    g3 = set(labels) - g12
    m1, m2, m3 = (curriculum.build_stage(rep if k < 3 else None, k, probs) for k in (1, 2, 3))
    stages_ok = (set(m1.problem_ids) == g12 == set(m2.problem_ids)
                 and not g3 & set(m1.problem_ids) and set(m3.problem_ids) == set(probs.ids)
                 and len(m3) == len(probs))

    params = policy.base_policy(window=5)
    cfg = DecodeConfig(8, greedy=True)
    r1 = curriculum.categorize_dataset(params, probs, cfg)
    r2 = curriculum.categorize_dataset(params, probs, cfg)
    idem = r1.labels == r2.labels and list(r1.labels) == list(r2.labels)

    rows = curriculum.data_complexity_table([m1, m2, m3], rep)
    sums = [g1 + g2 + g3_ for _, g1, g2, g3_, _ in rows]
    table_ok = all(abs(s - 100.0) <= 0.1 for s in sums)
    text = curriculum.format_complexity_table(rows)
    rendered = [sum(float(x) for x in line.split()[2:5]) for line in text.splitlines()[1:]]
    table_ok &= all(abs(s - 100.0) <= 0.1 for s in rendered)
    ok = stages_ok and idem and table_ok
    record(6, ok, f"manifests={stages_ok} idempotent={idem} "
                  f"rendered row sums={[round(s, 1) for s in rendered]}")


# --- 7 ---------------------------------------------------------------------

def test_c07_toy_learning(toy_runs, held_out):
    res, seconds = toy_runs[0]
    greedy = DecodeConfig(16, greedy=True)
    acc0 = evaluation.evaluate(res.checkpoints[0], held_out, ReasoningMode.THINKING, 1,
                               greedy).accuracy
    acc = evaluation.evaluate(res.params, held_out, ReasoningMode.THINKING, 1, greedy).accuracy
    rows = [r for stage in res.metrics for r in stage]
    first = float(np.mean([r.mean_reward for r in rows[:10]]))
    last = float(np.mean([r.mean_reward for r in rows[-10:]]))
    ok = (len(rows) <= 600 and acc >= 0.90 and acc > acc0 and last > first
          and seconds <= 300)
    record(7, ok, f"{len(rows)} steps in {seconds:.0f}s; greedy acc {acc0:.3f} -> {acc:.3f}; "
                  f"reward first10={first:.3f} last10={last:.3f}")


# --- 8 ---------------------------------------------------------------------

def test_c08_hybrid_bookkeeping(toy_runs, held_out):
    details, ok = [], True
    cfg = evaluation.eval_decode(trainer.TrainConfig().max_new_tokens)
    assert (cfg.temperature, cfg.top_p) == (0.6, 0.95)
    for res, _ in toy_runs:
        rows = [r for stage in res.metrics for r in stage]
        lt = [r.mean_length_thinking for r in rows if r.mean_length_thinking > 0]
        ln = [r.mean_length_nothinking for r in rows if r.mean_length_nothinking > 0]
        per_stage = all(any(r.mean_length_thinking > 0 for r in s)
                        and any(r.mean_length_nothinking > 0 for r in s) for s in res.metrics)
        populated = bool(lt) and bool(ln) and per_stage
        shorter = populated and np.mean(ln) < np.mean(lt)
        et = evaluation.evaluate(res.params, held_out, ReasoningMode.THINKING, 16, cfg, 8)
        en = evaluation.evaluate(res.params, held_out, ReasoningMode.NOTHINKING, 16, cfg, 8)
        union = evaluation.oracle_union(et, en)
        bound = union >= max(et.accuracy, en.accuracy)
        ok &= populated and shorter and bound
        details.append(f"len T={np.mean(lt):.2f} N={np.mean(ln):.2f} "
                       f"acc T={et.accuracy:.3f} N={en.accuracy:.3f} union={union:.3f}")
    record(8, ok, "; ".join(details))


# --- 9 ---------------------------------------------------------------------

def test_c09_determinism(toy_runs):
    a, b = (res.out_dir for res, _ in toy_runs)
    names = sorted(p.name for p in a.iterdir()
                   if p.name.startswith(("metrics_", "report_", "manifest_")))
    same = [(a / n).read_bytes() == (b / n).read_bytes() for n in names]
    crc = zlib.crc32(b"".join((a / n).read_bytes() for n in names))
    ok = len(names) == 8 and all(same)
    record(9, ok, f"{sum(same)}/{len(names)} artifacts byte-identical (crc32 {crc:08x})")


# --- 10 --------------------------------------------------------------------

def test_c10_clip_ratio():
    rng = np.random.default_rng(1010)
    params = policy.random_params(rng, 1.0, window=4, vocab_size=16)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(1, 33))
        max_new = int(rng.integers(1, 7))
        batch = [policy.generate(params, [int(x) for x in rng.integers(0, 16, 3)],
                                 DecodeConfig(max_new), rng) for _ in range(n)]
        recount = sum(1 for r in batch if len(r.tokens) == max_new and EOS not in r.tokens)
        mismatches += clip_ratio(batch) != recount / n
    record(10, mismatches == 0, f"1000 batches, mismatches={mismatches}")
