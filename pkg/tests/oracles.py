"""Independent reference computations used by the tests.

Written in plain Python loops so they share no code path with the
vectorised implementation they check.
"""
import itertools
import math

import numpy as np


def context_logits(theta, window, context):
    V = len(theta[0])
    out = [theta[window * V][k] for k in range(V)]
    for j in range(window):
        if j < len(context):
            row = theta[j * V + context[-1 - j]]
            for k in range(V):
                out[k] += row[k]
    return out


def softmax(xs):
    m = max(xs)
    e = [math.exp(x - m) for x in xs]
    s = sum(e)
    return [x / s for x in e]


def sampler_probs(logits, temperature, top_p, greedy=False):
    V = len(logits)
    if greedy or temperature == 0:
        best = max(range(V), key=lambda k: (logits[k], -k))
        return [1.0 if k == best else 0.0 for k in range(V)]
    p = softmax([x / temperature for x in logits])
    order = sorted(range(V), key=lambda k: (-p[k], k))
    keep, acc = [], 0.0
    for k in order:
        keep.append(k)
        acc += p[k]
        if acc >= top_p:
            break
    z = sum(p[k] for k in keep)
    return [p[k] / z if k in keep else 0.0 for k in range(V)]


def enumerate_sequences(theta, window, prompt, horizon, eos, temperature=1.0, top_p=1.0,
                        greedy=False):
    """Exact probabilities of every generated sequence up to `horizon` tokens."""
    theta = np.asarray(theta).tolist()
    V = len(theta[0])
    out = {}

    def walk(seq, prob):
        if prob == 0.0:
            return
        if len(seq) == horizon or (seq and seq[-1] == eos):
            out[tuple(seq)] = out.get(tuple(seq), 0.0) + prob
            return
        q = sampler_probs(context_logits(theta, window, list(prompt) + seq),
                          temperature, top_p, greedy)
        for k in range(V):
            walk(seq + [k], prob * q[k])

    walk([], 1.0)
    return out


def central_fd(f, x, h=1e-5):
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f(x)
        flat[i] = old - h
        fm = f(x)
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), np.linalg.norm(a), 1e-12))
