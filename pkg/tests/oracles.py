"""Independent reference computations for the test suite.

Nothing here imports the code under test's numerical routines.
"""

import itertools
import math

import numpy as np


def table_game(values):
    """Set function looking up ``values[bitmask(S)]``."""
    values = np.asarray(values, dtype=float)

    def f(present):
        return values[sum(1 << i for i in present)]

    return f


def random_game(g, seed, outputs=1):
    rng = np.random.default_rng(seed)
    return table_game(rng.normal(size=(1 << g, outputs)) if outputs > 1 else rng.normal(size=1 << g))


def shapley_by_permutations(f, g):
    """Average marginal contribution over all g! orderings."""
    phi = None
    perms = list(itertools.permutations(range(g)))
    for perm in perms:
        present = set()
        prev = np.atleast_1d(np.asarray(f(frozenset()), dtype=float))
        contrib = np.zeros((g, prev.size))
        for i in perm:
            present.add(i)
            cur = np.atleast_1d(np.asarray(f(frozenset(present)), dtype=float))
            contrib[i] = cur - prev
            prev = cur
        phi = contrib if phi is None else phi + contrib
    return phi / len(perms)


def central_difference(fn, x, h=1e-4):
    """Gradient of scalar ``fn`` at array ``x`` by central differences."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        up, down = x.copy(), x.copy()
        up[idx] += h
        down[idx] -= h
        grad[idx] = (fn(up) - fn(down)) / (2 * h)
    return grad


def softmax_logprob(logits, target):
    m = max(logits)
    return logits[target] - m - math.log(sum(math.exp(v - m) for v in logits))


def relative_error(a, b, floor=1e-12):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
