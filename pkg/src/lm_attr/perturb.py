"""Perturbation attribution over set functions on feature groups.

Every method here sees the model only through a :class:`SetFunction`: a map
from an include set (the groups kept at their original values) to a real
vector, one component per target unit.  Methods first plan the full list of
include sets they need, evaluate that list in one batch, and reduce in plan
order.  That makes results independent of how many workers evaluate.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import rng as rngmod
from .errors import ConfigError, EvaluationError, RankError, ShapeError, SizeError

EXACT_CAP = 12


class SetFunction:
    """Vector-valued function of include sets over ``n_groups`` groups.

    ``fn`` receives the include set (a frozenset of group ids), or the
    include set and its evaluation index when ``indexed`` is true.  The index
    is the position in the method's evaluation plan and is what keys any
    per-evaluation randomness such as baseline draws.
    """

    def __init__(self, fn: Callable, n_groups: int, *, indexed: bool = False, workers: int = 1):
        if n_groups < 1:
            raise ConfigError("a set function needs at least one group")
        self.fn = fn
        self.n_groups = int(n_groups)
        self.indexed = indexed
        self.workers = max(1, int(workers))
        self.evaluations = 0

    def _one(self, item):
        index, present = item
        try:
            value = self.fn(present, index) if self.indexed else self.fn(present)
        except EvaluationError:
            raise
        except Exception as exc:
            raise EvaluationError(present, exc) from exc
        return np.atleast_1d(np.asarray(value, dtype=float))

    def evaluate(self, plan: Sequence) -> np.ndarray:
        """Evaluate every include set in ``plan``; rows follow plan order."""
        items = list(enumerate(frozenset(s) for s in plan))
        if self.workers == 1 or len(items) < 2:
            rows = [self._one(it) for it in items]
        else:
            with ThreadPoolExecutor(self.workers) as pool:
                rows = list(pool.map(self._one, items))
        self.evaluations += len(items)
        widths = {r.shape for r in rows}
        if len(widths) != 1:
            raise ShapeError(f"set function returned inconsistent output shapes {sorted(widths)}")
        return np.vstack(rows)


@dataclass
class AttributionScores:
    """Scores of shape (target units, groups) and their per-group totals."""

    matrix: np.ndarray
    method: str
    seed: int | None = None
    evaluations: int = 0
    samples: int = 0
    intercept: np.ndarray | None = None
    totals: np.ndarray = field(init=False)

    def __post_init__(self):
        self.matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        self.totals = self.matrix.sum(axis=0)


def _full(g):
    return frozenset(range(g))


def _mask_to_set(mask: int) -> frozenset:
    return frozenset(i for i in range(mask.bit_length()) if mask >> i & 1)


def feature_ablation(f: SetFunction) -> AttributionScores:
    """Drop one group at a time: ``f(D) - f(D without i)``."""
    g = f.n_groups
    full = _full(g)
    y = f.evaluate([full] + [full - {i} for i in range(g)])
    phi = y[0] - y[1:]
    return AttributionScores(phi.T, "ablation", evaluations=g + 1)


def shapley_weights(g: int) -> np.ndarray:
    """``|S|! (G-|S|-1)! / G!`` indexed by coalition size."""
    return np.array([math.factorial(s) * math.factorial(g - s - 1) / math.factorial(g) for s in range(g)])


def shapley_exact(f: SetFunction, max_groups: int = EXACT_CAP) -> AttributionScores:
    """Exact Shapley values by enumerating all ``2**G`` include sets."""
    g = f.n_groups
    if g > max_groups:
        raise SizeError(
            f"exact Shapley needs 2^{g} evaluations, above the cap of 2^{max_groups}; "
            "use shapley_sampling instead"
        )
    n = 1 << g
    y = f.evaluate([_mask_to_set(m) for m in range(n)])
    masks = np.arange(n)
    sizes = np.array([bin(m).count("1") for m in range(n)])
    w = shapley_weights(g)
    phi = np.zeros((g, y.shape[1]))
    for i in range(g):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        phi[i] = w[sizes[without]] @ (y[without | bit] - y[without])
    return AttributionScores(phi.T, "shapley-exact", evaluations=n)


def sample_permutations(g: int, n: int, seed: int, antithetic: bool = False) -> list[np.ndarray]:
    """``n`` group orderings, each from its own stream split off ``seed``."""
    perms = []
    for p in range(n):
        gen = rngmod.stream(seed, rngmod.PERMUTATION, p)
        perm = np.arange(g)
        # Fisher-Yates
        for i in range(g - 1, 0, -1):
            j = int(gen.integers(i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        perms.append(perm)
        if antithetic:
            perms.append(perm[::-1].copy())
    return perms


def shapley_sampling(
    f: SetFunction, n_permutations: int = 25, seed: int = 0, antithetic: bool = False
) -> AttributionScores:
    """Permutation-sampling estimate of Shapley values.

    Groups are switched on one at a time in each sampled order, starting from
    the all-baseline input, and each group's marginal change is averaged.
    With ``antithetic`` every ordering is paired with its reverse.
    """
    if n_permutations < 1:
        raise ConfigError("n_permutations must be >= 1")
    g = f.n_groups
    perms = sample_permutations(g, n_permutations, seed, antithetic)
    plan = [frozenset()]
    for perm in perms:
        plan.extend(frozenset(perm[: k + 1].tolist()) for k in range(g))
    y = f.evaluate(plan)
    phi = np.zeros((g, y.shape[1]))
    for p, perm in enumerate(perms):
        prev = y[0]
        for k, group in enumerate(perm):
            cur = y[1 + p * g + k]
            phi[group] += cur - prev
            prev = cur
    phi /= len(perms)
    return AttributionScores(phi.T, "shapley-sampling", seed=seed, evaluations=len(plan), samples=len(perms))


def _all_masks(g: int) -> np.ndarray:
    return ((np.arange(1 << g)[:, None] >> np.arange(g)) & 1).astype(float)


def _rows_to_sets(z: np.ndarray) -> list[frozenset]:
    return [frozenset(np.flatnonzero(row).tolist()) for row in z]


def lime_weights(z: np.ndarray, kernel_width: float) -> np.ndarray:
    """``exp(-(1 - |z|/G)^2 / width^2)``; an infinite width gives equal weights."""
    g = z.shape[1]
    dist = 1.0 - z.sum(axis=1) / g
    if math.isinf(kernel_width):
        return np.ones(len(z))
    return np.exp(-(dist**2) / kernel_width**2)


def _parse_regularization(reg):
    if reg is None:
        return "none", 0.0
    if isinstance(reg, str):
        if reg != "none":
            raise ConfigError(f"regularization {reg!r} needs a strength")
        return "none", 0.0
    if isinstance(reg, dict):
        kind, lam = reg.get("kind", "none"), float(reg.get("lambda", 0.0))
    else:
        kind, lam = reg[0], float(reg[1])
    if kind not in ("none", "ridge", "lasso"):
        raise ConfigError(f"unknown regularization {kind!r}; choose none, ridge or lasso")
    if lam < 0:
        raise ConfigError("regularization strength must be >= 0")
    return kind, lam


def default_samples(g: int) -> int:
    return 4 * g + 2 * g * g


def lime(
    f: SetFunction,
    n_samples: int | None = None,
    kernel_width: float = 0.75,
    regularization=None,
    seed: int = 0,
    exhaustive: bool | None = None,
) -> AttributionScores:
    """Weighted linear surrogate over binary include vectors.

    Without ``n_samples`` and for at most 10 groups every mask is used once;
    otherwise the full and empty masks are joined by ``n_samples`` masks in
    which each group is kept with probability 1/2.
    """
    g = f.n_groups
    kind, lam = _parse_regularization(regularization)
    if exhaustive is None:
        exhaustive = n_samples is None and g <= 10
    if exhaustive:
        z = _all_masks(g)
    else:
        n_samples = default_samples(g) if n_samples is None else int(n_samples)
        if n_samples < g + 2:
            raise ConfigError(f"lime needs n_samples >= G + 2 = {g + 2}")
        gen = rngmod.stream(seed, rngmod.LIME_SAMPLES)
        draws = (gen.random((n_samples, g)) < 0.5).astype(float)
        z = np.vstack([np.ones(g), np.zeros(g), draws])
    y = f.evaluate(_rows_to_sets(z))
    w = lime_weights(z, kernel_width)
    try:
        if kind == "lasso":
            beta, b0 = weighted_lasso(z, y, w, lam)
        else:
            beta, b0 = solve_weighted_ls(z, y, w, ridge=lam if kind == "ridge" else None)
    except RankError as exc:
        raise RankError(f"{exc}; increase n_samples", exc.columns) from exc
    return AttributionScores(
        beta.T, "lime", seed=seed, evaluations=len(z), samples=len(z), intercept=b0
    )


def shapley_kernel_weight(g: int, k: int) -> float:
    """Weight of a single coalition of size ``k`` among ``g`` groups."""
    return (g - 1) / (math.comb(g, k) * k * (g - k))


def kernel_shap(
    f: SetFunction, n_samples: int | None = None, seed: int = 0, exhaustive: bool | None = None
) -> AttributionScores:
    """Shapley-kernel weighted regression pinned to ``f(D)`` and ``f(empty)``.

    Exhaustive mode uses each proper non-empty coalition once with its kernel
    weight.  Sampled mode draws coalition sizes in proportion to the kernel's
    total mass per size, then a uniform coalition of that size, weight one.
    """
    g = f.n_groups
    if exhaustive is None:
        exhaustive = n_samples is None and g <= 10
    anchors = np.vstack([np.ones(g), np.zeros(g)])
    if g == 1:
        z = np.zeros((0, 1))
        w = np.zeros(0)
    elif exhaustive:
        z = _all_masks(g)
        sizes = z.sum(axis=1)
        keep = (sizes > 0) & (sizes < g)
        z = z[keep]
        w = np.array([shapley_kernel_weight(g, int(k)) for k in z.sum(axis=1)])
    else:
        n_samples = default_samples(g) if n_samples is None else int(n_samples)
        if n_samples < g + 2:
            raise ConfigError(f"kernel_shap needs n_samples >= G + 2 = {g + 2}")
        gen = rngmod.stream(seed, rngmod.KERNEL_SAMPLES)
        ks = np.arange(1, g)
        mass = (g - 1) / (ks * (g - ks))
        sizes = gen.choice(ks, size=n_samples, p=mass / mass.sum())
        z = np.zeros((n_samples, g))
        for row, k in enumerate(sizes):
            z[row, gen.choice(g, size=int(k), replace=False)] = 1.0
        w = np.ones(n_samples)
    y = f.evaluate(_rows_to_sets(np.vstack([anchors, z])))
    y_full, y_empty, y = y[0], y[1], y[2:]
    if g == 1:
        beta, b0 = (y_full - y_empty)[None, :], y_empty
    else:
        c = np.zeros((2, g + 1))
        c[0, 0] = 1.0
        c[1, :] = 1.0
        d = np.vstack([y_empty, y_full])
        try:
            beta, b0 = solve_weighted_ls(z, y, w, constraints=(c, d))
        except RankError as exc:
            raise RankError(f"{exc}; increase n_samples", exc.columns) from exc
    return AttributionScores(
        beta.T,
        "kernel-shap",
        seed=seed,
        evaluations=len(z) + 2,
        samples=len(z),
        intercept=b0,
    )


def _column_names(g):
    return ["intercept"] + [f"group {i}" for i in range(g)]


def solve_weighted_ls(
    design,
    response,
    weights,
    constraints=None,
    ridge: float | None = None,
    rank_deficient: str = "raise",
):
    """Weighted least squares with intercept, optional ridge and equalities.

    Minimizes ``sum_j w_j (y_j - b0 - z_j . beta)^2 + ridge * |beta|^2``
    subject to ``C @ [b0, beta] = d``.  The normal equations, bordered by the
    constraint rows, are solved with a symmetric-indefinite factorization.
    ``response`` may be a matrix (one column per output).  A singular system
    raises :class:`RankError` naming the columns involved, unless
    ``rank_deficient="min_norm"`` in which case the minimum-norm solution is
    returned.

    Returns ``(beta, b0)`` with ``beta`` of shape (G,) or (G, outputs).
    """
    z = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    w = np.asarray(weights, dtype=float)
    vector = y.ndim == 1
    if vector:
        y = y[:, None]
    if z.ndim != 2 or len(z) != len(y) or len(w) != len(z):
        raise ShapeError(f"design {z.shape}, response {y.shape}, weights {w.shape} disagree")
    if np.any(w < 0):
        raise ConfigError("weights must be non-negative")
    g = z.shape[1]
    x = np.hstack([np.ones((len(z), 1)), z])
    a = x.T @ (w[:, None] * x)
    b = x.T @ (w[:, None] * y)
    if ridge:
        a[1:, 1:] += ridge * np.eye(g)
    if constraints is not None:
        c, d = constraints
        c = np.atleast_2d(np.asarray(c, dtype=float))
        d = np.asarray(d, dtype=float).reshape(len(c), -1)
        if d.shape[1] == 1 and y.shape[1] > 1:
            d = np.repeat(d, y.shape[1], axis=1)
        m = len(c)
        system = np.block([[a, c.T], [c, np.zeros((m, m))]])
        rhs = np.vstack([b, d])
    else:
        system, rhs = a, b
    sv = np.linalg.svd(system, compute_uv=False)
    singular = sv.size == 0 or sv[-1] <= sv[0] * 1e-10
    if singular:
        if rank_deficient != "min_norm":
            _, _, vt = np.linalg.svd(system)
            null = vt[sv <= sv[0] * 1e-10][:, : g + 1]
            cols = [name for name, v in zip(_column_names(g), np.abs(null).max(axis=0)) if v > 1e-8]
            raise RankError(f"rank-deficient regression in columns {cols}", cols)
        if constraints is None:
            sw = np.sqrt(w)[:, None]
            theta = np.linalg.lstsq(sw * x, sw * y, rcond=None)[0]
        else:
            theta = (np.linalg.pinv(system) @ rhs)[: g + 1]
    else:
        theta = scipy.linalg.solve(system, rhs, assume_a="sym")[: g + 1]
    b0, beta = theta[0], theta[1:]
    if vector:
        return beta[:, 0], float(b0[0])
    return beta, b0


def weighted_lasso(design, response, weights, lam: float, max_iter: int = 10_000, tol: float = 1e-12):
    """Coordinate descent for ``sum w r^2 + lam * |beta|_1`` with intercept."""
    z = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    w = np.asarray(weights, dtype=float)
    vector = y.ndim == 1
    if vector:
        y = y[:, None]
    wsum = w.sum()
    if wsum <= 0:
        raise RankError("all sample weights are zero", ["intercept"])
    zbar = w @ z / wsum
    ybar = w @ y / wsum
    zc, yc = z - zbar, y - ybar
    col_sq = w @ (zc**2)
    beta = np.zeros((z.shape[1], y.shape[1]))
    for out in range(y.shape[1]):
        r = yc[:, out].copy()
        for _ in range(max_iter):
            delta = 0.0
            for j in range(z.shape[1]):
                if col_sq[j] == 0:
                    continue
                old = beta[j, out]
                rho = w @ (zc[:, j] * (r + zc[:, j] * old))
                new = np.sign(rho) * max(abs(rho) - lam / 2, 0.0) / col_sq[j]
                if new != old:
                    r -= zc[:, j] * (new - old)
                    beta[j, out] = new
                    delta = max(delta, abs(new - old))
            if delta < tol:
                break
    b0 = ybar - zbar @ beta
    if vector:
        return beta[:, 0], float(b0[0])
    return beta, b0

