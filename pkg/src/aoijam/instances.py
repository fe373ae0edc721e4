"""Built-in and randomly generated system instances."""

from __future__ import annotations

import numpy as np

from .model import Config, as_pmf, validate

COUNTEREXAMPLE_F = (
    (0.5, 0.35, 0.2),
    (0.6, 0.55, 0.4),
    (0.8, 0.7, 0.65),
)


def counterexample_raw() -> dict:
    """The 3x3 two-user instance on which best responses cycle."""
    return {
        "num_users": 2,
        "num_channels": 2,
        "bs_powers": [1.0, 3.0, 5.0],
        "bs_budget": 3.5,
        "adv_powers": [1.0, 3.0, 5.0],
        "adv_budget": 3.5,
        "success_matrix": [list(r) for r in COUNTEREXAMPLE_F],
    }


def counterexample_config() -> Config:
    return validate(counterexample_raw())


def random_levels(rng: np.random.Generator, k: int, lo: float = 0.5, hi: float = 10.0) -> np.ndarray:
    while True:
        p = np.sort(np.round(rng.uniform(lo, hi, size=k), 3))
        if k == 1 or np.all(np.diff(p) > 0):
            return p


def random_budget(rng: np.random.Generator, levels: np.ndarray, p_exact: float = 0.2,
                  p_above: float = 0.05) -> float:
    """A feasible budget; sometimes equal to a level, sometimes above all levels."""
    r = rng.random()
    if r < p_exact:
        return float(levels[rng.integers(len(levels))])
    if r < p_exact + p_above:
        return float(levels[-1] * rng.uniform(1.01, 1.5))
    return float(rng.uniform(levels[0], levels[-1]))


def random_success_matrix(rng: np.random.Generator, n: int, m: int, kind: str | None = None) -> np.ndarray:
    """Random F, non-decreasing down columns and non-increasing along rows."""
    kind = kind or ("max", "product", "sum")[rng.integers(3)]
    if kind == "max":
        # F[i, j] = max of R over the block i' <= i, j' >= j
        R = rng.random((n, m)) ** 2
        F = np.maximum.accumulate(R[:, ::-1], axis=1)[:, ::-1]
        F = np.maximum.accumulate(F, axis=0)
    elif kind == "product":
        s = np.sort(rng.uniform(0.05, 1.0, n))
        t = np.sort(rng.uniform(0.05, 1.0, m))[::-1]
        F = np.outer(s, t)
    elif kind == "sum":
        a = np.cumsum(rng.uniform(0, 1, n))
        b = np.cumsum(rng.uniform(0, 1, m))
        F = np.outer(a, np.ones(m)) - np.outer(np.ones(n), b)
        F = (F - F.min()) / (F.max() - F.min() + 1e-9)
        F = 0.02 + 0.96 * F
        F = F + rng.uniform(-0.02, 0.02, (n, m))
        F = np.maximum.accumulate(F[:, ::-1], axis=1)[:, ::-1]
        F = np.maximum.accumulate(F, axis=0)
        F = np.clip(F, 0.0, 1.0)
    else:
        raise ValueError(kind)
    return F


def shift_structured_matrix(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    """F with f[i, j] - f[0, j] independent of j."""
    first = np.sort(rng.uniform(0.05, 0.5, m))[::-1]
    shift = np.concatenate([[0.0], np.sort(rng.uniform(0.0, 0.45, n - 1))])
    return first[None, :] + shift[:, None]


def random_config(rng: np.random.Generator, *, n: int | None = None, m: int | None = None,
                  num_users: int | None = None, num_channels: int | None = None,
                  heterogeneous: bool = False, F: np.ndarray | None = None,
                  bs_budget: float | None = None, adv_budget: float | None = None) -> Config:
    n = n or int(rng.integers(2, 6))
    m = m or int(rng.integers(2, 6))
    N = num_users or int(rng.integers(2, 6))
    Ns = num_channels or int(rng.integers(2, 6))
    p = random_levels(rng, n)
    pa = random_levels(rng, m)
    raw = {
        "num_users": N,
        "num_channels": Ns,
        "bs_powers": p.tolist(),
        "bs_budget": bs_budget if bs_budget is not None else random_budget(rng, p),
        "adv_powers": pa.tolist(),
        "adv_budget": adv_budget if adv_budget is not None else random_budget(rng, pa),
        "success_matrix": (F if F is not None else random_success_matrix(rng, n, m)).tolist(),
    }
    if heterogeneous:
        raw["channel_sets"] = random_channel_sets(rng, N, Ns)
    return validate(raw)


def random_channel_sets(rng: np.random.Generator, N: int, Ns: int) -> list[list[int]]:
    """1-based per-user channel sets, each of size >= 2, jointly covering all channels."""
    while True:
        sets = []
        for _ in range(N):
            k = int(rng.integers(2, Ns + 1))
            sets.append(sorted((rng.choice(Ns, size=k, replace=False) + 1).tolist()))
        if set().union(*map(set, sets)) == set(range(1, Ns + 1)):
            return sets


def random_pmf(rng: np.random.Generator, k: int, sparsity: float = 0.0) -> np.ndarray:
    w = rng.exponential(size=k)
    if sparsity:
        w[rng.random(k) < sparsity] = 0.0
        if w.sum() == 0:
            w[rng.integers(k)] = 1.0
    return as_pmf(w / w.sum())


def random_feasible_pmf(rng: np.random.Generator, levels: np.ndarray, budget: float) -> np.ndarray:
    """Random pmf over ``levels`` whose mean power stays within ``budget``."""
    k = len(levels)
    w = random_pmf(rng, k, sparsity=0.3)
    mean = float(w @ levels)
    if mean <= budget:
        return w
    # mix towards the cheapest level until the budget holds
    t = (mean - budget) / (mean - levels[0])
    out = (1 - t) * w
    out[0] += t
    return as_pmf(out / out.sum())
