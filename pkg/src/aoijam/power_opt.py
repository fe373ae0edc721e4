"""Optimal power pmfs against a fixed opponent power pmf.

For a fixed adversary pmf ``d`` the BS maximises ``sum_i e_i g_i`` with
``g = F @ d`` over the budget polytope ``{e : sum_i e_i p_i <= budget}``; the
adversary side minimises ``sum_j d_j h_j`` with ``h = e @ F``.  Two routes are
provided: the two-level traversal search (``algorithm1`` / ``algorithm2``) and
a brute-force vertex enumeration (``oracle_best_e`` / ``oracle_best_d``) that
shares no code with it.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import InfeasibleError
from .model import POWER_EQ_TOL, Config, PowerLevels, as_pmf, basis

# coefficients within this band of zero count as zero ("strictly" positive/negative)
COEF_GUARD = 1e-12
VALUE_TIE = 1e-12

VARIANTS = ("iterated", "prose", "pseudocode")


# -- oracle -----------------------------------------------------------------

def polytope_vertices(levels: PowerLevels) -> list[np.ndarray]:
    """All vertices of ``{w in simplex : w . levels <= budget}``.

    Singletons on affordable levels come first (in index order), followed by
    the two-point pmfs that spend the budget exactly.
    """
    p = levels.array
    b = levels.budget
    if b < p[0] - POWER_EQ_TOL:
        raise InfeasibleError(f"budget {b} is below the smallest power {p[0]}")
    k = len(p)
    verts = [basis(k, i) for i in range(k) if p[i] <= b + POWER_EQ_TOL]
    for i, j in itertools.combinations(range(k), 2):
        if p[i] < b - POWER_EQ_TOL and p[j] > b + POWER_EQ_TOL:
            w = np.zeros(k)
            w[i] = (p[j] - b) / (p[j] - p[i])
            w[j] = (b - p[i]) / (p[j] - p[i])
            verts.append(w)
    return verts


def _pick(verts: list[np.ndarray], vals: np.ndarray, best: float) -> int:
    # among near-ties prefer smaller support, then lower indices
    tied = [i for i, v in enumerate(vals) if abs(v - best) <= VALUE_TIE]
    return min(tied, key=lambda i: (np.count_nonzero(verts[i]), tuple(np.flatnonzero(verts[i]))))


def oracle_best_e(d: np.ndarray, cfg: Config) -> tuple[np.ndarray, float]:
    """Best BS power pmf against ``d`` by enumerating every polytope vertex."""
    g = cfg.success @ np.asarray(d, dtype=float)
    verts = polytope_vertices(cfg.bs_powers)
    vals = np.array([v @ g for v in verts])
    i = _pick(verts, vals, vals.max())
    return verts[i], float(vals[i])


def oracle_best_d(e: np.ndarray, cfg: Config) -> tuple[np.ndarray, float]:
    """Best adversary power pmf against ``e`` by vertex enumeration."""
    h = np.asarray(e, dtype=float) @ cfg.success
    verts = polytope_vertices(cfg.adv_powers)
    vals = np.array([v @ h for v in verts])
    i = _pick(verts, vals, vals.min())
    return verts[i], float(vals[i])


# -- two-level traversal ----------------------------------------------------

def _coef(g: np.ndarray, p: np.ndarray, i: int, x: int, y: int) -> float:
    """Height of point i above the chord through levels x and y."""
    return g[i] + g[x] * (p[y] - p[i]) / (p[x] - p[y]) - g[y] * (p[x] - p[i]) / (p[x] - p[y])


def _search(g: np.ndarray, p: np.ndarray, budget: float, variant: str,
            pure_on_tie: bool) -> np.ndarray:
    """Maximise ``w . g`` over the budget polytope by the two-level traversal.

    ``pure_on_tie`` selects what is returned when the budget equals a level
    and the pure level ties with the mixture.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    n = len(p)
    if budget < p[0] - POWER_EQ_TOL:
        raise InfeasibleError("Solution does not exist: budget below the smallest power")
    if budget >= p[-1] - POWER_EQ_TOL:
        return basis(n, n - 1)
    if budget <= p[0] + POWER_EQ_TOL:
        # only the cheapest level is affordable
        return basis(n, 0)

    x = int(np.nonzero(p < budget - POWER_EQ_TOL)[0][-1])
    y = int(np.nonzero(p > budget + POWER_EQ_TOL)[0][0])
    x1, y1 = x, y

    # first traversal: upwards from y1 + 1
    for i in range(y1 + 1, n):
        if _coef(g, p, i, x, y) > COEF_GUARD:
            y = i
    # second traversal
    if variant == "pseudocode":
        for i in range(0, x1):
            if _coef(g, p, i, x, y) > COEF_GUARD:
                x = i
    else:
        for i in range(x1 - 1, -1, -1):
            if _coef(g, p, i, x, y) > COEF_GUARD:
                x = i
    if variant == "iterated":
        # sweep both sides again until no level lies above the current chord
        changed = True
        while changed:
            changed = False
            for i in range(y1, n):
                if i != y and _coef(g, p, i, x, y) > COEF_GUARD:
                    y, changed = i, True
            for i in range(x1, -1, -1):
                if i != x and _coef(g, p, i, x, y) > COEF_GUARD:
                    x, changed = i, True

    e = np.zeros(n)
    e[x] = (budget - p[y]) / (p[x] - p[y])
    e[y] = (p[x] - budget) / (p[x] - p[y])

    if x1 + 1 == y1 - 1:
        k = x1 + 1
        mix, pure = float(e @ g), float(g[k])
        if pure_on_tie:
            if mix <= pure + VALUE_TIE:
                return basis(n, k)
        elif not mix >= pure - VALUE_TIE:
            return basis(n, k)
    return e


def algorithm1(d: np.ndarray, cfg: Config, variant: str = "iterated") -> np.ndarray:
    """Optimal BS power pmf against the adversary power pmf ``d``.

    ``variant="prose"`` runs the two traversals exactly once, upward over the
    levels above the budget and then downward over the levels below it.
    ``variant="pseudocode"`` runs the second traversal in ascending order.
    The default ``"iterated"`` repeats the traversals until the bracketing
    pair stops moving; its first sweep is identical to ``"prose"``, and it is
    the only variant that always reaches the optimum (a single pass can stop
    at a chord that some other level still lies above).
    """
    g = cfg.success @ np.asarray(d, dtype=float)
    e = _search(g, cfg.bs_powers.array, cfg.bs_powers.budget, variant, pure_on_tie=True)
    return as_pmf(e, "e")


def algorithm2(e: np.ndarray, cfg: Config, variant: str = "iterated") -> np.ndarray:
    """Optimal adversary power pmf against the BS power pmf ``e``.

    Mirror of :func:`algorithm1`: minimisation, so a level is taken whenever it
    lies strictly below the current chord, and an exact budget match prefers
    the mixture on ties.
    """
    h = np.asarray(e, dtype=float) @ cfg.success
    d = _search(-h, cfg.adv_powers.array, cfg.adv_powers.budget, variant, pure_on_tie=False)
    return as_pmf(d, "d")


def bs_value(e: np.ndarray, d: np.ndarray, cfg: Config) -> float:
    return float(np.asarray(e) @ cfg.success @ np.asarray(d))
