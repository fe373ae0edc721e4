"""The stationary-policy game between the base station and the adversary.

Age under a stationary profile is a geometric renewal process, so user ``i``
has average age ``1 / q_i``.  Everything here (best responses, equilibrium
probes, the power-game minimax) is evaluated through that closed form.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import AoiError, DivergentError, StructureError
from .model import (
    Config,
    StationaryProfile,
    basis,
    phi,
    require_relaxed,
    success_prob_vector,
    uniform,
)
from .power_opt import algorithm1, algorithm2, oracle_best_d, oracle_best_e, polytope_vertices

NASH_TOL = 1e-9
PMF_EQ_TOL = 1e-12
TIE_TOL = 1e-12


def average_age_stationary(profile: StationaryProfile, cfg: Config) -> float:
    q = success_prob_vector(profile, cfg)
    if np.any(q <= 0):
        starved = np.flatnonzero(q <= 0).tolist()
        raise DivergentError(f"users {starved} are never served; average age is infinite")
    return float(np.mean(1.0 / q))


def _age_or_inf(profile: StationaryProfile, cfg: Config) -> float:
    try:
        return average_age_stationary(profile, cfg)
    except DivergentError:
        return float("inf")


def br_user_pmf(cfg: Config) -> np.ndarray:
    return uniform(cfg.num_users)


def _uniform_over(mask: np.ndarray) -> np.ndarray:
    return mask / mask.sum()


def br_channel_pmf_bs(a: np.ndarray, cfg: Config | None = None) -> np.ndarray:
    """Spread the BS uniformly over the least-blocked channels."""
    a = np.asarray(a, dtype=float)
    return _uniform_over((a <= a.min() + TIE_TOL).astype(float))


def br_channel_pmf_adv(s: np.ndarray, cfg: Config | None = None) -> np.ndarray:
    """Spread the adversary uniformly over the BS's most-used channels."""
    s = np.asarray(s, dtype=float)
    return _uniform_over((s >= s.max() - TIE_TOL).astype(float))


# -- best-response dynamics ---------------------------------------------------

@dataclass
class BestResponseTrace:
    steps: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    cycle_start: int | None = None
    cycle_period: int | None = None

    @property
    def fixed_point(self) -> bool:
        return self.cycle_period == 1

    def to_dict(self) -> dict:
        return {
            "steps": [{"e": e.tolist(), "d": d.tolist(), "value": v}
                      for (e, d), v in zip(self.steps, self.values)],
            "cycle_start": self.cycle_start,
            "cycle_period": self.cycle_period,
            "fixed_point": self.fixed_point,
        }

    def csv_rows(self) -> list[list]:
        return [[k, *e.tolist(), *d.tolist(), v]
                for k, ((e, d), v) in enumerate(zip(self.steps, self.values))]


def _same(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and bool(np.all(np.abs(a - b) <= PMF_EQ_TOL))


def best_response_dynamics(init_d: np.ndarray, cfg: Config, max_iters: int = 100,
                           variant: str = "iterated") -> BestResponseTrace:
    """Alternate ``e <- algorithm1(d)``, ``d <- algorithm2(e)`` until a pair repeats.

    Channel and user pmfs stay uniform throughout, since uniform channels on
    both sides are mutual best responses and never affect the power choice.
    """
    trace = BestResponseTrace()
    d = np.asarray(init_d, dtype=float)
    for _ in range(max_iters):
        e = algorithm1(d, cfg, variant)
        d = algorithm2(e, cfg, variant)
        for k, (pe, pd) in enumerate(trace.steps):
            if _same(pe, e) and _same(pd, d):
                trace.cycle_start = k
                trace.cycle_period = len(trace.steps) - k
                return trace
        trace.steps.append((e, d))
        trace.values.append(phi(e, d, cfg.success))
    return trace


# -- equilibrium probes -------------------------------------------------------

@dataclass
class EquilibriumReport:
    profile: StationaryProfile
    age: float
    max_bs_gain: float
    max_adv_gain: float
    probes: dict[str, float]

    @property
    def verdict(self) -> bool:
        return self.max_bs_gain <= NASH_TOL and self.max_adv_gain <= NASH_TOL

    def to_dict(self) -> dict:
        p = self.profile
        return {
            "profile": {k: getattr(p, k).tolist() for k in "useda"},
            "age": self.age,
            "max_bs_gain": self.max_bs_gain,
            "max_adv_gain": self.max_adv_gain,
            "probes": self.probes,
            "equilibrium": self.verdict,
        }


def _probe(cfg: Config, profile: StationaryProfile, bs: dict, adv: dict) -> EquilibriumReport:
    base = average_age_stationary(profile, cfg)
    probes: dict[str, float] = {}
    for name, dev in bs.items():
        probes[name] = base - _age_or_inf(profile.replace(**dev), cfg)
    for name, dev in adv.items():
        probes[name] = _age_or_inf(profile.replace(**dev), cfg) - base
    bs_gain = max([probes[k] for k in bs] + [0.0])
    adv_gain = max([probes[k] for k in adv] + [0.0])
    return EquilibriumReport(profile, base, bs_gain, adv_gain, probes)


def check_nash_fixed_powers(cfg: Config, e: np.ndarray, d: np.ndarray,
                            u: np.ndarray | None = None, s: np.ndarray | None = None,
                            a: np.ndarray | None = None, random_probes: int = 0,
                            rng: np.random.Generator | None = None) -> EquilibriumReport:
    """Probe user/channel deviations around a candidate with powers frozen at ``(e, d)``.

    The candidate defaults to the all-uniform triple.  Raises
    :class:`DivergentError` if the candidate itself has infinite age.
    """
    require_relaxed(cfg)
    Ns = cfg.num_channels
    profile = StationaryProfile(
        u=uniform(cfg.num_users) if u is None else np.asarray(u, float),
        s=uniform(Ns) if s is None else np.asarray(s, float),
        e=np.asarray(e, float),
        a=uniform(Ns) if a is None else np.asarray(a, float),
        d=np.asarray(d, float),
    )
    profile.check(cfg)
    u_star = br_user_pmf(cfg)
    s_star = br_channel_pmf_bs(profile.a)
    bs = {"bs_user": {"u": u_star}, "bs_channel": {"s": s_star},
          "bs_user_channel": {"u": u_star, "s": s_star}}
    adv = {"adv_channel": {"a": br_channel_pmf_adv(profile.s)}}
    if random_probes:
        rng = rng or np.random.default_rng(0)
        for k in range(random_probes):
            bs[f"bs_random_{k}"] = {"u": rng.dirichlet(np.ones(cfg.num_users)),
                                    "s": rng.dirichlet(np.ones(Ns))}
            adv[f"adv_random_{k}"] = {"a": rng.dirichlet(np.ones(Ns))}
    return _probe(cfg, profile, bs, adv)


def check_nash_full(cfg: Config, profile: StationaryProfile) -> EquilibriumReport:
    """Probe all five pmfs, power deviations included."""
    require_relaxed(cfg)
    profile.check(cfg)
    u_star = br_user_pmf(cfg)
    s_star = br_channel_pmf_bs(profile.a)
    e_alg = algorithm1(profile.d, cfg)
    e_orc, _ = oracle_best_e(profile.d, cfg)
    d_alg = algorithm2(profile.e, cfg)
    d_orc, _ = oracle_best_d(profile.e, cfg)
    a_star = br_channel_pmf_adv(profile.s)
    bs = {
        "bs_user": {"u": u_star},
        "bs_channel": {"s": s_star},
        "bs_power_algorithm": {"e": e_alg},
        "bs_power_oracle": {"e": e_orc},
        "bs_joint": {"u": u_star, "s": s_star, "e": e_orc},
    }
    adv = {
        "adv_channel": {"a": a_star},
        "adv_power_algorithm": {"d": d_alg},
        "adv_power_oracle": {"d": d_orc},
        "adv_joint": {"a": a_star, "d": d_orc},
    }
    return _probe(cfg, profile, bs, adv)


# -- shift structure ------------------------------------------------------------

def detect_shift_structure(F: np.ndarray, tol: float = 1e-9) -> np.ndarray | None:
    """Return ``l`` with ``F[i, j] - F[0, j] == l[i]`` for every ``j``, or None."""
    F = np.asarray(F, dtype=float)
    shift = F[:, 0] - F[0, 0]
    resid = F - F[0][None, :] - shift[:, None]
    if np.max(np.abs(resid)) <= tol:
        return shift
    return None


def special_case_nash(cfg: Config) -> tuple[StationaryProfile, EquilibriumReport]:
    """Assemble the equilibrium 5-tuple for a shift-structured success matrix."""
    if detect_shift_structure(cfg.success) is None:
        raise StructureError("success matrix rows are not constant shifts of the first row")
    require_relaxed(cfg)
    # any opponent pmf will do; the cheapest pure level is always feasible
    e_hat = algorithm1(basis(cfg.m, 0), cfg)
    d_hat = algorithm2(basis(cfg.n, 0), cfg)
    Ns = cfg.num_channels
    profile = StationaryProfile(uniform(cfg.num_users), uniform(Ns), e_hat, uniform(Ns), d_hat)
    report = check_nash_full(cfg, profile)
    if not report.verdict:
        raise AoiError(f"assembled profile fails deviation probes: {report.probes}")
    return profile, report


# -- minimax probe ------------------------------------------------------------

@dataclass
class MinimaxResult:
    e: np.ndarray
    d: np.ndarray
    value: float
    duality_gap: float
    iterations: int
    method: str
    row_mix: np.ndarray
    col_mix: np.ndarray

    def to_dict(self) -> dict:
        return {
            "e": self.e.tolist(),
            "d": self.d.tolist(),
            "value": self.value,
            "duality_gap": self.duality_gap,
            "iterations": self.iterations,
            "method": self.method,
        }


def vertex_game(cfg: Config) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Payoff matrix of phi restricted to the vertices of both budget polytopes."""
    Ve = np.array(polytope_vertices(cfg.bs_powers))
    Vd = np.array(polytope_vertices(cfg.adv_powers))
    return Ve @ cfg.success @ Vd.T, Ve, Vd


def _gap(A: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    return float((A @ y).max() - (x @ A).min())


def fictitious_play(A: np.ndarray, iters: int = 100_000, tol: float = 0.0,
                    check_every: int = 1000) -> tuple[np.ndarray, np.ndarray, int]:
    """Alternating fictitious play with linearly weighted averaging; rows maximise.

    The row player best-responds to the column player's weighted history,
    then the column player responds to the updated row history; the response
    at iteration ``t`` carries weight ``t``.  Ties go to the lowest index.
    """
    r, c = A.shape
    xs = np.zeros(r)
    ys = np.zeros(c)
    row_pay = np.zeros(r)
    col_pay = np.zeros(c)
    t = 0
    for t in range(1, iters + 1):
        i = int(np.argmax(row_pay))
        xs[i] += t
        col_pay += t * A[i]
        j = int(np.argmin(col_pay))
        ys[j] += t
        row_pay += t * A[:, j]
        if tol and t % check_every == 0 and _gap(A, xs / xs.sum(), ys / ys.sum()) <= tol:
            break
    return xs / xs.sum(), ys / ys.sum(), t


def solve_matrix_game(A: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray, float]:
    """Exact optimal strategies by enumerating square kernels (Shapley-Snow).

    Rows maximise.  Every matrix game has an optimal pair supported on some
    nonsingular square submatrix ``M`` with value ``1 / (1' M^-1 1)`` once the
    payoffs are shifted positive, so trying every such ``M`` is exhaustive.
    """
    A = np.asarray(A, dtype=float)
    shift = 1.0 - A.min()
    B = A + shift
    r, c = B.shape
    best = None
    for k in range(1, min(r, c) + 1):
        for rows in itertools.combinations(range(r), k):
            for cols in itertools.combinations(range(c), k):
                M = B[np.ix_(rows, cols)]
                try:
                    Minv = np.linalg.inv(M)
                except np.linalg.LinAlgError:
                    continue
                if not np.all(np.isfinite(Minv)):
                    continue
                denom = Minv.sum()
                if abs(denom) < 1e-14:
                    continue
                v = 1.0 / denom
                xk = v * Minv.sum(axis=0)
                yk = v * Minv.sum(axis=1)
                if np.any(xk < -tol) or np.any(yk < -tol):
                    continue
                x = np.zeros(r)
                y = np.zeros(c)
                x[list(rows)] = np.clip(xk, 0, None)
                y[list(cols)] = np.clip(yk, 0, None)
                x /= x.sum()
                y /= y.sum()
                gap = _gap(B, x, y)
                if gap <= tol:
                    return x, y, float(x @ A @ y)
                if best is None or gap < best[0]:
                    best = (gap, x, y)
    if best is None:
        raise AoiError("no kernel found")
    _, x, y = best
    return x, y, float(x @ A @ y)


def minimax_power_game(cfg: Config, iters: int = 100_000, method: str = "fictitious_play",
                       tol: float = 1e-7) -> MinimaxResult:
    """Saddle point of phi over the two budget polytopes.

    The bilinear game is reduced to a matrix game over polytope vertices; the
    mixed strategies are mapped back to power pmfs.  ``method`` is
    ``"fictitious_play"`` or ``"exact"`` (kernel enumeration).
    """
    A, Ve, Vd = vertex_game(cfg)
    if method == "fictitious_play":
        x, y, used = fictitious_play(A, iters=iters, tol=tol)
    elif method == "exact":
        x, y, _ = solve_matrix_game(A)
        used = 0
    else:
        raise ValueError(f"unknown method {method!r}")
    e = x @ Ve
    d = y @ Vd
    return MinimaxResult(
        e=e, d=d, value=float(x @ A @ y), duality_gap=_gap(A, x, y),
        iterations=used, method=method, row_mix=x, col_mix=y,
    )
