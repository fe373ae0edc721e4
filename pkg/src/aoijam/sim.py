"""Slotted-time Monte Carlo simulation of per-user age.

Each replication draws from its own Philox stream keyed by
``(master_seed, replication)``, so results do not depend on how replications
are spread over worker processes.  The slot loop runs in a numba kernel that
consumes six pre-drawn uniforms per slot.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ValidationError
from .model import (
    BUDGET_TOL,
    Config,
    StationaryProfile,
    adv_index_x,
    adv_index_x_bar_or_max,
    as_pmf,
    basis,
    beta_power_pmf,
    budget_ok,
)

CHUNK = 1 << 16
DRAWS_PER_SLOT = 6

USER_RULES = ("uniform", "maxage", "custom")
BS_CHANNEL_RULES = ("uniform_set", "custom")
BS_POWER_RULES = ("beta_mix", "custom")
ADV_CHANNEL_RULES = ("uniform", "custom")
ADV_POWER_RULES = ("pure", "custom")


@dataclass(frozen=True)
class BsPolicy:
    user_rule: str = "uniform"
    channel_rule: str = "uniform_set"
    power_rule: str = "beta_mix"
    user_pmf: tuple | None = None
    channel_pmf: tuple | None = None
    power_pmf: tuple | None = None

    def resolve(self, cfg: Config) -> tuple[np.ndarray, bool, np.ndarray, np.ndarray]:
        """Return (user pmf, max-age flag, per-user channel matrix, power pmf)."""
        issues = []
        if self.user_rule not in USER_RULES:
            issues.append(("user_rule", f"unknown rule {self.user_rule!r}"))
        if self.channel_rule not in BS_CHANNEL_RULES:
            issues.append(("channel_rule", f"unknown rule {self.channel_rule!r}"))
        if self.power_rule not in BS_POWER_RULES:
            issues.append(("power_rule", f"unknown rule {self.power_rule!r}"))
        if issues:
            raise ValidationError(issues)

        N, Ns = cfg.num_users, cfg.num_channels
        if self.user_rule == "custom":
            u = _sized_pmf(self.user_pmf, N, "user_pmf")
        else:
            u = np.full(N, 1.0 / N)

        chan = np.zeros((N, Ns))
        custom = _sized_pmf(self.channel_pmf, Ns, "channel_pmf") if self.channel_rule == "custom" else None
        for k, cs in enumerate(cfg.topology.per_user_sets):
            idx = list(cs)
            if custom is None:
                chan[k, idx] = 1.0 / len(idx)
            else:
                mass = custom[idx].sum()
                if mass <= 0:
                    raise ValidationError([("channel_pmf", f"no mass on the channels of user {k}")])
                chan[k, idx] = custom[idx] / mass

        if self.power_rule == "custom":
            e = _sized_pmf(self.power_pmf, cfg.n, "power_pmf")
            if not budget_ok(e, cfg.bs_powers):
                raise ValidationError([("power_pmf", "violates the BS power budget")])
        else:
            e = beta_power_pmf(cfg)
        return u, self.user_rule == "maxage", chan, e


@dataclass(frozen=True)
class AdvPolicy:
    channel_rule: str = "uniform"
    power_rule: str = "pure"
    channel_pmf: tuple | None = None
    power_index: int | None = None  # 0-based; None means the strongest affordable level
    power_pmf: tuple | None = None

    def resolve(self, cfg: Config) -> tuple[np.ndarray, np.ndarray]:
        issues = []
        if self.channel_rule not in ADV_CHANNEL_RULES:
            issues.append(("channel_rule", f"unknown rule {self.channel_rule!r}"))
        if self.power_rule not in ADV_POWER_RULES:
            issues.append(("power_rule", f"unknown rule {self.power_rule!r}"))
        if issues:
            raise ValidationError(issues)
        Ns = cfg.num_channels
        if self.channel_rule == "custom":
            a = _sized_pmf(self.channel_pmf, Ns, "channel_pmf")
        else:
            a = np.full(Ns, 1.0 / Ns)
        if self.power_rule == "custom":
            d = _sized_pmf(self.power_pmf, cfg.m, "power_pmf")
        else:
            j = adv_index_x(cfg) if self.power_index is None else int(self.power_index)
            if not 0 <= j < cfg.m:
                raise ValidationError([("power_index", f"must lie in 0..{cfg.m - 1}")])
            d = basis(cfg.m, j)
        if not budget_ok(d, cfg.adv_powers):
            raise ValidationError([("power", "violates the adversary power budget")])
        return a, d


def _sized_pmf(values, size: int, name: str) -> np.ndarray:
    if values is None:
        raise ValidationError([(name, "required for a custom rule")])
    w = as_pmf(values, name)
    if w.size != size:
        raise ValidationError([(name, f"length {w.size} != {size}")])
    return w


# named policies ---------------------------------------------------------------

def uniform_policy() -> BsPolicy:
    """Uniform user, uniform channel within the user's set, beta-mixed power."""
    return BsPolicy("uniform", "uniform_set", "beta_mix")


def maxage_policy() -> BsPolicy:
    """Max-age user (ties to the lowest index), uniform channel, beta-mixed power."""
    return BsPolicy("maxage", "uniform_set", "beta_mix")


def psi_bar() -> AdvPolicy:
    """Uniform channel, strongest affordable blocking power."""
    return AdvPolicy("uniform", "pure")


def bracket_adversary(cfg: Config) -> AdvPolicy:
    """Uniform channel, mixing the two levels around the budget to spend it exactly."""
    x = adv_index_x(cfg)
    xb = adv_index_x_bar_or_max(cfg)
    p = cfg.adv_powers.array
    d = np.zeros(cfg.m)
    if x == xb or p[xb] <= cfg.adv_powers.budget + BUDGET_TOL:
        d[xb] = 1.0
    else:
        w = (p[xb] - cfg.adv_powers.budget) / (p[xb] - p[x])
        d[x] = w
        d[xb] = 1.0 - w
    return AdvPolicy("uniform", "custom", power_pmf=tuple(d))


def profile_policies(profile: StationaryProfile) -> tuple[BsPolicy, AdvPolicy]:
    bs = BsPolicy("custom", "custom", "custom", tuple(profile.u), tuple(profile.s), tuple(profile.e))
    adv = AdvPolicy("custom", "custom", channel_pmf=tuple(profile.a), power_pmf=tuple(profile.d))
    return bs, adv


# -- kernel -------------------------------------------------------------------

@numba.njit(cache=True)
def _pick(cdf, r):
    k = cdf.shape[0]
    for i in range(k - 1):
        if r < cdf[i]:
            return i
    return k - 1


@numba.njit(cache=True)
def _slots(ages, draws, maxage, user_cdf, chan_cdf, pow_cdf, adv_chan_cdf, adv_pow_cdf, F,
           age_sum, deliveries, traj, events, t0, burn_in):
    """Advance ``ages`` through ``draws.shape[0]`` slots in place.

    Draw columns: user, BS channel, BS power, adversary channel, adversary
    power, delivery.  ``age_sum`` accumulates each user's age at the start of
    every slot from ``burn_in`` on; ``traj``/``events`` rows are filled for
    slots below their length.
    """
    N = ages.shape[0]
    for k in range(draws.shape[0]):
        t = t0 + k
        if t < traj.shape[0]:
            for i in range(N):
                traj[t, i] = ages[i]
        if t >= burn_in:
            for i in range(N):
                age_sum[i] += ages[i]
        if maxage:
            user = 0
            for i in range(1, N):
                if ages[i] > ages[user]:
                    user = i
        else:
            user = _pick(user_cdf, draws[k, 0])
        ch = _pick(chan_cdf[user], draws[k, 1])
        pw = _pick(pow_cdf, draws[k, 2])
        ach = _pick(adv_chan_cdf, draws[k, 3])
        apw = _pick(adv_pow_cdf, draws[k, 4])
        ok = ch != ach or draws[k, 5] < F[pw, apw]
        if t < events.shape[0]:
            events[t, 0] = user
            events[t, 1] = ch
            events[t, 2] = pw
            events[t, 3] = ach
            events[t, 4] = apw
            events[t, 5] = 1 if ok else 0
        for i in range(N):
            ages[i] += 1
        if ok:
            ages[user] = 1
            if t >= burn_in:
                deliveries[user] += 1


def _cdf(p: np.ndarray) -> np.ndarray:
    c = np.cumsum(p, axis=-1)
    c[..., -1] = 1.0
    return c


@dataclass(frozen=True)
class _Plan:
    maxage: bool
    user_cdf: np.ndarray
    chan_cdf: np.ndarray
    pow_cdf: np.ndarray
    adv_chan_cdf: np.ndarray
    adv_pow_cdf: np.ndarray
    F: np.ndarray


def _plan(cfg: Config, bs: BsPolicy, adv: AdvPolicy) -> _Plan:
    u, maxage, chan, e = bs.resolve(cfg)
    a, d = adv.resolve(cfg)
    return _Plan(maxage, _cdf(u), _cdf(chan), _cdf(e), _cdf(a), _cdf(d),
                 np.ascontiguousarray(cfg.success, dtype=float))


def replication_rng(master_seed: int, rep: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(rep),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class AgeState:
    ages: np.ndarray

    @classmethod
    def initial(cls, num_users: int) -> "AgeState":
        return cls(np.ones(num_users, dtype=np.int64))


def step(state: AgeState, bs: BsPolicy, adv: AdvPolicy, cfg: Config,
         rng: np.random.Generator) -> AgeState:
    """Advance one slot and return the new state (the input is left untouched)."""
    plan = _plan(cfg, bs, adv)
    ages = state.ages.astype(np.int64).copy()
    draws = rng.random((1, DRAWS_PER_SLOT))
    _slots(ages, draws, plan.maxage, plan.user_cdf, plan.chan_cdf, plan.pow_cdf,
           plan.adv_chan_cdf, plan.adv_pow_cdf, plan.F, np.zeros(len(ages), dtype=np.int64),
           np.zeros(len(ages), dtype=np.int64), np.zeros((0, len(ages)), dtype=np.int64),
           np.zeros((0, 6), dtype=np.int64), 0, 0)
    return AgeState(ages)


@dataclass
class RepOutcome:
    rep: int
    avg_age: np.ndarray  # per user
    deliveries: np.ndarray
    trajectory: np.ndarray | None = None
    events: np.ndarray | None = None


def run_replication(cfg: Config, bs: BsPolicy, adv: AdvPolicy, slots: int, rep: int,
                    master_seed: int, burn_in: int = 0, record_slots: int = 0,
                    record_events: int = 0) -> RepOutcome:
    plan = _plan(cfg, bs, adv)
    rng = replication_rng(master_seed, rep)
    N = cfg.num_users
    ages = np.ones(N, dtype=np.int64)
    age_sum = np.zeros(N, dtype=np.int64)
    deliveries = np.zeros(N, dtype=np.int64)
    traj = np.zeros((min(record_slots, slots), N), dtype=np.int64)
    events = np.zeros((min(record_events, slots), 6), dtype=np.int64)
    total = slots + burn_in
    t = 0
    while t < total:
        k = min(CHUNK, total - t)
        draws = rng.random((k, DRAWS_PER_SLOT))
        _slots(ages, draws, plan.maxage, plan.user_cdf, plan.chan_cdf, plan.pow_cdf,
               plan.adv_chan_cdf, plan.adv_pow_cdf, plan.F, age_sum, deliveries,
               traj, events, t, burn_in)
        t += k
    return RepOutcome(rep, age_sum / slots, deliveries,
                      traj if record_slots else None, events if record_events else None)


@dataclass
class SimResult:
    per_user_avg_age: list[float]
    system_avg_age: float
    std_error: float
    per_user_std_error: list[float]
    slots_per_rep: int
    replications: int
    master_seed: int
    per_user_mean_interval: list[float]
    rep_means: list[list[float]] = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        return {
            "per_user_avg_age": self.per_user_avg_age,
            "system_avg_age": self.system_avg_age,
            "std_error": self.std_error,
            "per_user_std_error": self.per_user_std_error,
            "per_user_mean_interval": self.per_user_mean_interval,
            "slots_per_rep": self.slots_per_rep,
            "replications": self.replications,
            "master_seed": self.master_seed,
        }


def _std_error(samples: np.ndarray) -> np.ndarray:
    R = samples.shape[0]
    if R < 2:
        return np.zeros(samples.shape[1:])
    return samples.std(axis=0, ddof=1) / np.sqrt(R)


def merge(outcomes: list[RepOutcome], slots: int, master_seed: int) -> SimResult:
    outcomes = sorted(outcomes, key=lambda o: o.rep)
    per_rep = np.array([o.avg_age for o in outcomes])  # R x N
    system = per_rep.mean(axis=1)
    deliveries = np.array([o.deliveries for o in outcomes], dtype=float).sum(axis=0)
    with np.errstate(divide="ignore"):
        interval = np.where(deliveries > 0, slots * len(outcomes) / np.maximum(deliveries, 1), np.inf)
    return SimResult(
        per_user_avg_age=per_rep.mean(axis=0).tolist(),
        system_avg_age=float(system.mean()),
        std_error=float(_std_error(system[:, None])[0]),
        per_user_std_error=_std_error(per_rep).tolist(),
        slots_per_rep=slots,
        replications=len(outcomes),
        master_seed=master_seed,
        per_user_mean_interval=interval.tolist(),
        rep_means=per_rep.tolist(),
    )


def _worker(args):
    return run_replication(*args)


def default_workers() -> int:
    return os.cpu_count() or 1


def run(cfg: Config, bs: BsPolicy, adv: AdvPolicy, slots: int, reps: int, master_seed: int,
        workers: int = 1, burn_in: int = 0) -> SimResult:
    """Run ``reps`` independent replications of ``slots`` slots each.

    Results are bit-identical for any ``workers`` value.
    """
    issues = []
    if not isinstance(slots, (int, np.integer)) or slots < 1:
        issues.append(("slots", "must be a positive integer"))
    if not isinstance(reps, (int, np.integer)) or reps < 1:
        issues.append(("reps", "must be a positive integer"))
    if burn_in < 0:
        issues.append(("burn_in", "must be non-negative"))
    if issues:
        raise ValidationError(issues)
    # fail early on bad policies, before any process is spawned
    _plan(cfg, bs, adv)
    jobs = [(cfg, bs, adv, int(slots), r, int(master_seed), int(burn_in)) for r in range(reps)]
    if workers <= 1 or reps == 1:
        outcomes = [_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, reps)) as pool:
            outcomes = list(pool.map(_worker, jobs))
    return merge(outcomes, int(slots), int(master_seed))


def policy_suite(cfg: Config, slots: int, reps: int, seed: int, workers: int = 1,
                 sigmas: float = 4.0) -> list[dict]:
    """Simulate the benchmark schedulers against the implemented adversaries.

    Each row carries the simulated age, its standard error, the applicable
    bounds and the outcome of every bound check at ``sigmas`` standard errors.
    """
    from .bounds import lower_bound, upper_bound_maxage, upper_bound_uniform
    from .model import beta_power_pmf, bs_indices_y_ybar, uniform
    from .power_opt import algorithm2

    lb = lower_bound(cfg)
    ub_general, ub_special = upper_bound_uniform(cfg)
    ub_maxage = upper_bound_maxage(cfg)
    y, ybar = bs_indices_y_ybar(cfg)
    relaxed = cfg.topology.is_relaxed
    equality = relaxed and y == ybar
    x_is_xbar = adv_index_x(cfg) == adv_index_x_bar_or_max(cfg)

    cases = [
        ("uniform", "psi_bar", uniform_policy(), psi_bar()),
        ("uniform", "bracket", uniform_policy(), bracket_adversary(cfg)),
        ("maxage", "psi_bar", maxage_policy(), psi_bar()),
        ("maxage", "bracket", maxage_policy(), bracket_adversary(cfg)),
    ]
    if relaxed:
        e = beta_power_pmf(cfg)
        Ns = cfg.num_channels
        profile = StationaryProfile(uniform(cfg.num_users), uniform(Ns), e, uniform(Ns), algorithm2(e, cfg))
        bs, adv = profile_policies(profile)
        cases.append(("stationary_uniform", "best_power", bs, adv))

    rows = []
    for k, (pol, adv_name, bs, adv) in enumerate(cases):
        res = run(cfg, bs, adv, slots, reps, seed + k, workers=workers)
        age, se = res.system_avg_age, res.std_error
        slack = sigmas * se
        checks = {}
        if adv_name == "psi_bar":
            checks["above_lower_bound"] = age >= lb - slack
        if pol in ("uniform", "stationary_uniform"):
            checks["below_2N"] = age <= ub_general + slack
            if ub_special is not None and pol == "uniform":
                checks["below_uniform_special"] = age <= ub_special + slack
        if pol == "maxage":
            checks["below_maxage_bound"] = age <= ub_maxage + slack
            if equality and adv_name == "psi_bar":
                checks["equals_lower_bound"] = abs(age - lb) <= slack
                if x_is_xbar:
                    checks["equals_maxage_bound"] = abs(age - ub_maxage) <= slack
        rows.append({
            "policy": pol,
            "adversary": adv_name,
            "age": age,
            "std_error": se,
            "lower_bound": float(lb),
            "upper_uniform_general": float(ub_general),
            "upper_uniform_special": None if ub_special is None else float(ub_special),
            "upper_maxage": float(ub_maxage),
            "checks": {k: bool(v) for k, v in checks.items()},
            "passed": bool(all(checks.values())),
        })
    return rows
