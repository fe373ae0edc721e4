"""System instance, validation and the derived scalars used by every other module.

Power and channel indices are 0-based throughout the package; only the config
file format uses 1-based channel numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import InfeasibleError, NoneAboveError, TopologyError, ValidationError

PMF_TOL = 1e-9
BUDGET_TOL = 1e-9
# two powers closer than this are treated as the same level
POWER_EQ_TOL = 1e-12


@dataclass(frozen=True)
class PowerLevels:
    levels: tuple[float, ...]
    budget: float

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.levels, dtype=float)

    def __len__(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class ChannelTopology:
    total_channels: int
    per_user_sets: tuple[tuple[int, ...], ...]  # 0-based channel ids

    @property
    def is_relaxed(self) -> bool:
        """True when every user can be served on every channel."""
        full = set(range(self.total_channels))
        return all(set(s) == full for s in self.per_user_sets)

    @property
    def min_set_size(self) -> int:
        return min(len(s) for s in self.per_user_sets)


@dataclass(frozen=True)
class Config:
    """A validated system instance. Build it with :func:`validate`."""

    num_users: int
    topology: ChannelTopology
    bs_powers: PowerLevels
    adv_powers: PowerLevels
    success: np.ndarray  # n x m, f[i, j]

    @property
    def num_channels(self) -> int:
        return self.topology.total_channels

    @property
    def n(self) -> int:
        return len(self.bs_powers)

    @property
    def m(self) -> int:
        return len(self.adv_powers)

    def to_raw(self) -> dict[str, Any]:
        """Inverse of :func:`validate`, in the config-file layout."""
        return {
            "num_users": self.num_users,
            "num_channels": self.num_channels,
            "channel_sets": [[c + 1 for c in s] for s in self.topology.per_user_sets],
            "bs_powers": list(self.bs_powers.levels),
            "bs_budget": self.bs_powers.budget,
            "adv_powers": list(self.adv_powers.levels),
            "adv_budget": self.adv_powers.budget,
            "success_matrix": self.success.tolist(),
        }

    def with_budgets(self, bs_budget: float | None = None, adv_budget: float | None = None) -> "Config":
        raw = self.to_raw()
        if bs_budget is not None:
            raw["bs_budget"] = bs_budget
        if adv_budget is not None:
            raw["adv_budget"] = adv_budget
        return validate(raw)


@dataclass(frozen=True)
class StationaryProfile:
    """The five stationary pmfs (u, s, e, a, d)."""

    u: np.ndarray
    s: np.ndarray
    e: np.ndarray
    a: np.ndarray
    d: np.ndarray

    def replace(self, **kw) -> "StationaryProfile":
        fields = dict(u=self.u, s=self.s, e=self.e, a=self.a, d=self.d)
        fields.update(kw)
        return StationaryProfile(**fields)

    def check(self, cfg: Config) -> None:
        issues = []
        for name, pmf, size in (
            ("u", self.u, cfg.num_users),
            ("s", self.s, cfg.num_channels),
            ("e", self.e, cfg.n),
            ("a", self.a, cfg.num_channels),
            ("d", self.d, cfg.m),
        ):
            if len(pmf) != size:
                issues.append((name, f"length {len(pmf)} != {size}"))
        if not issues:
            if not budget_ok(self.e, cfg.bs_powers):
                issues.append(("e", "violates the BS power budget"))
            if not budget_ok(self.d, cfg.adv_powers):
                issues.append(("d", "violates the adversary power budget"))
        if issues:
            raise ValidationError(issues)


def as_pmf(weights: Sequence[float] | np.ndarray, name: str = "pmf") -> np.ndarray:
    """Check a probability vector and return it renormalised to sum to one exactly."""
    w = np.asarray(weights, dtype=float).ravel()
    if w.size == 0:
        raise ValidationError([(name, "empty pmf")])
    if not np.all(np.isfinite(w)):
        raise ValidationError([(name, "non-finite weight")])
    if np.any(w < 0):
        raise ValidationError([(name, "negative weight")])
    total = w.sum()
    if abs(total - 1.0) > PMF_TOL:
        raise ValidationError([(name, f"weights sum to {total!r}, not 1")])
    return w / total


def uniform(k: int) -> np.ndarray:
    return np.full(k, 1.0 / k)


def basis(k: int, i: int) -> np.ndarray:
    z = np.zeros(k)
    z[i] = 1.0
    return z


def budget_ok(pmf: np.ndarray, powers: PowerLevels, tol: float = BUDGET_TOL) -> bool:
    return float(np.dot(pmf, powers.array)) <= powers.budget + tol


def _check_levels(key: str, levels: Any, issues: list) -> tuple[float, ...] | None:
    try:
        vals = tuple(float(v) for v in levels)
    except (TypeError, ValueError):
        issues.append((key, "must be a list of numbers"))
        return None
    if not vals:
        issues.append((key, "must be non-empty"))
        return None
    if any(not np.isfinite(v) or v <= 0 for v in vals):
        issues.append((key, "powers must be finite and strictly positive"))
    if any(b <= a for a, b in zip(vals, vals[1:])):
        issues.append((key, "powers must be strictly increasing (duplicates rejected)"))
    return vals


def _check_budget(key: str, value: Any, issues: list) -> float | None:
    try:
        b = float(value)
    except (TypeError, ValueError):
        issues.append((key, "must be a number"))
        return None
    if not np.isfinite(b) or b <= 0:
        issues.append((key, "budget must be finite and > 0"))
    return b


def validate(raw: Mapping[str, Any]) -> Config:
    """Turn a raw mapping (config-file layout) into a :class:`Config`.

    Every violated invariant is collected and reported in a single
    :class:`ValidationError`.
    """
    issues: list[tuple[str, str]] = []
    if not isinstance(raw, Mapping):
        raise ValidationError([("", "config must be a mapping")])
    for key in ("num_users", "num_channels", "bs_powers", "bs_budget",
                "adv_powers", "adv_budget", "success_matrix"):
        if key not in raw:
            issues.append((key, "missing required key"))
    if issues:
        raise ValidationError(issues)

    num_users = raw["num_users"]
    if isinstance(num_users, bool) or not isinstance(num_users, (int, np.integer)):
        issues.append(("num_users", "must be an integer"))
        num_users = None
    elif num_users <= 1:
        issues.append(("num_users", f"need more than one user, got {num_users}"))

    num_channels = raw["num_channels"]
    if isinstance(num_channels, bool) or not isinstance(num_channels, (int, np.integer)):
        issues.append(("num_channels", "must be an integer"))
        num_channels = None
    elif num_channels < 2:
        issues.append(("num_channels", "need at least two channels"))

    sets: list[tuple[int, ...]] = []
    raw_sets = raw.get("channel_sets")
    if num_channels is not None and num_users is not None and num_users > 1:
        if raw_sets is None:
            sets = [tuple(range(num_channels))] * int(num_users)
        elif not isinstance(raw_sets, Sequence) or len(raw_sets) != num_users:
            issues.append(("channel_sets", "need exactly one channel list per user"))
        else:
            for u, cs in enumerate(raw_sets):
                key = f"channel_sets[{u}]"
                try:
                    ids = [int(c) for c in cs]
                except (TypeError, ValueError):
                    issues.append((key, "must be a list of channel numbers"))
                    continue
                if len(set(ids)) != len(ids):
                    issues.append((key, "duplicate channel"))
                if any(c < 1 or c > num_channels for c in ids):
                    issues.append((key, f"channel numbers must lie in 1..{num_channels}"))
                if len(set(ids)) < 2:
                    issues.append((key, "each user needs at least two channels"))
                sets.append(tuple(sorted(c - 1 for c in set(ids))))
            if len(sets) == num_users:
                covered = set().union(*map(set, sets))
                if covered != set(range(num_channels)):
                    issues.append(("channel_sets", "union of user channel sets must be all channels"))

    bs_levels = _check_levels("bs_powers", raw["bs_powers"], issues)
    adv_levels = _check_levels("adv_powers", raw["adv_powers"], issues)
    bs_budget = _check_budget("bs_budget", raw["bs_budget"], issues)
    adv_budget = _check_budget("adv_budget", raw["adv_budget"], issues)

    F = None
    try:
        F = np.array(raw["success_matrix"], dtype=float)
    except (TypeError, ValueError):
        issues.append(("success_matrix", "must be a rectangular matrix of numbers"))
    if F is not None:
        if F.ndim != 2:
            issues.append(("success_matrix", "must be two-dimensional"))
            F = None
        elif bs_levels is not None and adv_levels is not None and F.shape != (len(bs_levels), len(adv_levels)):
            issues.append(("success_matrix",
                           f"shape {F.shape} does not match ({len(bs_levels)}, {len(adv_levels)}) power lists"))
    if F is not None:
        if not np.all(np.isfinite(F)) or np.any(F < 0) or np.any(F > 1):
            issues.append(("success_matrix", "entries must lie in [0, 1]"))
        for j in range(F.shape[1]):
            col = F[:, j]
            if np.any(np.diff(col) < -POWER_EQ_TOL):
                issues.append((f"success_matrix[:, {j}]",
                               "column must be non-decreasing in the BS power index"))
        for i in range(F.shape[0]):
            if np.any(np.diff(F[i]) > POWER_EQ_TOL):
                issues.append((f"success_matrix[{i}]",
                               "row must be non-increasing in the adversary power index"))

    if issues:
        raise ValidationError(issues)

    F.setflags(write=False)
    return Config(
        num_users=int(num_users),
        topology=ChannelTopology(int(num_channels), tuple(sets)),
        bs_powers=PowerLevels(bs_levels, bs_budget),
        adv_powers=PowerLevels(adv_levels, adv_budget),
        success=F,
    )


# -- index helpers -----------------------------------------------------------

def _below(levels: PowerLevels) -> int:
    """Largest index whose power does not exceed the budget."""
    p = levels.array
    idx = np.nonzero(p <= levels.budget + POWER_EQ_TOL)[0]
    if idx.size == 0:
        raise InfeasibleError(f"budget {levels.budget} is below the smallest power {p[0]}")
    return int(idx[-1])


def _above(levels: PowerLevels) -> int:
    """Smallest index whose power is at least the budget."""
    p = levels.array
    idx = np.nonzero(p >= levels.budget - POWER_EQ_TOL)[0]
    if idx.size == 0:
        raise NoneAboveError(f"budget {levels.budget} exceeds the largest power {p[-1]}")
    return int(idx[0])


def adv_index_x(cfg: Config) -> int:
    """Strongest adversary power that fits the adversary budget."""
    return _below(cfg.adv_powers)


def adv_index_x_bar(cfg: Config) -> int:
    """Weakest adversary power at or above the adversary budget."""
    return _above(cfg.adv_powers)


def adv_index_x_bar_or_max(cfg: Config) -> int:
    try:
        return adv_index_x_bar(cfg)
    except NoneAboveError:
        return cfg.m - 1


def bs_indices_y_ybar(cfg: Config) -> tuple[int, int]:
    """(y, ybar): the BS power levels bracketing the BS budget from below and above."""
    y = _below(cfg.bs_powers)
    try:
        ybar = _above(cfg.bs_powers)
    except NoneAboveError:
        return cfg.n - 1, cfg.n - 1
    return y, ybar


def compute_beta(cfg: Config) -> float:
    """Weight on the lower level so that the two-level mixture spends the budget exactly."""
    y, ybar = bs_indices_y_ybar(cfg)
    if y == ybar:
        return 1.0
    p = cfg.bs_powers.array
    return float((p[ybar] - cfg.bs_powers.budget) / (p[ybar] - p[y]))


def beta_power_pmf(cfg: Config) -> np.ndarray:
    y, ybar = bs_indices_y_ybar(cfg)
    beta = compute_beta(cfg)
    e = np.zeros(cfg.n)
    e[y] += beta
    e[ybar] += 1.0 - beta
    return e


def phi(e: np.ndarray, d: np.ndarray, F: np.ndarray) -> float:
    """Expected delivery probability of a blocked transmission."""
    e = np.asarray(e, dtype=float)
    d = np.asarray(d, dtype=float)
    F = np.asarray(F, dtype=float)
    if F.shape != (e.size, d.size):
        raise ValueError(f"dimension mismatch: F{F.shape}, e[{e.size}], d[{d.size}]")
    return float(e @ F @ d)


def require_relaxed(cfg: Config) -> None:
    if not cfg.topology.is_relaxed:
        raise TopologyError("operation needs every user to have every channel")


def success_prob_vector(profile: StationaryProfile, cfg: Config) -> np.ndarray:
    """Per-slot delivery probability of each user under a stationary profile."""
    require_relaxed(cfg)
    collide = float(np.dot(profile.s, profile.a))
    f = phi(profile.e, profile.d, cfg.success)
    q = np.asarray(profile.u, dtype=float) * (1.0 - collide * (1.0 - f))
    return np.clip(q, 0.0, 1.0)
