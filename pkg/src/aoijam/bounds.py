"""Closed-form age bounds for the uniform and max-age schedulers."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .model import (
    Config,
    adv_index_x,
    adv_index_x_bar_or_max,
    bs_indices_y_ybar,
    compute_beta,
)


@dataclass(frozen=True)
class BoundReport:
    lower_bound: float
    upper_uniform_general: float
    upper_uniform_special: float | None
    upper_maxage: float
    ratios: dict
    nbar_s: int
    indices: dict

    def to_dict(self) -> dict:
        return asdict(self)


def _mixed_success(cfg: Config) -> float:
    """Success probability of the beta-mixed BS power against the x_bar blocking power."""
    y, ybar = bs_indices_y_ybar(cfg)
    xb = adv_index_x_bar_or_max(cfg)
    beta = compute_beta(cfg)
    F = cfg.success
    return beta * F[y, xb] + (1.0 - beta) * F[ybar, xb]


def lower_bound(cfg: Config) -> float:
    """Universal lower bound on the average age."""
    N, Ns = cfg.num_users, cfg.num_channels
    _, ybar = bs_indices_y_ybar(cfg)
    x = adv_index_x(cfg)
    return (N + 1) * Ns / (2.0 * (Ns - 1 + cfg.success[ybar, x]))


def upper_bound_uniform(cfg: Config) -> tuple[float, float | None]:
    """Upper bounds for the uniform-user scheduler.

    Returns ``(2N, special)`` where ``special`` is only defined when every
    user sees every channel.
    """
    N, Ns = cfg.num_users, cfg.num_channels
    general = 2.0 * N
    if not cfg.topology.is_relaxed:
        return general, None
    return general, N * Ns / (Ns - 1 + _mixed_success(cfg))


def upper_bound_maxage(cfg: Config) -> float:
    N = cfg.num_users
    nbar = cfg.topology.min_set_size
    return (N + 1) * nbar / (2.0 * (nbar - 1 + _mixed_success(cfg)))


def optimality_ratios(cfg: Config) -> dict:
    N, Ns = cfg.num_users, cfg.num_channels
    nbar = cfg.topology.min_set_size
    _, ybar = bs_indices_y_ybar(cfg)
    x = adv_index_x(cfg)
    f_lb = cfg.success[ybar, x]

    general = 4.0 * N * (Ns - 1 + f_lb) / ((N + 1) * Ns)
    # special-case upper bound divided by the lower bound
    special = 2.0 * N * (Ns - 1 + f_lb) / ((N + 1) * (Ns - 1 + _mixed_success(cfg)))
    ratios = {
        "ratio_general_uniform": general,
        "ratio_special_uniform": special if cfg.topology.is_relaxed else None,
        "ratio_special_cap": 2.0 * Ns / (Ns - 1),
        "ratio_maxage": nbar / (nbar - 1),
    }
    assert general <= 4.0 + 1e-12, general
    assert ratios["ratio_maxage"] <= 2.0 + 1e-12
    return ratios


def bound_report(cfg: Config) -> BoundReport:
    y, ybar = bs_indices_y_ybar(cfg)
    lb = lower_bound(cfg)
    general, special = upper_bound_uniform(cfg)
    indices = {
        "x": adv_index_x(cfg),
        "x_bar": adv_index_x_bar_or_max(cfg),
        "y": y,
        "y_bar": ybar,
        "beta": compute_beta(cfg),
    }
    return BoundReport(
        lower_bound=lb,
        upper_uniform_general=general,
        upper_uniform_special=special,
        upper_maxage=upper_bound_maxage(cfg),
        ratios=optimality_ratios(cfg),
        nbar_s=cfg.topology.min_set_size,
        indices=indices,
    )
