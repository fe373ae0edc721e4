import numpy as np
import pytest

from aoijam.bounds import (
    bound_report,
    lower_bound,
    optimality_ratios,
    upper_bound_maxage,
    upper_bound_uniform,
)
from aoijam.errors import InfeasibleError
from aoijam.instances import COUNTEREXAMPLE_F, random_config, random_success_matrix

from conftest import make_config


def test_lower_bound_perfect_channel():
    cfg = make_config(np.ones((3, 3)), num_users=5, num_channels=4)
    assert lower_bound(cfg) == pytest.approx(3.0)


def test_lower_bound_values(ce):
    cfg = make_config(COUNTEREXAMPLE_F, num_users=4, num_channels=5)
    assert lower_bound(cfg) == pytest.approx(25 / 9.4, rel=1e-12)
    assert lower_bound(ce) == pytest.approx(3 * 2 / (2 * 1.7), rel=1e-12)


def test_lower_bound_infeasible(ce):
    with pytest.raises(InfeasibleError):
        lower_bound(ce.with_budgets(adv_budget=0.5))
    with pytest.raises(InfeasibleError):
        lower_bound(ce.with_budgets(bs_budget=0.5))


def test_upper_bound_uniform(ce):
    general, special = upper_bound_uniform(ce)
    assert general == 4.0
    assert special == pytest.approx(4 / 1.4625, rel=1e-12)
    cfg = make_config(COUNTEREXAMPLE_F, num_users=3, num_channels=3, channel_sets=[[1, 2], [2, 3], [1, 3]])
    general, special = upper_bound_uniform(cfg)
    assert general == 6.0 and special is None


def test_upper_bound_maxage(ce):
    assert upper_bound_maxage(ce) == pytest.approx(3 * 2 / (2 * 1.4625), rel=1e-12)
    perfect = make_config(np.ones((3, 3)), num_users=3, num_channels=2, bs_budget=3.0)
    assert upper_bound_maxage(perfect) == pytest.approx(2.0)
    # nbar = 2 and any non-negative success term keeps the bound at or below N + 1
    cfg = make_config(np.zeros((3, 3)), num_users=3, num_channels=3, channel_sets=[[1, 2], [2, 3], [1, 3]])
    assert upper_bound_maxage(cfg) == pytest.approx(4.0)


def test_ratios(ce):
    r = optimality_ratios(ce)
    assert r["ratio_general_uniform"] == pytest.approx(4 * 2 * 1.7 / (3 * 2))
    assert r["ratio_maxage"] == 2.0
    assert r["ratio_special_cap"] == 4.0
    big = make_config(COUNTEREXAMPLE_F, num_channels=100)
    assert optimality_ratios(big)["ratio_special_cap"] == pytest.approx(200 / 99)


def test_bound_report_indices(ce):
    rep = bound_report(ce)
    assert rep.indices == {"x": 1, "x_bar": 2, "y": 1, "y_bar": 2, "beta": 0.75}
    assert rep.nbar_s == 2


def test_random_bound_properties():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        cfg = random_config(rng, n=int(rng.integers(1, 7)), m=int(rng.integers(1, 7)),
                            heterogeneous=bool(rng.random() < 0.4))
        rep = bound_report(cfg)
        N = cfg.num_users
        assert rep.lower_bound >= (N + 1) / 2 - 1e-12
        assert rep.lower_bound <= rep.upper_maxage + 1e-12
        if rep.upper_uniform_special is not None:
            assert rep.lower_bound <= rep.upper_uniform_special + 1e-12
        assert rep.lower_bound <= rep.upper_uniform_general + 1e-12
        r = rep.ratios
        assert r["ratio_general_uniform"] <= 4 + 1e-12
        assert r["ratio_special_cap"] <= 4 + 1e-12
        if r["ratio_special_uniform"] is not None:
            assert r["ratio_special_uniform"] <= r["ratio_special_cap"] + 1e-12
        assert r["ratio_maxage"] <= 2 + 1e-12


def test_lower_bound_non_increasing_in_f():
    rng = np.random.default_rng(3)
    for _ in range(50):
        F = random_success_matrix(rng, 3, 3)
        cfg = make_config(F)
        lo = lower_bound(cfg)
        F2 = F.copy()
        F2[2, 1] = min(1.0, F2[2, 1] + 0.1)  # f[ybar, x]; keep monotone
        F2[2, 0] = max(F2[2, 0], F2[2, 1])
        assert lower_bound(make_config(F2)) <= lo + 1e-15
