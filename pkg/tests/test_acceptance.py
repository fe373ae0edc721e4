"""Acceptance criteria, one test each.

Every test records a single ``CRITERION k: PASS|FAIL ...`` line; the lines are
printed in the pytest terminal summary and also when this file is run as a
script (``python3 tests/test_acceptance.py``).
"""
import io
import json
import time

import numpy as np
import pytest

from aoijam.cli import main as cli_main
from aoijam.game import (
    best_response_dynamics,
    check_nash_fixed_powers,
    detect_shift_structure,
    minimax_power_game,
    special_case_nash,
)
from aoijam.instances import (
    counterexample_config,
    counterexample_raw,
    random_config,
    random_feasible_pmf,
    shift_structured_matrix,
)
from aoijam.model import StationaryProfile, success_prob_vector
from aoijam.power_opt import algorithm1, algorithm2, oracle_best_d, oracle_best_e
from aoijam.sim import policy_suite, profile_policies, run

RESULTS: list[str] = []


def _report(k: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _support(w):
    return tuple(np.flatnonzero(w > 0).tolist())


def test_criterion_1_counterexample_cycle():
    t0 = time.perf_counter()
    cfg = counterexample_config()
    A, B = np.array([0, 0.75, 0.25]), np.array([0.375, 0, 0.625])  # {3,5} and {1,5}
    pairs = [
        (algorithm1(A, cfg), A),  # BS vs adversary-{3,5} -> {3,5}
        (algorithm1(B, cfg), B),  # BS vs adversary-{1,5} -> {1,5}
        (algorithm2(B, cfg), A),  # adversary vs BS-{1,5} -> {3,5}
        (algorithm2(A, cfg), B),  # adversary vs BS-{3,5} -> {1,5}
    ]
    trace = best_response_dynamics(A, cfg)
    elapsed = time.perf_counter() - t0
    ok = all(_support(got) == _support(want) and np.max(np.abs(got - want)) <= 1e-12
             for got, want in pairs)
    ok = ok and trace.cycle_period == 2 and elapsed < 1.0
    _report(1, ok, f"period={trace.cycle_period} start={trace.cycle_start} time={elapsed:.3f}s")


def test_criterion_2_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    fails = {"iterated": 0, "prose": 0, "pseudocode": 0}
    count = 1000
    for _ in range(count):
        cfg = random_config(rng, n=int(rng.integers(1, 9)), m=int(rng.integers(1, 9)))
        F = cfg.success
        d = random_feasible_pmf(rng, cfg.adv_powers.array, cfg.adv_powers.budget)
        e = random_feasible_pmf(rng, cfg.bs_powers.array, cfg.bs_powers.budget)
        best_e = oracle_best_e(d, cfg)[1]
        best_d = oracle_best_d(e, cfg)[1]
        for variant in fails:
            bad = abs(algorithm1(d, cfg, variant) @ F @ d - best_e) > 1e-9
            bad |= abs(e @ F @ algorithm2(e, cfg, variant) - best_d) > 1e-9
            fails[variant] += int(bad)
    elapsed = time.perf_counter() - t0
    ok = fails["iterated"] == 0 and elapsed < 30
    _report(2, ok, f"instances={count} failures={fails['iterated']} "
                   f"(single-pass prose={fails['prose']} pseudocode={fails['pseudocode']}, informational) "
                   f"time={elapsed:.1f}s")


def test_criterion_3_renewal_reward():
    t0 = time.perf_counter()
    rng = np.random.default_rng(33)
    T, R = 1_000_000, 20
    worst = 0.0
    misses = 0
    for k in range(20):
        N, Ns = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        cfg = random_config(rng, n=int(rng.integers(1, 5)), m=int(rng.integers(1, 5)),
                            num_users=N, num_channels=Ns)
        profile = StationaryProfile(
            rng.dirichlet(np.ones(N)), rng.dirichlet(np.ones(Ns)),
            random_feasible_pmf(rng, cfg.bs_powers.array, cfg.bs_powers.budget),
            rng.dirichlet(np.ones(Ns)),
            random_feasible_pmf(rng, cfg.adv_powers.array, cfg.adv_powers.budget))
        q = success_prob_vector(profile, cfg)
        bs, adv = profile_policies(profile)
        res = run(cfg, bs, adv, T, R, 1000 + k)
        z = np.abs(np.array(res.per_user_avg_age) - 1 / q) / np.array(res.per_user_std_error)
        worst = max(worst, float(z.max()))
        misses += int(np.sum(z > 4))
    elapsed = time.perf_counter() - t0
    _report(3, misses == 0 and elapsed < 120,
            f"profiles=20 T={T} R={R} max|z|={worst:.2f} misses={misses} time={elapsed:.1f}s")


def _equality_config(rng):
    """Homogeneous sets with both budgets sitting exactly on a power level."""
    cfg = random_config(rng, n=int(rng.integers(2, 5)), m=int(rng.integers(2, 5)),
                        num_users=int(rng.integers(2, 6)), num_channels=int(rng.integers(2, 6)))
    pb, pa = cfg.bs_powers.array, cfg.adv_powers.array
    return cfg.with_budgets(bs_budget=float(pb[rng.integers(len(pb))]),
                            adv_budget=float(pa[rng.integers(len(pa))]))


def test_criterion_4_bound_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(44)
    failed = []
    eq_checked = 0
    for k in range(10):
        if k % 2:
            cfg = _equality_config(rng)
        else:
            cfg = random_config(rng, n=int(rng.integers(1, 5)), m=int(rng.integers(1, 5)),
                                num_users=int(rng.integers(2, 6)), num_channels=int(rng.integers(2, 6)),
                                heterogeneous=k % 4 == 2)
        for row in policy_suite(cfg, 100_000, 20, 4000 + 10 * k):
            eq_checked += int("equals_maxage_bound" in row["checks"])
            if not row["passed"]:
                failed.append((k, row["policy"], row["adversary"], row["checks"]))
    elapsed = time.perf_counter() - t0
    ok = not failed and eq_checked >= 5
    _report(4, ok, f"configs=10 equality_cases={eq_checked} failed_rows={failed} time={elapsed:.1f}s")


def test_criterion_5_fixed_power_nash():
    rng = np.random.default_rng(55)
    passes = perturbed_fail = 0
    for _ in range(10):
        cfg = random_config(rng, n=int(rng.integers(1, 6)), m=int(rng.integers(1, 6)),
                            num_users=int(rng.integers(2, 6)), num_channels=int(rng.integers(2, 6)))
        e = random_feasible_pmf(rng, cfg.bs_powers.array, cfg.bs_powers.budget)
        d = random_feasible_pmf(rng, cfg.adv_powers.array, cfg.adv_powers.budget)
        passes += int(check_nash_fixed_powers(cfg, e, d, random_probes=20, rng=rng).verdict)
        N, Ns = cfg.num_users, cfg.num_channels
        u = np.full(N, 1.0 / N)
        u[0] += 0.1
        u[-1] -= 0.1
        s = np.full(Ns, 1.0 / Ns)
        s[0] += 0.1
        s[-1] -= 0.1
        fails = [not check_nash_fixed_powers(cfg, e, d, u=u).verdict,
                 not check_nash_fixed_powers(cfg, e, d, s=s).verdict]
        perturbed_fail += int(any(fails))
    _report(5, passes == 10 and perturbed_fail == 10,
            f"uniform_triple_passes={passes}/10 perturbed_triple_fails={perturbed_fail}/10")


def test_criterion_6_special_case():
    rng = np.random.default_rng(66)
    constant = nash = 0
    for _ in range(10):
        n, m = int(rng.integers(2, 7)), int(rng.integers(2, 7))
        F = shift_structured_matrix(rng, n, m)
        assert detect_shift_structure(F) is not None
        cfg = random_config(rng, n=n, m=m, F=F)
        outs = {tuple(algorithm1(random_feasible_pmf(rng, cfg.adv_powers.array, cfg.adv_powers.budget), cfg))
                for _ in range(100)}
        constant += int(len(outs) == 1)
        _, rep = special_case_nash(cfg)
        nash += int(rep.verdict and rep.max_bs_gain <= 1e-9 and rep.max_adv_gain <= 1e-9)
    _report(6, constant == 10 and nash == 10, f"constant_output={constant}/10 nash_verified={nash}/10")


def test_criterion_7_minimax_probe():
    cfg = counterexample_config()
    fp = minimax_power_game(cfg, iters=100_000)
    trace = best_response_dynamics(np.array([0, 0.75, 0.25]), cfg)
    side_by_side = {"minimax_value": fp.value, "duality_gap": fp.duality_gap,
                    "e": np.round(fp.e, 6).tolist(), "d": np.round(fp.d, 6).tolist(),
                    "cycle_period": trace.cycle_period, "cycle_values": trace.values}
    _report(7, fp.duality_gap <= 1e-6 and fp.iterations <= 100_000,
            f"iterations={fp.iterations} {json.dumps(side_by_side)}")


def test_criterion_8_determinism(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(counterexample_raw()))
    outputs = {}
    for w in (1, 2, 8):
        buf = io.StringIO()
        code = cli_main(["simulate", str(path), "--slots", "50000", "--reps", "8", "--seed", "7",
                         "--workers", str(w)], out=buf)
        assert code == 0
        doc = json.loads(buf.getvalue())
        doc["manifest"].pop("timestamp")
        outputs[w] = json.dumps(doc, sort_keys=True).encode()
    same = outputs[1] == outputs[2] == outputs[8]
    _report(8, same, f"workers=1,2,8 byte_identical={same}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
