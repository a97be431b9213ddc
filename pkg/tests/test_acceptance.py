"""Acceptance criteria, one test per criterion with its runtime budget.

Each test records a one-line verdict printed in the terminal summary.
"""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from conftest import ACCEPTANCE_RESULTS

from persuaded_search import contracts, search_core, signals
from persuaded_search.aps_oracle import MinimaxRegime, aps_iterate, hausdorff_cells, scan_fixed_points
from persuaded_search.contracts import PayoffProfile, compute_thresholds, wtp
from persuaded_search.game_engine import Mode, StrategyAutomaton, analytic_payoffs, expected_duration, mc_estimate, verify_supported
from persuaded_search.search_core import surplus_bounds
from persuaded_search.signals import Signal

Y = PayoffProfile


def record(num, ok, text):
    ACCEPTANCE_RESULTS[num] = (bool(ok), text)
    assert ok, text


def bisect_oracle(f, lo, hi, tol=1e-13):
    flo = f(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


# closed forms for the uniform prior, written independently of the package
def u_bar(k):
    return 1 - math.sqrt(2 * k)


def u_low(k):
    return 0.5 - k


def phi_uniform(k):
    # free full information into autarky minus the best rejection value
    c_low = (0.5 + k) ** 2 / 2
    if k < 0.125:
        return c_low - (0.5 + k) + math.sqrt(2 * k)
    return c_low - k


def g_uniform(k, eps):
    return phi_uniform(k) - eps * u_bar(k)


def test_criterion_1_closed_forms(uniform):
    start = time.perf_counter()
    worst = 0.0
    for k in (0.02, 0.08, 0.1, 0.125, 0.18):
        search_core.surplus_bounds.cache_clear()
        sb = surplus_bounds(uniform, k)
        worst = max(worst, abs(sb.mccall - u_bar(k)), abs(sb.autarky - u_low(k)))
    elapsed = time.perf_counter() - start
    record(1, worst <= 1e-8 and elapsed < 1.0, f"max error {worst:.2e} (tol 1e-8), {elapsed:.2f}s (< 1s)")


def test_criterion_2_thresholds(uniform):
    # oracles: K from u_bar(K) = mean, k* from the closed-form sign change,
    # epsilon from a dense scan of the closed form, k** from g's sign change
    cap_k = bisect_oracle(lambda k: u_bar(k) - 0.5, 1e-6, 0.49)
    k_star = bisect_oracle(phi_uniform, 1e-6, cap_k)
    ks = np.linspace(k_star + 1e-9, 0.5 - 1e-9, 200_001)
    eps = float(np.min(2 * ks * np.sqrt(2 * ks) - 2 * ks**2))
    k2 = bisect_oracle(lambda k: g_uniform(k, eps), k_star + 1e-9, cap_k)
    assert abs(cap_k - 0.125) < 1e-9 and abs(k_star - 0.0858) < 1e-4
    assert abs(eps - 0.05636) < 1e-3 and abs(k2 - 0.1021) < 1e-3

    for fn in (contracts.compute_thresholds, contracts.threshold_x, search_core.surplus_bounds, signals.atoms):
        fn.cache_clear()
    start = time.perf_counter()
    th = compute_thresholds(uniform)
    elapsed = time.perf_counter() - start
    errs = {
        "K": abs(th.capital_k - 0.125),
        "k*": abs(th.k_star - 0.0858),
        "eps": abs(th.epsilon - 0.05636),
        "k**": abs(th.k_double_star - 0.1021),
    }
    oracle_ok = (
        abs(th.capital_k - cap_k) < 1e-6 and abs(th.k_star - k_star) < 1e-8
        and abs(th.epsilon - eps) < 1e-6 and abs(th.k_double_star - k2) < 1e-6
    )
    ok = errs["K"] <= 1e-6 and errs["k*"] <= 1e-4 and errs["eps"] <= 1e-3 and errs["k**"] <= 1e-3 and oracle_ok and elapsed < 5
    text = (
        f"K={th.capital_k:.9f} k*={th.k_star:.9f} eps={th.epsilon:.9f} k**={th.k_double_star:.9f}; "
        f"oracle agreement {oracle_ok}; {elapsed:.2f}s (< 5s)"
    )
    record(2, ok, text)


def test_criterion_3_bang_bang(uniform):
    start = time.perf_counter()
    named = {0.02: "NuZero", 0.05: "NuZero", 0.08: "NuZero", 0.09: "NuFullSurplus", 0.1: "NuFullSurplus", 0.18: "NuFullSurplus"}
    bad_named = [k for k, r in named.items() if scan_fixed_points(uniform, k).regime != MinimaxRegime(r)]
    sweep = np.linspace(0.005, 0.45, 50)
    disagreements = 0
    for k in sweep:
        expect = MinimaxRegime.NU_FULL_SURPLUS if phi_uniform(k) > 0 else MinimaxRegime.NU_ZERO
        disagreements += scan_fixed_points(uniform, float(k)).regime != expect
    elapsed = time.perf_counter() - start
    ok = not bad_named and disagreements == 0 and elapsed < 30
    record(3, ok, f"named mismatches {bad_named}, {disagreements} disagreements on 50-point sweep, {elapsed:.1f}s (< 30s)")


def test_criterion_4_monte_carlo(uniform):
    start = time.perf_counter()
    cases = [(Y((0.32,), 0.48), 5.0), (Y((0.1, 0.1), 0.5), 13.09)]
    worst = 0.0
    for y, duration in cases:
        target = analytic_payoffs(uniform, 0.02, y)
        t_exact = expected_duration(uniform, 0.02, y)
        assert abs(t_exact - duration) < 0.01
        names = [f"V{i + 1}" for i in range(y.n)] + ["U", "T"]
        values = list(y.broker_payoffs) + [y.agent_payoff, t_exact]
        np.testing.assert_allclose(target.as_array(), y.as_array(), atol=1e-9)
        aut = StrategyAutomaton(y)
        for seed in range(10):
            est = mc_estimate(aut, uniform, 0.02, 100_000, seed)
            for name, val in zip(names, values):
                m, se = est.get(name)
                worst = max(worst, abs(m - val) / se)
    elapsed = time.perf_counter() - start
    record(4, worst <= 3 and elapsed < 60, f"largest deviation {worst:.2f} SE (<= 3) over 2 profiles x 10 seeds, {elapsed:.1f}s (< 60s)")


def test_criterion_5_wtp(uniform):
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    th = compute_thresholds(uniform)
    full = Signal.full_info()
    nonzero = 0
    sb = surplus_bounds(uniform, 0.02)
    for _ in range(1000):
        n = int(rng.integers(1, 4))
        w = rng.dirichlet(np.ones(n + 1)) * sb.full_surplus * rng.uniform()
        nonzero += wtp(uniform, 0.02, Y(tuple(w[:n]), sb.autarky + w[n]), full) != 0.0
    sb = surplus_bounds(uniform, 0.095)
    for _ in range(1000):
        n = int(rng.integers(2, 4))
        b = rng.dirichlet(np.ones(n)) * th.epsilon * rng.uniform()
        a = rng.uniform(0, sb.full_surplus - b.sum())
        nonzero += wtp(uniform, 0.095, Y(tuple(b), sb.autarky + a), full) != 0.0
    sb = surplus_bounds(uniform, 0.11)
    positive = wtp(uniform, 0.11, Y((sb.full_surplus, 0.0), sb.autarky), full)
    elapsed = time.perf_counter() - start
    ok = nonzero == 0 and abs(positive - 0.00121) <= 1e-4 and elapsed < 10
    record(5, ok, f"{nonzero} nonzero of 2000 zero cases, k=0.11 wtp={positive:.6f} (0.00121 +/- 1e-4), {elapsed:.1f}s (< 10s)")


def test_criterion_6_deviation_immunity(uniform):
    start = time.perf_counter()
    rng = np.random.default_rng(6)
    failures = []
    sb = surplus_bounds(uniform, 0.02)
    for _ in range(100):
        w = rng.dirichlet(np.ones(3)) * sb.full_surplus * rng.uniform()
        y = Y((w[0], w[1]), sb.autarky + w[2])
        if not verify_supported(y, uniform, 0.02, 2).ok:
            failures.append(str(y))
    eps = compute_thresholds(uniform).epsilon
    sb = surplus_bounds(uniform, 0.095)
    for _ in range(100):
        b = rng.dirichlet(np.ones(2)) * eps * rng.uniform()
        y = Y(tuple(b), sb.autarky + rng.uniform(0, sb.full_surplus - b.sum()))
        if not verify_supported(y, uniform, 0.095, 2).ok:
            failures.append(str(y))
    sb = surplus_bounds(uniform, 0.1)
    folk_caught = 0
    y1s = np.linspace(0.0, sb.full_surplus, 12)[:-1]
    for y1 in y1s:
        y = Y((float(y1),), sb.autarky + (sb.full_surplus - y1) / 2)
        folk_caught += not verify_supported(y, uniform, 0.1, 1, Mode.MONOPOLY_TRIANGLE, 0.0).broker_ic
    elapsed = time.perf_counter() - start
    ok = not failures and folk_caught == len(y1s) and elapsed < 120
    record(6, ok, f"{len(failures)} of 200 supported profiles failed, folk construction rejected {folk_caught}/{len(y1s)}, {elapsed:.1f}s (< 120s)")


@pytest.mark.slow
def test_criterion_7_aps(uniform):
    start = time.perf_counter()
    dists = {}
    for k in (0.02, 0.1):
        res = aps_iterate(uniform, k, resolution=100)
        dists[k] = hausdorff_cells(res, uniform, k)
    elapsed = time.perf_counter() - start
    ok = all(d <= 2 for d in dists.values()) and elapsed < 600
    record(7, ok, f"Hausdorff cells k=0.02: {dists[0.02]:.3f}, k=0.1: {dists[0.1]:.3f} (<= 2), {elapsed:.1f}s (< 600s)")


def test_criterion_8_property_suites():
    path = Path(__file__).with_name("test_properties.py")
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", str(path)], capture_output=True, text=True)
    elapsed = time.perf_counter() - start
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()
    record(8, proc.returncode == 0, f"standalone property run: {summary} ({elapsed:.1f}s)")
