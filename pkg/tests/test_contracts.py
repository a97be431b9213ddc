import math

import numpy as np
import pytest
from scipy.optimize import brentq

from persuaded_search.contracts import (
    Offer,
    PayoffProfile,
    Thresholds,
    bisect,
    compute_thresholds,
    epsilon_k,
    onpath_offer,
    phi,
    price_closed_form,
    price_direct,
    threshold_x,
    wtp,
)
from persuaded_search.errors import DomainError, InfeasibleProfileError, RootNotBracketedError
from persuaded_search.search_core import surplus_bounds
from persuaded_search.signals import Signal

Y = PayoffProfile


def uniform_x(k, u):
    # with z = 1 - x: z^2/2 + z (1 - z - u) = k  =>  z = (1-u) - sqrt((1-u)^2 - 2k)
    return 1 - ((1 - u) - math.sqrt(max((1 - u) ** 2 - 2 * k, 0.0)))


class TestThresholdX:
    def test_fixed_point_at_mccall(self, uniform):
        assert threshold_x(uniform, 0.02, 0.8) == pytest.approx(0.8, abs=1e-10)

    def test_autarky(self, uniform):
        assert threshold_x(uniform, 0.02, 0.48) == pytest.approx(0.96, abs=1e-10)

    def test_interior(self, uniform):
        assert threshold_x(uniform, 0.02, 0.6) == pytest.approx(0.946410, abs=1e-6)

    def test_closed_form_oracle(self, uniform):
        for k in (0.02, 0.07, 0.11):
            sb = surplus_bounds(uniform, k)
            for u in np.linspace(sb.autarky, sb.mccall, 17):
                assert threshold_x(uniform, k, float(u)) == pytest.approx(uniform_x(k, u), abs=1e-7)

    def test_domain(self, uniform):
        with pytest.raises(DomainError):
            threshold_x(uniform, 0.02, 0.47)
        with pytest.raises(DomainError):
            threshold_x(uniform, 0.02, 0.81)


class TestOnpathOffer:
    def test_single_broker(self, uniform):
        off = onpath_offer(uniform, 0.02, Y((0.32,), 0.48))
        assert off.price == pytest.approx(0.064, abs=1e-10)
        assert off.signal.threshold == pytest.approx(0.8, abs=1e-10)

    def test_two_brokers(self, uniform):
        off = onpath_offer(uniform, 0.02, Y((0.1, 0.1), 0.5))
        z = 0.3 - math.sqrt(0.09 - 0.04)
        assert off.signal.threshold == pytest.approx(1 - z, abs=1e-9)
        assert off.price == pytest.approx(0.2 * z, abs=1e-9)

    def test_zero_broker_take_is_free(self, beta22):
        assert onpath_offer(beta22, 0.05, Y((0.0, 0.0), 0.47)).price == pytest.approx(0.0, abs=1e-15)

    def test_infeasible(self, uniform):
        with pytest.raises(InfeasibleProfileError):
            onpath_offer(uniform, 0.02, Y((0.4,), 0.48))
        with pytest.raises(InfeasibleProfileError):
            onpath_offer(uniform, 0.02, Y((0.1,), 0.4))

    def test_price_routes_agree(self, uniform):
        y = Y((0.05, 0.12), 0.55)
        assert price_direct(uniform, 0.02, y) == pytest.approx(price_closed_form(uniform, 0.02, y), abs=1e-12)

    def test_negative_price_rejected(self):
        with pytest.raises(ValueError):
            Offer(-0.1, Signal.full_info())


class TestWtp:
    def test_full_info_below_k_star(self, uniform):
        assert wtp(uniform, 0.02, Y((0.32,), 0.48), Signal.full_info()) == 0.0

    def test_full_extraction_above_k_double_star(self, uniform):
        # exact full-extraction profile with an idle rival broker
        sb = surplus_bounds(uniform, 0.11)
        y = Y((sb.full_surplus, 0.0), sb.autarky)
        expected = phi(uniform, 0.11) - (0.11 - (1 - sb.mccall) * sb.full_surplus)
        assert wtp(uniform, 0.11, y, Signal.full_info()) == pytest.approx(expected, abs=1e-12)
        assert wtp(uniform, 0.11, y, Signal.full_info()) == pytest.approx(0.00121, abs=1e-5)

    def test_uninformative_is_worthless(self, uniform):
        rng = np.random.default_rng(3)
        for k in (0.02, 0.06, 0.1, 0.2, 0.4):
            sb = surplus_bounds(uniform, k)
            for _ in range(50):
                a, b = sorted(rng.uniform(0, sb.full_surplus, 2))
                y = Y((a,), sb.autarky + (b - a))
                assert wtp(uniform, k, y, Signal.uninformative()) == 0.0


class TestPhi:
    def test_values(self, uniform):
        assert phi(uniform, 0.02) == pytest.approx(-0.1848, abs=1e-10)
        assert phi(uniform, 0.18) == pytest.approx(0.0512, abs=1e-10)

    def test_limit_at_mean(self, uniform):
        assert abs(phi(uniform, 0.5 - 1e-6)) < 1e-4


class TestBisect:
    def test_reports_bracket(self):
        root, width = bisect(lambda x: x * x - 2, 0, 2, 1e-12)
        assert root == pytest.approx(math.sqrt(2), abs=1e-12)
        assert width <= 1e-12

    def test_no_sign_change(self):
        with pytest.raises(RootNotBracketedError):
            bisect(lambda x: x * x + 1, -1, 1)


class TestThresholds:
    def test_uniform_oracles(self, uniform):
        th = compute_thresholds(uniform)
        # independent closed forms for the uniform prior
        phi_u = lambda k: (0.5 + k) ** 2 / 2 - (0.5 + k) + math.sqrt(2 * k)
        k_star = brentq(phi_u, 1e-6, 0.125, xtol=1e-14)
        eps = 2 * k_star * math.sqrt(2 * k_star) - 2 * k_star**2
        k2 = brentq(lambda k: phi_u(k) - eps * (1 - math.sqrt(2 * k)), k_star + 1e-9, 0.125, xtol=1e-14)
        assert th.capital_k == pytest.approx(0.125, abs=1e-9)
        assert th.k_star == pytest.approx(k_star, abs=1e-9)
        assert th.epsilon == pytest.approx(eps, abs=1e-8)
        assert th.k_double_star == pytest.approx(k2, abs=1e-8)
        assert th.later_crossings == ()
        assert th.bracket_width < 1e-10

    def test_capital_k_is_c_full_at_mean(self, beta22):
        # the McCall payoff equals the mean exactly when c_F(mean) = k
        assert compute_thresholds(beta22).capital_k == pytest.approx(beta22.c_full(beta22.mean), abs=1e-9)

    def test_ordering(self, prior):
        th = compute_thresholds(prior)
        assert 0 < th.k_star < th.k_double_star <= th.capital_k < prior.mean
        assert th.epsilon > 0

    def test_epsilon_is_infimum_on_scan(self, prior):
        th = compute_thresholds(prior)
        ks = np.linspace(th.k_star + 1e-6, prior.mean - 1e-6, 300)
        assert min(epsilon_k(prior, k) for k in ks) >= th.epsilon - 1e-9

    def test_uniform_epsilon_closed_form(self, uniform):
        for k in (0.09, 0.11, 0.2):
            assert epsilon_k(uniform, k) == pytest.approx(2 * k * math.sqrt(2 * k) - 2 * k * k, abs=1e-9)

    def test_dict_round_trip(self, uniform):
        th = compute_thresholds(uniform)
        assert Thresholds.from_dict(th.to_dict()) == th
