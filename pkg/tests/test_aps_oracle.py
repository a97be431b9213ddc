import numpy as np
import pytest

from persuaded_search.aps_oracle import (
    MinimaxRegime,
    MinimaxReport,
    aps_iterate,
    characterization_points,
    hausdorff_cells,
    minimax_lower_bound,
    reject_all_certificate,
    scan_fixed_points,
    step1_value,
)
from persuaded_search.contracts import compute_thresholds, phi
from persuaded_search.errors import DomainError
from persuaded_search.search_core import surplus_bounds


class TestMinimax:
    def test_lower_bound_values(self, uniform):
        assert minimax_lower_bound(uniform, 0.1, 0.0) == pytest.approx(0.0272136, abs=1e-6)
        s = surplus_bounds(uniform, 0.1).full_surplus
        assert minimax_lower_bound(uniform, 0.1, s) == pytest.approx(s, abs=1e-9)
        assert minimax_lower_bound(uniform, 0.02, 0.0) == 0.0

    def test_lower_bound_domain(self, uniform):
        with pytest.raises(DomainError):
            minimax_lower_bound(uniform, 0.1, 0.5)

    def test_step1_extracts_full_surplus_above_k_star(self, uniform):
        s = surplus_bounds(uniform, 0.1).full_surplus
        assert step1_value(uniform, 0.1) >= s - 1e-9

    @pytest.mark.parametrize("k", [0.02, 0.05, 0.08, 0.09, 0.1, 0.18])
    def test_certificate_tracks_phi(self, uniform, k):
        assert reject_all_certificate(uniform, k) == (phi(uniform, k) <= 0)

    @pytest.mark.parametrize("k, regime", [(0.02, "NuZero"), (0.08, "NuZero"), (0.09, "NuFullSurplus"), (0.18, "NuFullSurplus")])
    def test_regimes(self, uniform, k, regime):
        rep = scan_fixed_points(uniform, k)
        assert rep.regime == MinimaxRegime(regime)

    def test_beta_regime_flip(self, beta22):
        ks = compute_thresholds(beta22).k_star
        assert scan_fixed_points(beta22, ks * 0.95).regime == MinimaxRegime.NU_ZERO
        assert scan_fixed_points(beta22, ks * 1.05).regime == MinimaxRegime.NU_FULL_SURPLUS

    def test_grid_size_floor(self, uniform):
        with pytest.raises(ValueError):
            scan_fixed_points(uniform, 0.1, 50)

    def test_report_round_trip(self, uniform):
        rep = scan_fixed_points(uniform, 0.05, 120)
        assert MinimaxReport.from_dict(rep.to_dict()) == rep


@pytest.mark.slow
class TestAps:
    def test_collapses_to_point_above_k_star(self, uniform):
        res = aps_iterate(uniform, 0.1, resolution=60)
        pts = res.points()
        assert len(pts) == 1
        sb = surplus_bounds(uniform, 0.1)
        np.testing.assert_allclose(pts[0], [sb.full_surplus, sb.autarky], atol=1e-12)
        assert res.monotone

    def test_keeps_triangle_below_k_star(self, uniform):
        res = aps_iterate(uniform, 0.02, resolution=60)
        assert res.occupancy.sum() == 60 * 61 // 2
        assert hausdorff_cells(res, uniform, 0.02) <= 2

    def test_straddle(self, uniform):
        ks = compute_thresholds(uniform).k_star
        lo = aps_iterate(uniform, ks - 0.002, resolution=50)
        hi = aps_iterate(uniform, ks + 0.002, resolution=50)
        assert lo.min_broker_payoff == 0.0
        assert hi.min_broker_payoff == pytest.approx(surplus_bounds(uniform, ks + 0.002).full_surplus)

    def test_csv_shape(self, uniform):
        res = aps_iterate(uniform, 0.1, resolution=50)
        lines = res.occupancy_csv().splitlines()
        assert len(lines) == 51 and len(lines[1].split(",")) == 51

    def test_resolution_floor(self, uniform):
        with pytest.raises(ValueError):
            aps_iterate(uniform, 0.1, resolution=10)


def test_characterization_point_regime(uniform):
    assert characterization_points(uniform, 0.1).shape == (1, 2)
    assert len(characterization_points(uniform, 0.02, 20)) == 210
