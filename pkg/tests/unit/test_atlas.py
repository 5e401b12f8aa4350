"""
Unit tests for the atlas module.
"""

import math
from unittest.mock import MagicMock

import pytest

from carbon_atlas.atlas import CarbonAtlas
from carbon_atlas.intensity import Metric
from carbon_atlas.lp import HighsSolver
from tests.conftest import CASES_DIR, COAL, GAS


@pytest.fixture
def atlas(congested):
    return CarbonAtlas(congested)


class TestCarbonAtlas:
    """Test the CarbonAtlas class on the congested triangle."""

    def test_initialization_from_path(self):
        atlas = CarbonAtlas(CASES_DIR / "case3_congested.m")
        assert len(atlas) == 3
        assert atlas.network.ref_bus == 1

    def test_initialization_from_bundled_name(self):
        atlas = CarbonAtlas("case3_congested")
        assert len(atlas.network.lines) == 3

    def test_missing_case(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            CarbonAtlas(tmp_path / "nowhere.m")

    def test_contains(self, atlas):
        assert 2 in atlas
        assert 9 not in atlas

    def test_dispatch_is_cached(self, atlas):
        assert atlas.dispatch is atlas.dispatch
        assert atlas.dispatch.p_g == pytest.approx({1: 90.0, 2: 60.0})

    def test_system_emissions(self, atlas):
        assert atlas.calculate_system_emissions() == pytest.approx(90 * COAL + 60 * GAS)

    def test_metrics(self, atlas):
        assert atlas.calculate_ace()[3] == pytest.approx(0.81804)
        lmce = atlas.calculate_lmce()
        assert [lmce[bus] for bus in (1, 2, 3)] == pytest.approx([COAL, GAS, 2 * GAS - COAL])
        assert atlas.calculate_almce()[3] == pytest.approx(0.81804)
        assert atlas.calculate_lace()[2] == pytest.approx((60 * GAS + 10 * COAL) / 70)

    def test_bus_intensity(self, atlas):
        values = atlas.bus_intensity("LMCE")
        assert sorted(values) == [1, 2, 3]
        assert values[2] == pytest.approx(GAS)
        with pytest.raises(ValueError, match="Unknown metric"):
            atlas.bus_intensity("marginal")

    def test_account(self, atlas):
        report = atlas.account(Metric.ACE)
        assert report.system_total == pytest.approx(122.706)
        assert report.accounting_gap == pytest.approx(0.0, abs=1e-9)
        marginal = atlas.account("lmce")
        assert marginal.system_total == pytest.approx(150 * (2 * GAS - COAL))
        assert marginal.accounting_gap < 0

    def test_with_datacenters(self, atlas):
        shifted = atlas.with_datacenters([2], 50.0)
        assert shifted is not atlas
        assert list(shifted.network.datacenter_buses()) == [2]
        assert shifted.network.total_load() == pytest.approx(200.0)
        assert atlas.network.total_load() == pytest.approx(150.0)

    def test_get_stats(self, atlas):
        stats = atlas.get_stats()
        assert stats["buses"] == 3
        assert stats["lines"] == 3
        assert stats["limited_lines"] == 1
        assert stats["generators"] == 2
        assert stats["total_load"] == pytest.approx(150.0)
        assert stats["datacenter_buses"] == []
        assert stats["total_cost"] == pytest.approx(2700.0)
        assert stats["system_emissions"] == pytest.approx(122.706)
        assert set(stats["metrics"]) == {"ace", "lmce", "almce", "lace"}
        lmce = stats["metrics"]["lmce"]
        assert lmce["min"] == pytest.approx(2 * GAS - COAL)
        assert lmce["max"] == pytest.approx(COAL)
        assert lmce["not_available"] == 0

    def test_custom_solver(self, congested):
        atlas = CarbonAtlas(congested, solver=HighsSolver())
        assert atlas.dispatch.objective == pytest.approx(2700.0)

    def test_stats_with_unavailable_metric(self, atlas):
        vector = MagicMock()
        vector.values = {1: math.nan, 2: math.nan, 3: math.nan}
        vector.unavailable = (1, 2, 3)
        bundle = MagicMock()
        bundle.items.return_value = [(Metric.LMCE, vector)]
        atlas._bundle = bundle
        stats = atlas.get_stats()
        assert stats["metrics"]["lmce"] == {
            "min": None,
            "max": None,
            "mean": None,
            "not_available": 3,
        }
