"""
Tests for the SVG figures.
"""

import math

import pytest

from carbon_atlas.plotting import (
    COLOR_RAMP,
    DATACENTER_COLOR,
    MISSING_COLOR,
    bus_layout,
    histogram_svg,
    network_svg,
    ramp_color,
)


class TestRampColor:
    def test_endpoints(self):
        assert ramp_color(0.0, 0.0, 1.0) == COLOR_RAMP[0]
        assert ramp_color(1.0, 0.0, 1.0) == COLOR_RAMP[-1]
        assert ramp_color(0.5, 0.0, 1.0) == COLOR_RAMP[2]

    def test_clamped(self):
        assert ramp_color(-3.0, 0.0, 1.0) == COLOR_RAMP[0]
        assert ramp_color(7.0, 0.0, 1.0) == COLOR_RAMP[-1]

    def test_missing(self):
        assert ramp_color(math.nan, 0.0, 1.0) == MISSING_COLOR

    def test_flat_range_uses_midpoint(self):
        assert ramp_color(0.3, 0.3, 0.3) == COLOR_RAMP[2]


class TestHistogramSvg:
    HISTOGRAM = {
        "edges": [-1.0, 0.0, 1.0, 2.0],
        "counts": [2, 0, 3],
        "mean": 0.4,
        "median": 1.5,
        "p10": -1.0,
        "p90": 2.0,
    }

    def test_bars_for_nonzero_bins(self):
        svg = histogram_svg(self.HISTOGRAM, title="ACE shift")
        assert svg.startswith("<svg")
        assert svg.endswith("</svg>\n")
        assert svg.count('class="bar"') == 2
        assert "ACE shift" in svg
        assert "mean 0.400" in svg

    def test_deterministic(self):
        assert histogram_svg(self.HISTOGRAM) == histogram_svg(dict(self.HISTOGRAM))

    def test_title_is_escaped(self):
        assert "a &lt; b" in histogram_svg(self.HISTOGRAM, title="a < b")

    def test_bad_shape(self):
        with pytest.raises(ValueError, match="one more edge"):
            histogram_svg({"edges": [0.0, 1.0], "counts": [1, 2]})


class TestBusLayout:
    def test_geographic(self, case5):
        layout = bus_layout(case5)
        assert layout[1] == pytest.approx((0.0, 0.5))
        assert layout[3] == pytest.approx((1.0, 0.0))
        assert layout[5] == pytest.approx((0.25, 1.0))

    def test_circle_without_coordinates(self, congested):
        layout = bus_layout(congested)
        assert sorted(layout) == [1, 2, 3]
        for x, y in layout.values():
            assert -1e-9 <= x <= 1 + 1e-9
            assert -1e-9 <= y <= 1 + 1e-9
        assert len(set(layout.values())) == 3


class TestNetworkSvg:
    def test_panels(self, congested):
        panels = {
            "ace": {1: 0.81804, 2: 0.81804, 3: 0.81804},
            "lmce": {1: 0.9606, 2: 0.6042, 3: 0.2478},
        }
        svg = network_svg(congested, panels, title="Congested triangle")
        assert svg.count('class="panel"') == 2
        assert 'id="panel-lmce"' in svg
        assert svg.count('class="bus"') == 6
        assert svg.count('class="gen"') == 4
        assert svg.count('class="legend"') == 1
        assert "bus 3: 0.248" in svg

    def test_missing_value_and_datacenter(self, demo):
        svg = network_svg(demo, {"lmce": {1: 0.6042, 2: math.nan}})
        assert "bus 2: n/a" in svg
        assert MISSING_COLOR in svg
        assert DATACENTER_COLOR in svg

    def test_deterministic(self, case5):
        panels = {"lace": {bus: 0.1 * bus for bus in case5.bus_ids}}
        assert network_svg(case5, panels) == network_svg(case5, panels)

    def test_no_panels(self, congested):
        with pytest.raises(ValueError, match="At least one panel"):
            network_svg(congested, {})
