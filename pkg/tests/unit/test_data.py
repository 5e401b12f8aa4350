"""
Unit tests for the data module.
"""

import logging
import math
from pathlib import Path

import numpy as np
import pytest

from carbon_atlas import data as carbon_atlas_data
from carbon_atlas.data import (
    CaseParseError,
    SeriesParseError,
    get_data_dir,
    load_case,
    load_timeseries,
    parse_case,
    parse_timeseries,
    resolve_case_path,
    serialize_case,
)
from tests.conftest import CASES_DIR, COAL, GAS

MINIMAL_CASE = """function mpc = tiny
mpc.baseMVA = 100;
mpc.bus = [
\t1\t3\t0;
\t2\t1\t50;
];
mpc.gen = [
\t1\t0\t0\t0\t0\t1\t100\t1\t100\t0;
];
mpc.branch = [
\t1\t2\t0\t0.1\t0\t0\t0\t0\t0\t0\t1;
];
mpc.gencost = [
\t2\t0\t0\t2\t25\t0;
];
mpc.emissions = [0.5];
"""


def _replace(text, old, new):
    assert old in text
    return text.replace(old, new)


# ---- Data directory discovery ----


def test_get_data_dir_explicit(tmp_path):
    (tmp_path / "cases").mkdir()
    assert get_data_dir(tmp_path) == tmp_path
    with pytest.raises(FileNotFoundError):
        get_data_dir(tmp_path / "nonexistent")


def test_get_data_dir_prefers_cwd(tmp_path, monkeypatch):
    (tmp_path / "data" / "cases").mkdir(parents=True)
    monkeypatch.chdir(tmp_path)
    assert get_data_dir() == tmp_path / "data"


def test_get_data_dir_falls_back_to_package(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    package_data = Path(carbon_atlas_data.__file__).parent.parent / "data"
    assert get_data_dir() == package_data


def test_resolve_bundled_case_by_name(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert resolve_case_path("case3_congested").name == "case3_congested.m"
    assert resolve_case_path("demo2bus.m").name == "demo2bus.m"
    with pytest.raises(FileNotFoundError, match="no_such_case"):
        resolve_case_path("no_such_case")


# ---- Case parsing ----


class TestParseCase:
    def test_uncongested_case(self, uncongested):
        assert uncongested.base_mva == 100.0
        assert uncongested.bus_ids == (1, 2, 3)
        assert uncongested.ref_bus.id == 1
        assert [gen.emission_intensity for gen in uncongested.generators] == [COAL, 0.0]
        assert all(math.isinf(line.flow_limit) for line in uncongested.lines)
        assert [(load.id, load.bus, load.p) for load in uncongested.loads] == [(3, 3, 150.0)]

    def test_polynomial_cost_becomes_two_points(self, uncongested):
        coal = uncongested.generator(1)
        assert coal.cost_points == ((0.0, 0.0), (300.0, 6000.0))
        assert coal.segments() == ((20.0, 0.0),)

    def test_rate_a_becomes_flow_limit(self, congested):
        assert [line.is_limited for line in congested.lines] == [False, True, False]
        assert congested.lines[1].flow_limit == 80.0

    def test_extensions(self, demo, case5):
        assert [bus.name for bus in demo.buses] == ["generation", "datacenter"]
        assert demo.datacenter_buses() == (2,)
        assert demo.generator(3).cost_points == ((0.0, 0.0), (300.0, 9000.0))
        assert demo.generator(3).emission_intensity == GAS
        assert case5.ref_bus.id == 4
        assert case5.bus_geo[5] == (0.5, -1.0)
        assert case5.total_load() == pytest.approx(1000.0)

    def test_minimal_case(self):
        network = parse_case(MINIMAL_CASE)
        assert network.total_load() == 50.0
        assert network.generator(1).segments() == ((25.0, 0.0),)

    def test_missing_emissions(self):
        text = _replace(MINIMAL_CASE, "mpc.emissions = [0.5];\n", "")
        with pytest.raises(CaseParseError, match="mpc.emissions"):
            parse_case(text)

    def test_emissions_length_mismatch(self):
        text = _replace(MINIMAL_CASE, "[0.5]", "[0.5; 0.2]")
        with pytest.raises(CaseParseError, match="2 entries"):
            parse_case(text)

    def test_invalid_number_has_location(self):
        text = _replace(MINIMAL_CASE, "\t2\t1\t50;", "\t2\t1\tabc;")
        with pytest.raises(CaseParseError) as excinfo:
            parse_case(text)
        assert excinfo.value.line == 5
        assert "line 5" in str(excinfo.value)
        assert "abc" in str(excinfo.value)

    def test_ragged_row(self):
        text = _replace(MINIMAL_CASE, "\t2\t1\t50;", "\t2\t1;")
        with pytest.raises(CaseParseError, match="columns"):
            parse_case(text)

    def test_unterminated_matrix(self):
        text = _replace(MINIMAL_CASE, "];\nmpc.gen", "mpc.gen")
        with pytest.raises(CaseParseError):
            parse_case(text)

    def test_unknown_bus_reference(self):
        text = _replace(MINIMAL_CASE, "\t1\t2\t0\t0.1", "\t1\t9\t0\t0.1")
        with pytest.raises(CaseParseError, match="unknown bus 9"):
            parse_case(text)

    def test_missing_reference_bus(self):
        text = _replace(MINIMAL_CASE, "\t1\t3\t0;", "\t1\t1\t0;")
        with pytest.raises(CaseParseError, match="reference bus"):
            parse_case(text)

    def test_quadratic_cost_rejected(self):
        text = _replace(MINIMAL_CASE, "\t2\t0\t0\t2\t25\t0;", "\t2\t0\t0\t3\t0.1\t25\t0;")
        with pytest.raises(CaseParseError, match="degree 2"):
            parse_case(text)

    def test_nonconvex_pw_cost_rejected(self):
        text = _replace(
            MINIMAL_CASE,
            "\t2\t0\t0\t2\t25\t0;",
            "\t1\t0\t0\t3\t0\t0\t50\t2000\t100\t2500;",
        )
        with pytest.raises(CaseParseError, match="not convex"):
            parse_case(text)

    def test_out_of_service_generator_dropped(self):
        text = _replace(
            MINIMAL_CASE,
            "mpc.gen = [\n",
            "mpc.gen = [\n\t2\t0\t0\t0\t0\t1\t100\t0\t100\t0;\n",
        )
        text = _replace(text, "mpc.gencost = [\n", "mpc.gencost = [\n\t2\t0\t0\t2\t5\t0;\n")
        text = _replace(text, "[0.5]", "[0.1; 0.5]")
        network = parse_case(text)
        # ids are mpc.gen row numbers, so the survivor keeps id 2
        assert [gen.id for gen in network.generators] == [2]

    def test_isolated_bus_dropped(self, caplog):
        text = _replace(MINIMAL_CASE, "\t2\t1\t50;\n", "\t2\t1\t50;\n\t3\t4\t0;\n")
        with caplog.at_level(logging.WARNING, logger="carbon_atlas.data"):
            network = parse_case(text)
        assert network.bus_ids == (1, 2)
        assert "isolated bus 3" in caplog.text

    def test_unknown_field_warns(self, caplog):
        text = MINIMAL_CASE + "mpc.areas = [1 1];\n"
        with caplog.at_level(logging.WARNING, logger="carbon_atlas.data"):
            parse_case(text)
        assert "mpc.areas" in caplog.text

    def test_capacity_screen(self):
        text = _replace(MINIMAL_CASE, "\t2\t1\t50;", "\t2\t1\t500;")
        with pytest.raises(CaseParseError, match="generation range"):
            parse_case(text)

    def test_load_case_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_case(tmp_path / "missing.m")


class TestSerializeCase:
    @pytest.mark.parametrize(
        "name",
        ["case3_uncongested.m", "case3_congested.m", "case5_gen_intensity.m", "demo2bus.m"],
    )
    def test_bundled_cases_survive_round_trip(self, name):
        network = load_case(CASES_DIR / name)
        again = parse_case(serialize_case(network))
        assert again == network

    def test_serialization_is_canonical(self, demo):
        text = serialize_case(demo)
        assert serialize_case(parse_case(text)) == text
        assert "mpc.load = [" in text
        assert "mpc.emissions = [" in text


# ---- Time series ----


class TestParseTimeseries:
    def test_demo_series(self, demo_series):
        assert demo_series.timesteps == 2
        assert demo_series.gen_ids == (1, 2)
        np.testing.assert_array_equal(demo_series.gen_pmax, [[300.0, 300.0], [0.0, 100.0]])
        assert demo_series.load_ids == ()

    def test_load_columns(self, uncongested):
        series = parse_timeseries("t,load:3\n1,1.0\n2,0.5\n", uncongested)
        assert series.load_ids == (3,)
        np.testing.assert_array_equal(series.load_multipliers, [[1.0], [0.5]])

    def test_unknown_load_id(self, uncongested):
        with pytest.raises(SeriesParseError, match="Unknown load id 7"):
            parse_timeseries("t,load:7\n1,1.0\n", uncongested)

    def test_unknown_generator_id(self, uncongested):
        with pytest.raises(SeriesParseError, match="Unknown generator id 5"):
            parse_timeseries("t,gen_pmax:5\n1,10\n", uncongested)

    @pytest.mark.parametrize(
        "text, message",
        [
            ("", "empty"),
            ("step,load:3\n1,1.0\n", "'t'"),
            ("t,load:3\n", "no data rows"),
            ("t,load:3\n1,\n", "missing value"),
            ("t,load:3\n1,abc\n", "non-numeric"),
            ("t,load:3\n1,-1\n", "negative"),
            ("t,load:3\n1,1\n3,1\n", "without gaps"),
            ("t,wind:3\n1,1\n", "Malformed column"),
            ("t,load:3,load:03\n1,1,1\n", "Duplicate"),
        ],
    )
    def test_malformed_series(self, uncongested, text, message):
        with pytest.raises(SeriesParseError, match=message):
            parse_timeseries(text, uncongested)

    def test_load_timeseries_missing_file(self, uncongested, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_timeseries(tmp_path / "missing.csv", uncongested)

    def test_constant_series_file(self, uncongested):
        series = load_timeseries(CASES_DIR / "case3_constant.csv", uncongested)
        assert series.timesteps == 2
