"""
Tests for the DC optimal power flow.
"""

import pytest

from carbon_atlas.dcopf import (
    FORWARD,
    DispatchError,
    InfeasibleDispatchError,
    build_dcopf,
    solve_dcopf,
    total_emissions,
)
from carbon_atlas.grid import Generator, Load
from carbon_atlas.lp import HighsSolver, Relation
from tests.conftest import COAL


class TestBuildDcopf:
    def test_columns_and_rows(self, congested):
        problem, index_map = build_dcopf(congested)
        assert problem.column_ids == (
            "theta:1",
            "theta:2",
            "theta:3",
            "p:1",
            "p:2",
            "c:1",
            "c:2",
        )
        row_ids = [row.id for row in problem.rows]
        assert row_ids == [
            "balance:1",
            "balance:2",
            "balance:3",
            "ref",
            "flow_max:1",
            "flow_min:1",
            "cost:1:0",
            "cost:2:0",
        ]
        assert index_map.n_columns == 7
        assert index_map.flow_rows[(1, FORWARD)] == "flow_max:1"
        assert problem.rows[problem.row_index("balance:3")].rhs == 150.0
        assert problem.rows[problem.row_index("flow_min:1")].relation is Relation.GE

    def test_unlimited_lines_have_no_rows(self, uncongested):
        problem, index_map = build_dcopf(uncongested)
        assert index_map.flow_rows == {}
        assert problem.m == 3 + 1 + 2

    def test_generator_bounds(self, uncongested):
        problem, index_map = build_dcopf(uncongested)
        col = index_map.p_g[2]
        assert problem.lower[col] == 0.0
        assert problem.upper[col] == 100.0

    def test_costless_generator_rejected(self, uncongested):
        broken = Generator(
            id=1, bus=1, p_min=0.0, p_max=300.0, cost_points=((0.0, 0.0),), emission_intensity=COAL
        )
        network = uncongested.replace(generators=(broken, uncongested.generator(2)))
        with pytest.raises(ValueError, match="no segments"):
            build_dcopf(network)


class TestSolveDcopf:
    def test_uncongested(self, uncongested):
        dispatch = solve_dcopf(uncongested)
        assert dispatch.p_g[1] == pytest.approx(50.0)
        assert dispatch.p_g[2] == pytest.approx(100.0)
        assert dispatch.objective == pytest.approx(1000.0)
        assert dispatch.flows == pytest.approx((-50.0 / 3, 200.0 / 3, 250.0 / 3))
        assert dispatch.theta[1] == pytest.approx(0.0, abs=1e-12)
        assert dispatch.active.flows == frozenset()
        assert dispatch.active.gen_bounds == {(2, "max")}
        assert not dispatch.degenerate

    def test_congested(self, congested):
        dispatch = solve_dcopf(congested)
        assert dispatch.p_g[1] == pytest.approx(90.0)
        assert dispatch.p_g[2] == pytest.approx(60.0)
        assert dispatch.objective == pytest.approx(2700.0)
        assert dispatch.flows == pytest.approx((10.0, 80.0, 70.0))
        assert dispatch.active.flows == {(1, FORWARD)}
        assert dispatch.active.gen_bounds == frozenset()
        assert dispatch.active.segments == {(1, 0), (2, 0)}
        assert not dispatch.degenerate

    def test_cost_epigraph_tight(self, congested):
        dispatch = solve_dcopf(congested)
        assert dispatch.c_g[1] == pytest.approx(900.0)
        assert dispatch.c_g[2] == pytest.approx(1800.0)

    def test_case5_balances(self, case5):
        dispatch = solve_dcopf(case5)
        assert sum(dispatch.p_g.values()) == pytest.approx(1000.0)
        for line, flow in zip(case5.lines, dispatch.flows):
            assert abs(flow) <= line.flow_limit + 1e-6

    def test_matches_highs(self, case5, congested):
        for network in (case5, congested):
            simplex = solve_dcopf(network)
            highs = solve_dcopf(network, solver=HighsSolver())
            assert highs.objective == pytest.approx(simplex.objective, rel=1e-7)

    def test_warm_start_gives_same_dispatch(self, congested):
        cold = solve_dcopf(congested)
        heavier = congested.with_bus_load_delta(3, 5.0)
        warm = solve_dcopf(heavier, hint=cold)
        fresh = solve_dcopf(heavier)
        for gen_id, p in fresh.p_g.items():
            assert warm.p_g[gen_id] == pytest.approx(p, abs=1e-9)
        assert warm.objective == pytest.approx(fresh.objective, abs=1e-9)

    def test_repeated_hour_needs_no_pivots(self, congested):
        cold = solve_dcopf(congested)
        warm = solve_dcopf(congested, hint=cold)
        assert warm.lp_solution.iterations == 0
        assert warm.p_g == cold.p_g
        assert warm.objective == cold.objective

    def test_infeasible(self, uncongested):
        overloaded = uncongested.with_loads((Load(id=3, bus=3, p=1000.0),))
        with pytest.raises(InfeasibleDispatchError, match="1000 MW"):
            solve_dcopf(overloaded)
        assert issubclass(InfeasibleDispatchError, DispatchError)

    def test_degenerate_flag(self, single_bus_tie):
        assert solve_dcopf(single_bus_tie).degenerate
        assert not solve_dcopf(single_bus_tie, check_degeneracy=False).degenerate


class TestTotalEmissions:
    def test_uncongested(self, uncongested):
        assert total_emissions(uncongested, solve_dcopf(uncongested)) == pytest.approx(48.03)

    def test_congested(self, congested):
        assert total_emissions(congested, solve_dcopf(congested)) == pytest.approx(122.706)
