"""
Piecewise-linear-cost DC optimal power flow.

Columns are ordered ``[theta by bus id | p_g by gen id | C_g by gen id]``.
Rows are the nodal balances (bus order), the reference-angle equality,
two rows per limited line and one epigraph row per cost segment.
Generator limits are variable bounds.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, FrozenSet, Mapping, Optional, Tuple

import numpy as np

from carbon_atlas.grid import Network
from carbon_atlas.lp import (
    LpProblem,
    LpRow,
    LpSolution,
    LpSolver,
    LpStatus,
    Relation,
    solve_lp,
    solve_lp_warm,
)

if TYPE_CHECKING:
    from carbon_atlas.sensitivity import SensitivitySystem

logger = logging.getLogger(__name__)

FORWARD, REVERSE = "forward", "reverse"


class DispatchError(RuntimeError):
    """The dispatch LP could not be solved."""


class InfeasibleDispatchError(DispatchError):
    """Load cannot be served within generator and line limits."""


class UnboundedDispatchError(DispatchError):
    """The dispatch LP has no finite optimum."""


@dataclass(frozen=True)
class VariableIndexMap:
    """Where each DCOPF quantity lives in the LP."""

    theta: Mapping[int, int]
    p_g: Mapping[int, int]
    c_g: Mapping[int, int]
    balance_rows: Mapping[int, str]
    ref_row: str
    flow_rows: Mapping[Tuple[int, str], str]
    segment_rows: Mapping[Tuple[int, int], str]

    @property
    def n_columns(self) -> int:
        return len(self.theta) + len(self.p_g) + len(self.c_g)


@dataclass(frozen=True)
class ActiveSet:
    """Binding inequalities of an optimal dispatch.

    ``flows`` holds (line index, direction) with the index into
    ``Network.lines``; ``gen_bounds`` holds (gen id, "min" | "max");
    ``segments`` holds (gen id, segment index).
    """

    flows: FrozenSet[Tuple[int, str]] = frozenset()
    gen_bounds: FrozenSet[Tuple[int, str]] = frozenset()
    segments: FrozenSet[Tuple[int, int]] = frozenset()


@dataclass(frozen=True, eq=False)
class DispatchResult:
    """An optimal dispatch.

    ``sensitivity`` holds the rows built for the degeneracy check, reused
    by the LMCE computation; it is None when the check was skipped.
    """

    theta: Dict[int, float]
    p_g: Dict[int, float]
    c_g: Dict[int, float]
    flows: Tuple[float, ...]
    objective: float
    active: ActiveSet
    degenerate: bool
    problem: LpProblem
    lp_solution: LpSolution
    index_map: VariableIndexMap
    sensitivity: Optional["SensitivitySystem"] = None


def build_dcopf(network: Network) -> Tuple[LpProblem, VariableIndexMap]:
    """Formulate the DCOPF of ``network`` as an LpProblem.

    Raises:
        ValueError: If a generator's cost has no segments.
    """
    for gen in network.generators:
        if len(gen.cost_points) < 2:
            raise ValueError(f"Generator {gen.id} cost has no segments.")

    buses, gens = network.buses, network.generators
    n_bus, n_gen = len(buses), len(gens)
    theta = {bus.id: i for i, bus in enumerate(buses)}
    p_col = {gen.id: n_bus + k for k, gen in enumerate(gens)}
    c_col = {gen.id: n_bus + n_gen + k for k, gen in enumerate(gens)}

    column_ids = (
        [f"theta:{bus.id}" for bus in buses]
        + [f"p:{gen.id}" for gen in gens]
        + [f"c:{gen.id}" for gen in gens]
    )
    c = np.zeros(len(column_ids))
    c[n_bus + n_gen :] = 1.0
    lower = np.full(len(column_ids), -math.inf)
    upper = np.full(len(column_ids), math.inf)
    for gen in gens:
        lower[p_col[gen.id]] = gen.p_min
        upper[p_col[gen.id]] = gen.p_max

    # Nodal balance: sum(p_g) - sum(flow out) = demand
    balance: Dict[int, Dict[int, float]] = {bus.id: {} for bus in buses}
    for gen in gens:
        balance[gen.bus][p_col[gen.id]] = balance[gen.bus].get(p_col[gen.id], 0.0) + 1.0
    for line in network.lines:
        b = network.base_mva * line.susceptance
        f, t = theta[line.from_bus], theta[line.to_bus]
        for bus_id, sign in ((line.from_bus, -1.0), (line.to_bus, 1.0)):
            coeffs = balance[bus_id]
            coeffs[f] = coeffs.get(f, 0.0) + sign * b
            coeffs[t] = coeffs.get(t, 0.0) - sign * b

    demand = network.bus_load()
    rows = []
    balance_rows = {}
    for bus in buses:
        row_id = f"balance:{bus.id}"
        balance_rows[bus.id] = row_id
        coeffs = tuple(sorted(balance[bus.id].items()))
        rows.append(LpRow(row_id, coeffs, Relation.EQ, demand[bus.id]))

    ref_row = "ref"
    rows.append(LpRow(ref_row, ((theta[network.ref_bus.id], 1.0),), Relation.EQ, 0.0))

    flow_rows = {}
    for index, line in enumerate(network.lines):
        if not line.is_limited:
            continue
        b = network.base_mva * line.susceptance
        coeffs = ((theta[line.from_bus], b), (theta[line.to_bus], -b))
        if coeffs[1][0] < coeffs[0][0]:
            coeffs = (coeffs[1], coeffs[0])
        flow_rows[(index, FORWARD)] = f"flow_max:{index}"
        flow_rows[(index, REVERSE)] = f"flow_min:{index}"
        rows.append(LpRow(f"flow_max:{index}", coeffs, Relation.LE, line.flow_limit))
        rows.append(LpRow(f"flow_min:{index}", coeffs, Relation.GE, -line.flow_limit))

    # Epigraph: C_g - slope * p_g >= intercept
    segment_rows = {}
    for gen in gens:
        for k, (slope, intercept) in enumerate(gen.segments()):
            row_id = f"cost:{gen.id}:{k}"
            segment_rows[(gen.id, k)] = row_id
            coeffs = ((p_col[gen.id], -slope), (c_col[gen.id], 1.0))
            rows.append(LpRow(row_id, coeffs, Relation.GE, intercept))

    problem = LpProblem(
        column_ids=tuple(column_ids), c=c, rows=tuple(rows), lower=lower, upper=upper
    )
    index_map = VariableIndexMap(
        theta=theta,
        p_g=p_col,
        c_g=c_col,
        balance_rows=balance_rows,
        ref_row=ref_row,
        flow_rows=flow_rows,
        segment_rows=segment_rows,
    )
    return problem, index_map


def _classify(solution: LpSolution, index_map: VariableIndexMap) -> ActiveSet:
    flows = frozenset(
        key for key, row_id in index_map.flow_rows.items() if row_id in solution.active_rows
    )
    segments = frozenset(
        key for key, row_id in index_map.segment_rows.items() if row_id in solution.active_rows
    )
    side = {"lower": "min", "upper": "max"}
    by_column = {col: gen_id for gen_id, col in index_map.p_g.items()}
    gen_bounds = frozenset(
        (by_column[col], side[which])
        for col, which in solution.active_bounds
        if col in by_column
    )
    return ActiveSet(flows=flows, gen_bounds=gen_bounds, segments=segments)


def solve_dcopf(
    network: Network,
    solver: Optional[LpSolver] = None,
    hint: Optional[DispatchResult] = None,
    check_degeneracy: bool = True,
) -> DispatchResult:
    """Dispatch ``network`` at least cost.

    Args:
        network: A validated, connected network
        solver: LP engine; defaults to the bundled simplex
        hint: A previous dispatch of a network with the same shape, used
            to warm-start the LP
        check_degeneracy: Run the sensitivity rank check and set the
            ``degenerate`` flag

    Returns:
        The optimal DispatchResult

    Raises:
        InfeasibleDispatchError: If load cannot be served
        UnboundedDispatchError: If the LP is unbounded
        DispatchError: If the LP solver fails numerically
    """
    problem, index_map = build_dcopf(network)
    if hint is not None and hint.problem.n == problem.n and hint.problem.m == problem.m:
        solution = solve_lp_warm(problem, hint.lp_solution, solver)
    else:
        solution = solve_lp(problem, solver)

    if solution.status is LpStatus.INFEASIBLE:
        raise InfeasibleDispatchError(
            f"Dispatch infeasible: {network.total_load():g} MW of load cannot be served."
        )
    if solution.status is LpStatus.UNBOUNDED:
        raise UnboundedDispatchError("Dispatch LP is unbounded.")
    if solution.status is not LpStatus.OPTIMAL:
        raise DispatchError("Dispatch LP failed (numerically singular basis).")

    x = solution.x
    theta = {bus_id: float(x[col]) for bus_id, col in index_map.theta.items()}
    flows = tuple(
        network.base_mva * line.susceptance * (theta[line.from_bus] - theta[line.to_bus])
        for line in network.lines
    )
    result = DispatchResult(
        theta=theta,
        p_g={gen_id: float(x[col]) for gen_id, col in index_map.p_g.items()},
        c_g={gen_id: float(x[col]) for gen_id, col in index_map.c_g.items()},
        flows=flows,
        objective=solution.objective,
        active=_classify(solution, index_map),
        degenerate=False,
        problem=problem,
        lp_solution=solution,
        index_map=index_map,
    )
    if check_degeneracy:
        # sensitivity imports this module
        from carbon_atlas.sensitivity import build_sensitivity_system

        system = build_sensitivity_system(network, result)
        result = dataclasses.replace(result, degenerate=system.degenerate, sensitivity=system)
    return result


def total_emissions(network: Network, dispatch: DispatchResult) -> float:
    """System emissions in tCO2/h: sum of intensity times set-point."""
    total = math.fsum(
        gen.emission_intensity * dispatch.p_g[gen.id] for gen in network.generators
    )
    return max(total, 0.0)


__all__ = [
    "DispatchError",
    "InfeasibleDispatchError",
    "UnboundedDispatchError",
    "VariableIndexMap",
    "ActiveSet",
    "DispatchResult",
    "build_dcopf",
    "solve_dcopf",
    "total_emissions",
]
