"""
Linear sensitivity of an optimal dispatch to nodal demand.

Around a non-degenerate DCOPF optimum the equality and binding inequality
rows form a square system ``A x = b``. The first N columns of ``A^-1``
restricted to the p_g rows give the generation-shift matrix B, and the
locational marginal carbon emissions are ``B^T e``.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve, qr

from carbon_atlas.dcopf import (
    FORWARD,
    DispatchError,
    DispatchResult,
    solve_dcopf,
    total_emissions,
)
from carbon_atlas.grid import Network
from carbon_atlas.intensity import IntensityVector, Metric

logger = logging.getLogger(__name__)

RANK_TOL = 1e-9
FD_DELTA = 1e-3


class DegenerateSystemError(ValueError):
    """The sensitivity system is non-square or rank deficient."""


@dataclass(frozen=True, eq=False)
class SensitivitySystem:
    """Equality plus binding-inequality rows of an optimal dispatch.

    Rows are ordered: balance rows by bus id, the reference row, binding
    flow limits by (line index, forward before reverse), binding generator
    bounds by (gen id, min before max), binding cost segments by
    (gen id, segment). ``provenance`` labels each row.
    """

    A: np.ndarray
    provenance: Tuple[str, ...]
    n: int
    n_buses: int
    n_generators: int
    bus_ids: Tuple[int, ...]
    gen_ids: Tuple[int, ...]
    rank: int
    degenerate: bool


@dataclass(frozen=True, eq=False)
class GenerationShiftMatrix:
    """B maps a demand change per bus to a set-point change per generator."""

    B: np.ndarray
    gen_ids: Tuple[int, ...]
    bus_ids: Tuple[int, ...]

    def column(self, bus_id: int) -> Dict[int, float]:
        j = self.bus_ids.index(bus_id)
        return {gen_id: float(v) for gen_id, v in zip(self.gen_ids, self.B[:, j])}

    def column_sums(self) -> np.ndarray:
        return self.B.sum(axis=0)


def numerical_rank(a: np.ndarray, rank_tol: float = RANK_TOL) -> int:
    """Rank from a column-pivoted QR, relative to the largest pivot."""
    if a.size == 0:
        return 0
    r = qr(a, mode="r", pivoting=True)[0]
    pivots = np.abs(np.diag(r))
    if pivots.size == 0 or pivots[0] == 0:
        return 0
    return int(np.sum(pivots > rank_tol * pivots[0]))


def build_sensitivity_system(network: Network, dispatch: DispatchResult) -> SensitivitySystem:
    """Assemble the sensitivity rows of ``dispatch``. Never raises on degeneracy."""
    problem, index_map = dispatch.problem, dispatch.index_map
    full = problem.matrix()
    position = {row.id: i for i, row in enumerate(problem.rows)}

    rows, labels = [], []

    def take(row_id: str) -> None:
        rows.append(full[position[row_id]])
        labels.append(row_id)

    for bus in network.buses:
        take(index_map.balance_rows[bus.id])
    take(index_map.ref_row)

    for line_index, direction in sorted(
        dispatch.active.flows, key=lambda key: (key[0], key[1] != FORWARD)
    ):
        take(index_map.flow_rows[(line_index, direction)])

    bounds = sorted(dispatch.active.gen_bounds, key=lambda key: (key[0], key[1] != "min"))
    seen = set()
    for gen_id, side in bounds:
        if gen_id in seen:
            # p_min == p_max: both bounds bind but describe one row
            continue
        seen.add(gen_id)
        unit = np.zeros(problem.n)
        unit[index_map.p_g[gen_id]] = 1.0
        rows.append(unit)
        labels.append(f"gen_{side}:{gen_id}")

    for key in sorted(dispatch.active.segments):
        take(index_map.segment_rows[key])

    n = problem.n
    a = np.array(rows, dtype=float).reshape(len(rows), n)
    rank = numerical_rank(a)
    degenerate = a.shape[0] != n or rank < n
    if degenerate:
        logger.debug("Sensitivity system is degenerate: %d rows, rank %d, n %d", a.shape[0], rank, n)
    return SensitivitySystem(
        A=a,
        provenance=tuple(labels),
        n=n,
        n_buses=len(network.buses),
        n_generators=len(network.generators),
        bus_ids=network.bus_ids,
        gen_ids=tuple(gen.id for gen in network.generators),
        rank=rank,
        degenerate=degenerate,
    )


def generation_shift_matrix(system: SensitivitySystem) -> GenerationShiftMatrix:
    """Extract B from the first N columns of ``A^-1`` (the p_g rows).

    Raises:
        DegenerateSystemError: If the system is degenerate; use
            :func:`lmce_finite_difference` instead.
    """
    if system.degenerate:
        raise DegenerateSystemError(
            f"Sensitivity system is degenerate ({system.A.shape[0]} rows, rank "
            f"{system.rank}, {system.n} columns); use lmce_finite_difference."
        )
    n_bus, n_gen = system.n_buses, system.n_generators
    rhs = np.eye(system.n)[:, :n_bus]
    solved = lu_solve(lu_factor(system.A), rhs)
    return GenerationShiftMatrix(
        B=solved[n_bus : n_bus + n_gen, :],
        gen_ids=system.gen_ids,
        bus_ids=system.bus_ids,
    )


def lmce_finite_difference(
    network: Network,
    bus: int,
    delta: float = FD_DELTA,
    base: Optional[DispatchResult] = None,
) -> float:
    """Emission change per MW of extra demand at ``bus``, by two full solves.

    Raises:
        InfeasibleDispatchError: If the perturbed network cannot be served
    """
    if base is None:
        base = solve_dcopf(network, check_degeneracy=False)
    perturbed_network = network.with_bus_load_delta(bus, delta)
    perturbed = solve_dcopf(perturbed_network, check_degeneracy=False)
    return (total_emissions(perturbed_network, perturbed) - total_emissions(network, base)) / delta


def _fallback_value(network: Network, bus: int, base: DispatchResult, delta: float) -> float:
    for step in (delta, -delta):
        try:
            return lmce_finite_difference(network, bus, step, base)
        except DispatchError as e:
            logger.debug("Finite difference at bus %d with delta %g failed: %s", bus, step, e)
    return math.nan


def lmce(
    network: Network,
    dispatch: DispatchResult,
    t: int = 0,
    system: Optional[SensitivitySystem] = None,
) -> IntensityVector:
    """Locational marginal carbon emissions at every bus.

    Degenerate dispatches fall back to per-bus finite differences (+delta,
    then -delta); buses where both perturbed solves fail are reported as
    not available (NaN) and listed in the metadata.
    """
    if system is None:
        system = dispatch.sensitivity
    if system is None:
        system = build_sensitivity_system(network, dispatch)
    intensities = np.array([gen.emission_intensity for gen in network.generators])

    if not system.degenerate:
        shift = generation_shift_matrix(system)
        values = shift.B.T @ intensities if intensities.size else np.zeros(len(shift.bus_ids))
        return IntensityVector(
            metric=Metric.LMCE,
            t=t,
            values={bus: float(v) for bus, v in zip(shift.bus_ids, values)},
            metadata={"method": "sensitivity"},
        )

    logger.warning(
        "Timestep %d: degenerate dispatch, LMCE by finite differences (delta %g MW)",
        t,
        FD_DELTA,
    )
    values = {bus.id: _fallback_value(network, bus.id, dispatch, FD_DELTA) for bus in network.buses}
    return IntensityVector(
        metric=Metric.LMCE,
        t=t,
        values=values,
        metadata={
            "method": "finite_difference",
            "delta": FD_DELTA,
            "not_available": [bus for bus, v in values.items() if math.isnan(v)],
        },
    )


__all__ = [
    "RANK_TOL",
    "FD_DELTA",
    "DegenerateSystemError",
    "SensitivitySystem",
    "GenerationShiftMatrix",
    "numerical_rank",
    "build_sensitivity_system",
    "generation_shift_matrix",
    "lmce",
    "lmce_finite_difference",
]
