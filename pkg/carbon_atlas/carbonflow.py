"""
Carbon-flow tracing under the proportional sharing rule.

Power entering a bus (over lines or from local generators) mixes into one
pool; every outgoing line and every local load carries that pool's
intensity. The nodal intensities solve one linear system, so loop flows
need no special treatment.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, Mapping, Tuple

import numpy as np

from carbon_atlas.dcopf import DispatchError, DispatchResult
from carbon_atlas.grid import Network
from carbon_atlas.intensity import IntensityVector, Metric
from carbon_atlas.lp import FEAS_TOL

logger = logging.getLogger(__name__)

FLOW_EPS = 1e-9


class FlowBalanceError(DispatchError):
    """A dispatch does not balance at some bus, or its mix cannot be solved."""


@dataclass(frozen=True)
class FlowGraph:
    """Directed power flows of one dispatch.

    ``arcs`` are (from bus, to bus, MW) with positive MW; ``generation``
    maps a bus to its (gen id, MW, tCO2/MWh) injections and
    ``withdrawals`` maps a bus to its load in MW.
    """

    bus_ids: Tuple[int, ...]
    arcs: Tuple[Tuple[int, int, float], ...]
    generation: Mapping[int, Tuple[Tuple[int, float, float], ...]]
    withdrawals: Mapping[int, float]

    def inflow(self, bus_id: int) -> float:
        return math.fsum(flow for _, to_bus, flow in self.arcs if to_bus == bus_id)

    def outflow(self, bus_id: int) -> float:
        return math.fsum(flow for from_bus, _, flow in self.arcs if from_bus == bus_id)

    def injection(self, bus_id: int) -> float:
        return math.fsum(p for _, p, _ in self.generation.get(bus_id, ()))


@dataclass(frozen=True)
class NodalMix:
    """Per-bus intensity of the mixed power pool (tCO2/MWh)."""

    rho: Mapping[int, float]
    zero_inflow: FrozenSet[int]


def build_flow_graph(network: Network, dispatch: DispatchResult) -> FlowGraph:
    """Orient every line along its flow and attach injections and loads.

    Raises:
        FlowBalanceError: If some bus does not balance within tolerance
    """
    arcs = []
    for line, flow in zip(network.lines, dispatch.flows):
        if flow > FLOW_EPS:
            arcs.append((line.from_bus, line.to_bus, flow))
        elif flow < -FLOW_EPS:
            arcs.append((line.to_bus, line.from_bus, -flow))

    generation: Dict[int, list] = {}
    for gen in network.generators:
        p = dispatch.p_g[gen.id]
        if p > FLOW_EPS:
            generation.setdefault(gen.bus, []).append((gen.id, p, gen.emission_intensity))

    graph = FlowGraph(
        bus_ids=network.bus_ids,
        arcs=tuple(arcs),
        generation={bus: tuple(items) for bus, items in sorted(generation.items())},
        withdrawals=network.bus_load(),
    )

    tolerance = FEAS_TOL * max(1.0, network.total_load())
    for bus_id in graph.bus_ids:
        residual = (
            graph.inflow(bus_id)
            + graph.injection(bus_id)
            - graph.outflow(bus_id)
            - graph.withdrawals[bus_id]
        )
        # dropped sub-FLOW_EPS arcs and generators may leave that much behind
        if abs(residual) > tolerance + FLOW_EPS * (len(network.lines) + len(network.generators)):
            raise FlowBalanceError(f"Bus {bus_id} does not balance (residual {residual:.3g} MW).")
    return graph


def nodal_mix(graph: FlowGraph) -> NodalMix:
    """Solve ``T_i rho_i - sum_j F_ji rho_j = sum_g p_g e_g`` for every bus.

    ``T_i`` is the total power entering bus i. Buses with no inflow get
    rho = 0 and are reported in ``zero_inflow``.

    Raises:
        FlowBalanceError: If the system is singular
    """
    index = {bus_id: i for i, bus_id in enumerate(graph.bus_ids)}
    size = len(index)
    k = np.zeros((size, size))
    rhs = np.zeros(size)
    for bus_id, items in graph.generation.items():
        i = index[bus_id]
        for _, p, intensity in items:
            k[i, i] += p
            rhs[i] += p * intensity
    for from_bus, to_bus, flow in graph.arcs:
        i, j = index[to_bus], index[from_bus]
        k[i, i] += flow
        k[i, j] -= flow

    zero_inflow = set()
    for bus_id, i in index.items():
        if k[i, i] <= FLOW_EPS:
            zero_inflow.add(bus_id)
            k[i, :] = 0.0
            k[i, i] = 1.0
            rhs[i] = 0.0

    try:
        rho = np.linalg.solve(k, rhs) if size else np.zeros(0)
    except np.linalg.LinAlgError as e:
        raise FlowBalanceError(f"Carbon-flow system is singular: {e}") from e
    return NodalMix(
        rho={bus_id: float(rho[i]) for bus_id, i in index.items()},
        zero_inflow=frozenset(zero_inflow),
    )


def lace(network: Network, dispatch: DispatchResult, t: int = 0) -> IntensityVector:
    """Locational average carbon emissions from carbon-flow tracing."""
    mix = nodal_mix(build_flow_graph(network, dispatch))
    if mix.zero_inflow:
        logger.debug("Timestep %d: buses without inflow %s", t, sorted(mix.zero_inflow))
    return IntensityVector(
        metric=Metric.LACE,
        t=t,
        values=mix.rho,
        metadata={"zero_inflow": sorted(mix.zero_inflow)},
    )


__all__ = [
    "FLOW_EPS",
    "FlowBalanceError",
    "FlowGraph",
    "NodalMix",
    "build_flow_graph",
    "nodal_mix",
    "lace",
]
