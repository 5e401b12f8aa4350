"""
Average and adjusted carbon metrics, load-level accounting, and the single
entry point that derives all four metrics from one dispatch.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, Mapping, Optional

from carbon_atlas.carbonflow import lace
from carbon_atlas.dcopf import DispatchResult, solve_dcopf, total_emissions
from carbon_atlas.grid import Network
from carbon_atlas.intensity import IntensityVector, Metric
from carbon_atlas.lp import LpSolver
from carbon_atlas.sensitivity import lmce

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AccountingReport:
    """Emissions assigned to loads by one metric at one timestep (tCO2).

    One dispatch stands for one hour, so MW and MWh coincide. Loads whose
    bus intensity is not available are left out of every total and
    counted in ``unavailable_loads``.
    """

    t: int
    metric: Metric
    per_load: Mapping[int, float]
    per_bus: Mapping[int, float]
    system_total: float
    datacenter_total: float
    non_datacenter_total: float
    true_system_emissions: float
    unavailable_loads: int = 0

    @property
    def accounting_gap(self) -> float:
        """System-accounted minus true emissions."""
        return self.system_total - self.true_system_emissions

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t": self.t,
            "metric": self.metric.value,
            "per_load": {
                str(k): (None if math.isnan(v) else v) for k, v in self.per_load.items()
            },
            "per_bus": {str(k): v for k, v in self.per_bus.items()},
            "system_total": self.system_total,
            "datacenter_total": self.datacenter_total,
            "non_datacenter_total": self.non_datacenter_total,
            "true_system_emissions": self.true_system_emissions,
            "unavailable_loads": self.unavailable_loads,
        }


@dataclass(frozen=True, eq=False)
class MetricBundle:
    """One dispatch and the four intensity vectors derived from it."""

    dispatch: DispatchResult
    vectors: Mapping[Metric, IntensityVector] = field(default_factory=dict)

    def __getitem__(self, metric: Metric) -> IntensityVector:
        return self.vectors[metric]

    def __iter__(self) -> Iterator[Metric]:
        return iter(self.vectors)

    def items(self):
        return self.vectors.items()

    @property
    def lmce_fallback(self) -> bool:
        return self.vectors[Metric.LMCE].metadata.get("method") == "finite_difference"


def _require_load(network: Network, what: str) -> float:
    demand = network.total_load()
    if demand <= 0:
        raise ValueError(f"{what} is undefined for zero total load.")
    return demand


def ace(network: Network, dispatch: DispatchResult, t: int = 0) -> IntensityVector:
    """Average carbon emissions: system emissions over total load, at every bus.

    Raises:
        ValueError: If total load is zero
    """
    demand = _require_load(network, "ACE")
    value = total_emissions(network, dispatch) / demand
    return IntensityVector(
        metric=Metric.ACE, t=t, values={bus_id: value for bus_id in network.bus_ids}
    )


def almce(
    network: Network, dispatch: DispatchResult, lmce_vector: IntensityVector, t: Optional[int] = None
) -> IntensityVector:
    """LMCE shifted by one scalar so accounted emissions match the system total.

    The shift is computed over loads whose LMCE is available; buses without
    an LMCE value stay not available.

    Raises:
        ValueError: If the (available) total load is zero
    """
    _require_load(network, "ALMCE")
    available = [load for load in network.loads if lmce_vector.is_available(load.bus)]
    demand = math.fsum(load.p for load in available)
    if demand <= 0:
        raise ValueError("ALMCE is undefined: no load has an available LMCE value.")
    assigned = math.fsum(lmce_vector[load.bus] * load.p for load in available)
    adjustment = (total_emissions(network, dispatch) - assigned) / demand
    return IntensityVector(
        metric=Metric.ALMCE,
        t=lmce_vector.t if t is None else t,
        values={
            bus_id: value + adjustment if not math.isnan(value) else value
            for bus_id, value in lmce_vector.values.items()
        },
        metadata={**lmce_vector.metadata, "adjustment": adjustment},
    )


def account(
    intensity: IntensityVector, network: Network, dispatch: DispatchResult
) -> AccountingReport:
    """Assign each load its bus intensity times its demand."""
    per_load: Dict[int, float] = {}
    per_bus: Dict[int, list] = {bus_id: [] for bus_id in network.bus_ids}
    dc, non_dc = [], []
    unavailable = 0
    for load in network.loads:
        value = intensity[load.bus]
        if math.isnan(value):
            per_load[load.id] = math.nan
            unavailable += 1
            continue
        emissions = value * load.p
        per_load[load.id] = emissions
        per_bus[load.bus].append(emissions)
        (dc if load.is_datacenter else non_dc).append(emissions)
    if unavailable:
        logger.warning(
            "Timestep %d: %d load(s) without %s intensity left out of accounting",
            intensity.t,
            unavailable,
            intensity.metric.value.upper(),
        )
    return AccountingReport(
        t=intensity.t,
        metric=intensity.metric,
        per_load=per_load,
        per_bus={bus_id: math.fsum(values) for bus_id, values in per_bus.items()},
        system_total=math.fsum(dc + non_dc),
        datacenter_total=math.fsum(dc),
        non_datacenter_total=math.fsum(non_dc),
        true_system_emissions=total_emissions(network, dispatch),
        unavailable_loads=unavailable,
    )


def metrics_from_dispatch(network: Network, dispatch: DispatchResult, t: int = 0) -> MetricBundle:
    """Derive ACE, LMCE, ALMCE and LACE from an existing dispatch."""
    lmce_vector = lmce(network, dispatch, t=t)
    vectors = {
        Metric.ACE: ace(network, dispatch, t=t),
        Metric.LMCE: lmce_vector,
        Metric.ALMCE: almce(network, dispatch, lmce_vector, t=t),
        Metric.LACE: lace(network, dispatch, t=t),
    }
    return MetricBundle(dispatch=dispatch, vectors=vectors)


def compute_all_metrics(
    network: Network,
    t: int = 0,
    solver: Optional[LpSolver] = None,
    hint: Optional[DispatchResult] = None,
) -> MetricBundle:
    """Dispatch ``network`` once and derive all four metrics from it.

    Raises:
        DispatchError: If the dispatch fails
        ValueError: If total load is zero
    """
    dispatch = solve_dcopf(network, solver=solver, hint=hint)
    return metrics_from_dispatch(network, dispatch, t=t)


def account_all(bundle: MetricBundle, network: Network) -> Dict[Metric, AccountingReport]:
    return {metric: account(vector, network, bundle.dispatch) for metric, vector in bundle.items()}


__all__ = [
    "Metric",
    "IntensityVector",
    "AccountingReport",
    "MetricBundle",
    "ace",
    "almce",
    "account",
    "account_all",
    "metrics_from_dispatch",
    "compute_all_metrics",
]
