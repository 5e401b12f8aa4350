"""
Carbon Atlas - Main interface for computing carbon metrics on one network.
"""

import math
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

from carbon_atlas.data import load_case
from carbon_atlas.dcopf import DispatchResult, solve_dcopf, total_emissions
from carbon_atlas.grid import Network
from carbon_atlas.intensity import IntensityVector, Metric
from carbon_atlas.lp import LpSolver
from carbon_atlas.metrics import (
    AccountingReport,
    MetricBundle,
    account,
    metrics_from_dispatch,
)


class CarbonAtlas:
    """Dispatch a network once and read every carbon metric from that dispatch."""

    def __init__(
        self,
        network: Union[Network, str, Path],
        solver: Optional[LpSolver] = None,
    ):
        """Initialize the atlas with a network.

        Args:
            network: A Network, a case file path or a bundled case name
            solver: LP engine, the bundled simplex by default

        Raises:
            FileNotFoundError: If a case path cannot be resolved
            CaseParseError: If the case file is malformed
        """
        if isinstance(network, Network):
            self.network = network
        else:
            self.network = load_case(network)
        self.solver = solver
        self._dispatch: Optional[DispatchResult] = None
        self._bundle: Optional[MetricBundle] = None

    # ---- Dispatch ----

    @property
    def dispatch(self) -> DispatchResult:
        """The cached optimal dispatch; solved on first use."""
        if self._dispatch is None:
            self._dispatch = solve_dcopf(self.network, solver=self.solver)
        return self._dispatch

    def metrics(self) -> MetricBundle:
        if self._bundle is None:
            self._bundle = metrics_from_dispatch(self.network, self.dispatch)
        return self._bundle

    def with_datacenters(self, buses: Sequence[int], p: float) -> "CarbonAtlas":
        """A new atlas with data-center loads of ``p`` MW at ``buses``."""
        return CarbonAtlas(self.network.with_datacenter_loads(buses, p), solver=self.solver)

    # ---- Metrics ----

    def calculate_system_emissions(self) -> float:
        return total_emissions(self.network, self.dispatch)

    def calculate_ace(self) -> IntensityVector:
        return self.metrics()[Metric.ACE]

    def calculate_lmce(self) -> IntensityVector:
        return self.metrics()[Metric.LMCE]

    def calculate_almce(self) -> IntensityVector:
        return self.metrics()[Metric.ALMCE]

    def calculate_lace(self) -> IntensityVector:
        return self.metrics()[Metric.LACE]

    def bus_intensity(self, metric: Union[Metric, str]) -> Dict[int, float]:
        """Per-bus values of ``metric``, ready for plotting."""
        if isinstance(metric, str):
            metric = Metric.parse(metric)
        return dict(self.metrics()[metric].values)

    def account(self, metric: Union[Metric, str]) -> AccountingReport:
        if isinstance(metric, str):
            metric = Metric.parse(metric)
        return account(self.metrics()[metric], self.network, self.dispatch)

    # ---- Statistics ----

    def get_stats(self) -> Dict[str, Any]:
        """Summarize the network, its dispatch and the range of each metric."""
        network = self.network
        stats: Dict[str, Any] = {
            "buses": len(network.buses),
            "lines": len(network.lines),
            "limited_lines": sum(1 for line in network.lines if line.is_limited),
            "generators": len(network.generators),
            "loads": len(network.loads),
            "total_load": network.total_load(),
            "datacenter_buses": list(network.datacenter_buses()),
            "total_cost": self.dispatch.objective,
            "system_emissions": self.calculate_system_emissions(),
            "degenerate": self.dispatch.degenerate,
            "metrics": {},
        }
        for metric, vector in self.metrics().items():
            available = [v for v in vector.values.values() if not math.isnan(v)]
            stats["metrics"][metric.value] = {
                "min": min(available) if available else None,
                "max": max(available) if available else None,
                "mean": math.fsum(available) / len(available) if available else None,
                "not_available": len(vector.unavailable),
            }
        return stats

    # ---- Utility Methods ----
    def __len__(self) -> int:
        """Return the number of buses."""
        return len(self.network.buses)

    def __contains__(self, bus_id: int) -> bool:
        return bus_id in self.network.bus_index()
