"""
Spatio-temporal data-center load shifting.

Within one horizon every data center may run between (1 - eps) and
(1 + eps) times its nominal load as long as the total energy across all
data centers and timesteps is unchanged. With intensities taken as
constants the LP has a single coupling row, so the optimum is found by
filling the cleanest cells first.
"""

import io
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from carbon_atlas.grid import Network
from carbon_atlas.intensity import IntensityVector
from carbon_atlas.lp import LpProblem, LpRow, Relation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ShiftConfig:
    """Shifting parameters.

    Attributes:
        datacenter_buses: Bus ids hosting the shiftable loads, in plan row order
        nominal_load: D_nom, MW per data center
        flexibility: eps, fraction of D_nom each data center may deviate
        horizon: Timesteps per shifting problem (one day of hours)
    """

    datacenter_buses: Tuple[int, ...]
    nominal_load: float = 250.0
    flexibility: float = 0.2
    horizon: int = 24

    def __post_init__(self):
        object.__setattr__(self, "datacenter_buses", tuple(self.datacenter_buses))
        if not self.datacenter_buses:
            raise ValueError("At least one datacenter bus is required.")
        if len(set(self.datacenter_buses)) != len(self.datacenter_buses):
            raise ValueError("Datacenter buses must be distinct.")
        if not self.nominal_load > 0:
            raise ValueError(f"Nominal load must be positive, got {self.nominal_load}")
        if not 0 <= self.flexibility < 1:
            raise ValueError(f"Flexibility must lie in [0, 1), got {self.flexibility}")
        if self.horizon < 1:
            raise ValueError(f"Horizon must be at least 1, got {self.horizon}")

    @property
    def bounds(self) -> Tuple[float, float]:
        return (
            (1.0 - self.flexibility) * self.nominal_load,
            (1.0 + self.flexibility) * self.nominal_load,
        )

    @property
    def total_energy(self) -> float:
        return len(self.datacenter_buses) * self.horizon * self.nominal_load

    def check_network(self, network: Network) -> None:
        """Raise ValueError if a datacenter bus is not in ``network``."""
        known = set(network.bus_ids)
        missing = [bus for bus in self.datacenter_buses if bus not in known]
        if missing:
            raise ValueError(f"Datacenter buses not in network: {missing}")


@dataclass(frozen=True, eq=False)
class ShiftPlan:
    """Data-center load per (bus, timestep) in MW and its estimated emissions."""

    buses: Tuple[int, ...]
    d: np.ndarray
    objective: float

    def __post_init__(self):
        d = np.array(self.d, dtype=float, copy=True)
        d.flags.writeable = False
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "buses", tuple(self.buses))

    @property
    def total(self) -> float:
        return math.fsum(self.d.ravel())

    def load_at(self, bus: int, t: int) -> float:
        """MW at ``bus`` during horizon step ``t`` (0-based)."""
        return float(self.d[self.buses.index(bus), t])

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            self.d,
            index=pd.Index(self.buses, name="bus"),
            columns=[str(t + 1) for t in range(self.d.shape[1])],
        )
        return frame

    def to_csv(self) -> str:
        """Rows are data-center buses, columns are timesteps 1..N_t."""
        buffer = io.StringIO()
        self.to_frame().to_csv(buffer, float_format="%.6f", lineterminator="\n")
        return buffer.getvalue()


def intensity_matrix(
    intensities: Sequence[IntensityVector], config: ShiftConfig
) -> np.ndarray:
    """Stack the data-center intensities into an N_d x N_t matrix.

    Raises:
        ValueError: On horizon or bus mismatch, or a not-available value
    """
    if len(intensities) != config.horizon:
        raise ValueError(
            f"Expected {config.horizon} intensity vectors, got {len(intensities)}."
        )
    e = np.empty((len(config.datacenter_buses), config.horizon))
    for t, vector in enumerate(intensities):
        for i, bus in enumerate(config.datacenter_buses):
            if bus not in vector.values:
                raise ValueError(f"Intensity vector {t + 1} has no value for bus {bus}.")
            value = vector[bus]
            if math.isnan(value):
                raise ValueError(
                    f"{vector.metric.value.upper()} intensity at bus {bus}, "
                    f"step {t + 1} is not available."
                )
            e[i, t] = value
    return e


def solve_shift(
    intensities: Sequence[IntensityVector], config: ShiftConfig
) -> ShiftPlan:
    """Minimize estimated data-center emissions over one horizon.

    Every cell starts at the lower bound; the energy left to place goes to
    cells in order of (intensity, timestep, bus id) up to the upper
    bound.
    """
    e = intensity_matrix(intensities, config)
    low, high = config.bounds
    n_dc, n_t = e.shape
    d = np.full((n_dc, n_t), low)
    remaining = config.total_energy - low * n_dc * n_t
    buses = config.datacenter_buses
    cells = sorted((e[i, t], t, buses[i], i) for i in range(n_dc) for t in range(n_t))
    for _, t, _, i in cells:
        if remaining <= 0:
            break
        add = min(high - low, remaining)
        d[i, t] = low + add
        remaining -= add
    objective = math.fsum((e * d).ravel())
    return ShiftPlan(buses=config.datacenter_buses, d=d, objective=objective)


def build_shift_lp(
    intensities: Sequence[IntensityVector], config: ShiftConfig
) -> LpProblem:
    """The shifting problem as an LP, columns ``d:<bus>:<t>`` in row-major order."""
    e = intensity_matrix(intensities, config)
    low, high = config.bounds
    n_dc, n_t = e.shape
    column_ids = [f"d:{bus}:{t + 1}" for bus in config.datacenter_buses for t in range(n_t)]
    energy = LpRow(
        "energy",
        tuple((j, 1.0) for j in range(n_dc * n_t)),
        Relation.EQ,
        config.total_energy,
    )
    return LpProblem(
        column_ids=tuple(column_ids),
        c=e.ravel(),
        rows=(energy,),
        lower=np.full(n_dc * n_t, low),
        upper=np.full(n_dc * n_t, high),
    )


def estimated_accounting(
    pre_intensities: Sequence[IntensityVector],
    plan: ShiftPlan,
    config: Optional[ShiftConfig] = None,
) -> float:
    """Data-center emissions of ``plan`` at the pre-shift intensities (tCO2)."""
    if config is None:
        config = ShiftConfig(datacenter_buses=plan.buses, horizon=plan.d.shape[1])
    if plan.d.shape != (len(config.datacenter_buses), config.horizon):
        raise ValueError("Plan shape does not match the shifting configuration.")
    e = intensity_matrix(pre_intensities, config)
    return math.fsum((e * plan.d).ravel())


def split_days(timesteps: int, horizon: int) -> List[range]:
    """Whole horizons ``[1..h], [h+1..2h], ...``; a partial tail is dropped."""
    days = [range(start, start + horizon) for start in range(1, timesteps - horizon + 2, horizon)]
    leftover = timesteps - len(days) * horizon
    if leftover:
        logger.warning(
            "Skipping %d trailing timestep(s) that do not fill a %d-step day",
            leftover,
            horizon,
        )
    return days


__all__ = [
    "ShiftConfig",
    "ShiftPlan",
    "intensity_matrix",
    "solve_shift",
    "build_shift_lp",
    "estimated_accounting",
    "split_days",
]
