"""
Nodal carbon-intensity vectors shared by the metric modules.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Sequence, Tuple

import numpy as np


class Metric(enum.Enum):
    ACE = "ace"
    LMCE = "lmce"
    ALMCE = "almce"
    LACE = "lace"

    @classmethod
    def parse(cls, name: str) -> "Metric":
        try:
            return cls(name.strip().lower())
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ValueError(f"Unknown metric '{name}'. Choose from: {choices}") from None


@dataclass(frozen=True)
class IntensityVector:
    """Per-bus carbon intensity (tCO2/MWh) of one metric at one timestep.

    A NaN value marks a bus whose intensity is not available.
    """

    metric: Metric
    t: int
    values: Mapping[int, float]
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "values", dict(sorted(self.values.items())))
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def bus_ids(self) -> Tuple[int, ...]:
        return tuple(self.values)

    def __getitem__(self, bus_id: int) -> float:
        return self.values[bus_id]

    def is_available(self, bus_id: int) -> bool:
        return not math.isnan(self.values[bus_id])

    @property
    def unavailable(self) -> Tuple[int, ...]:
        return tuple(bus for bus, value in self.values.items() if math.isnan(value))

    def as_array(self, bus_ids: Sequence[int] = ()) -> np.ndarray:
        ids = bus_ids or self.bus_ids
        return np.array([self.values[bus] for bus in ids], dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "metric": self.metric.value,
            "t": self.t,
            "values": {
                str(bus): (None if math.isnan(v) else v) for bus, v in self.values.items()
            },
            "metadata": dict(self.metadata),
        }


__all__ = ["Metric", "IntensityVector"]
