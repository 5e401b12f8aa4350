"""
Grid model - immutable domain types for transmission networks and scenarios.
"""

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Sequence, Tuple

import networkx as nx
import numpy as np


class NetworkValidationError(ValueError):
    """Raised when a Network violates one of its structural invariants."""


@dataclass(frozen=True)
class Bus:
    """A network node. Exactly one bus per network is the angle reference."""

    id: int
    name: str = ""
    is_ref: bool = False


@dataclass(frozen=True)
class Line:
    """A lossless transmission line.

    The reactance is stored (MATPOWER's column) and the per-unit susceptance
    is derived from it, so case files round-trip exactly.
    """

    from_bus: int
    to_bus: int
    reactance: float
    flow_limit: float = math.inf

    @property
    def susceptance(self) -> float:
        return 1.0 / self.reactance

    @property
    def is_limited(self) -> bool:
        return math.isfinite(self.flow_limit)


@dataclass(frozen=True)
class Generator:
    """A dispatchable unit with a convex piecewise-linear cost.

    ``cost_points`` are (MW, currency/h) breakpoints; the epigraph of their
    segments, extended beyond the end points, is the cost function.
    """

    id: int
    bus: int
    p_min: float
    p_max: float
    cost_points: Tuple[Tuple[float, float], ...]
    emission_intensity: float
    in_service: bool = True

    def segments(self) -> Tuple[Tuple[float, float], ...]:
        """Return (slope, intercept) for every cost segment, in order."""
        result = []
        for (x0, y0), (x1, y1) in zip(self.cost_points, self.cost_points[1:]):
            slope = (y1 - y0) / (x1 - x0)
            result.append((slope, y0 - slope * x0))
        return tuple(result)

    def cost_at(self, p: float) -> float:
        """Evaluate the PWL cost (max over the segment lines) at ``p`` MW."""
        return max(slope * p + intercept for slope, intercept in self.segments())


@dataclass(frozen=True)
class Load:
    """A demand. ``is_datacenter`` marks the shiftable data-center loads."""

    id: int
    bus: int
    p: float
    is_datacenter: bool = False


@dataclass(frozen=True)
class Network:
    """Static description of a grid at one operating point.

    Buses, generators and loads are kept sorted by id and lines in file
    order, so every index map built downstream is deterministic.
    """

    base_mva: float
    buses: Tuple[Bus, ...]
    lines: Tuple[Line, ...]
    generators: Tuple[Generator, ...]
    loads: Tuple[Load, ...]
    bus_geo: Mapping[int, Tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(sorted(self.buses, key=lambda b: b.id)))
        object.__setattr__(
            self, "generators", tuple(sorted(self.generators, key=lambda g: g.id))
        )
        object.__setattr__(self, "loads", tuple(sorted(self.loads, key=lambda d: d.id)))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "bus_geo", dict(sorted(self.bus_geo.items())))

    # ---- Lookups ----

    @property
    def bus_ids(self) -> Tuple[int, ...]:
        return tuple(bus.id for bus in self.buses)

    @property
    def ref_bus(self) -> Bus:
        return next(bus for bus in self.buses if bus.is_ref)

    def bus_index(self) -> Dict[int, int]:
        """Map bus id to its position in ``buses``."""
        return {bus.id: i for i, bus in enumerate(self.buses)}

    def generator(self, gen_id: int) -> Generator:
        for gen in self.generators:
            if gen.id == gen_id:
                return gen
        raise KeyError(f"Generator {gen_id} not found.")

    def load(self, load_id: int) -> Load:
        for load in self.loads:
            if load.id == load_id:
                return load
        raise KeyError(f"Load {load_id} not found.")

    def bus_load(self) -> Dict[int, float]:
        """Aggregate demand per bus (MW); buses without loads map to 0."""
        totals = {bus.id: 0.0 for bus in self.buses}
        for load in self.loads:
            totals[load.bus] += load.p
        return totals

    def total_load(self) -> float:
        return math.fsum(load.p for load in self.loads)

    def datacenter_buses(self) -> Tuple[int, ...]:
        return tuple(sorted({load.bus for load in self.loads if load.is_datacenter}))

    # ---- Validation ----

    def validate(self, check_balance: bool = True) -> "Network":
        """Check the structural invariants and return ``self``.

        Args:
            check_balance: Also run the capacity screen
                (sum of p_min <= total load <= sum of p_max).

        Raises:
            NetworkValidationError: On the first violated invariant.
        """
        if not self.base_mva > 0:
            raise NetworkValidationError(f"baseMVA must be positive, got {self.base_mva}")
        if not self.buses:
            raise NetworkValidationError("Network has no buses.")

        ids = [bus.id for bus in self.buses]
        if len(set(ids)) != len(ids):
            raise NetworkValidationError("Bus ids are not unique.")
        for bus_id in ids:
            if bus_id <= 0:
                raise NetworkValidationError(f"Bus id must be positive, got {bus_id}")
        refs = [bus.id for bus in self.buses if bus.is_ref]
        if len(refs) != 1:
            raise NetworkValidationError(
                f"Exactly one reference bus required, found {len(refs)}."
            )

        known = set(ids)
        for index, line in enumerate(self.lines):
            if line.from_bus not in known or line.to_bus not in known:
                raise NetworkValidationError(
                    f"Line {index + 1} references an unknown bus "
                    f"({line.from_bus} -> {line.to_bus})."
                )
            if line.from_bus == line.to_bus:
                raise NetworkValidationError(f"Line {index + 1} is a self-loop.")
            if not line.reactance > 0:
                raise NetworkValidationError(
                    f"Line {index + 1} must have positive reactance, got {line.reactance}"
                )
            if not line.flow_limit > 0:
                raise NetworkValidationError(
                    f"Line {index + 1} must have a positive flow limit."
                )

        gen_ids = [gen.id for gen in self.generators]
        if len(set(gen_ids)) != len(gen_ids):
            raise NetworkValidationError("Generator ids are not unique.")
        for gen in self.generators:
            self._validate_generator(gen, known)

        load_ids = [load.id for load in self.loads]
        if len(set(load_ids)) != len(load_ids):
            raise NetworkValidationError("Load ids are not unique.")
        datacenter_buses = set()
        for load in self.loads:
            if load.bus not in known:
                raise NetworkValidationError(
                    f"Load {load.id} references unknown bus {load.bus}."
                )
            if load.p < 0:
                raise NetworkValidationError(f"Load {load.id} has negative demand.")
            if load.is_datacenter:
                if load.bus in datacenter_buses:
                    raise NetworkValidationError(
                        f"Bus {load.bus} carries more than one datacenter load."
                    )
                datacenter_buses.add(load.bus)

        for bus_id in self.bus_geo:
            if bus_id not in known:
                raise NetworkValidationError(f"bus_geo references unknown bus {bus_id}.")

        graph = self.graph()
        if not nx.is_connected(graph):
            islands = sorted(
                (sorted(component) for component in nx.connected_components(graph)),
                key=lambda c: c[0],
            )
            raise NetworkValidationError(
                f"Network is not connected; islands start at buses "
                f"{[island[0] for island in islands]}."
            )

        if check_balance:
            demand = self.total_load()
            p_min = math.fsum(gen.p_min for gen in self.generators)
            p_max = math.fsum(gen.p_max for gen in self.generators)
            if not p_min <= demand <= p_max:
                raise NetworkValidationError(
                    f"Total load {demand:g} MW lies outside the generation range "
                    f"[{p_min:g}, {p_max:g}] MW."
                )
        return self

    @staticmethod
    def _validate_generator(gen: Generator, known: Iterable[int]) -> None:
        if gen.id <= 0:
            raise NetworkValidationError(f"Generator id must be positive, got {gen.id}")
        if gen.bus not in known:
            raise NetworkValidationError(
                f"Generator {gen.id} references unknown bus {gen.bus}."
            )
        if gen.p_min > gen.p_max:
            raise NetworkValidationError(
                f"Generator {gen.id} has p_min {gen.p_min} > p_max {gen.p_max}."
            )
        if gen.emission_intensity < 0:
            raise NetworkValidationError(
                f"Generator {gen.id} has a negative emission intensity."
            )
        xs = [x for x, _ in gen.cost_points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise NetworkValidationError(
                f"Generator {gen.id} cost breakpoints must strictly increase in MW."
            )
        slopes = [slope for slope, _ in gen.segments()]
        if any(b < a - 1e-12 * max(1.0, abs(a)) for a, b in zip(slopes, slopes[1:])):
            raise NetworkValidationError(
                f"Generator {gen.id} cost is not convex (segment slopes decrease)."
            )

    def graph(self) -> nx.Graph:
        """Undirected topology graph over bus ids."""
        graph = nx.Graph()
        graph.add_nodes_from(self.bus_ids)
        graph.add_edges_from((line.from_bus, line.to_bus) for line in self.lines)
        return graph

    # ---- Derived networks ----

    def replace(self, **changes) -> "Network":
        return dataclasses.replace(self, **changes)

    def with_loads(self, loads: Iterable[Load]) -> "Network":
        return self.replace(loads=tuple(loads))

    def with_datacenter_loads(self, buses: Sequence[int], p: float) -> "Network":
        """Mark ``buses`` as data centers drawing ``p`` MW each.

        An existing datacenter load at a bus is resized; otherwise a new
        datacenter load is added with the next free load id.
        """
        known = set(self.bus_ids)
        loads = list(self.loads)
        next_id = max((load.id for load in loads), default=0) + 1
        for bus_id in buses:
            if bus_id not in known:
                raise NetworkValidationError(f"Datacenter bus {bus_id} not in network.")
            for i, load in enumerate(loads):
                if load.bus == bus_id and load.is_datacenter:
                    loads[i] = dataclasses.replace(load, p=float(p))
                    break
            else:
                loads.append(Load(id=next_id, bus=bus_id, p=float(p), is_datacenter=True))
                next_id += 1
        return self.with_loads(loads)

    def with_bus_load_delta(self, bus_id: int, delta: float) -> "Network":
        """Add ``delta`` MW of demand at ``bus_id``.

        The first load at the bus absorbs the change; a bus without loads
        gets a new one.
        """
        if bus_id not in set(self.bus_ids):
            raise KeyError(f"Bus {bus_id} not found.")
        loads = list(self.loads)
        for i, load in enumerate(loads):
            if load.bus == bus_id:
                loads[i] = dataclasses.replace(load, p=load.p + delta)
                return self.with_loads(loads)
        next_id = max((load.id for load in loads), default=0) + 1
        loads.append(Load(id=next_id, bus=bus_id, p=delta))
        return self.with_loads(loads)


@dataclass(frozen=True, eq=False)
class ScenarioSeries:
    """Per-timestep load multipliers and generator p_max overrides.

    Rows of both matrices are timesteps (row 0 is t = 1); columns follow
    ``load_ids`` and ``gen_ids``. The arrays are read-only.
    """

    load_ids: Tuple[int, ...]
    load_multipliers: np.ndarray
    gen_ids: Tuple[int, ...]
    gen_pmax: np.ndarray
    timesteps: int = 0

    def __post_init__(self):
        multipliers = np.array(self.load_multipliers, dtype=float, copy=True)
        pmax = np.array(self.gen_pmax, dtype=float, copy=True)
        steps = self.timesteps or max(multipliers.shape[0], pmax.shape[0])
        multipliers = multipliers.reshape(steps, len(self.load_ids))
        pmax = pmax.reshape(steps, len(self.gen_ids))
        if (multipliers < 0).any() or (pmax < 0).any():
            raise ValueError("Scenario values must be non-negative.")
        multipliers.flags.writeable = False
        pmax.flags.writeable = False
        object.__setattr__(self, "load_ids", tuple(self.load_ids))
        object.__setattr__(self, "gen_ids", tuple(self.gen_ids))
        object.__setattr__(self, "load_multipliers", multipliers)
        object.__setattr__(self, "gen_pmax", pmax)
        object.__setattr__(self, "timesteps", steps)

    @classmethod
    def identity(cls, network: Network, timesteps: int) -> "ScenarioSeries":
        """A series that scales every load by 1.0 and overrides nothing."""
        ids = tuple(load.id for load in network.loads)
        return cls(
            load_ids=ids,
            load_multipliers=np.ones((timesteps, len(ids))),
            gen_ids=(),
            gen_pmax=np.zeros((timesteps, 0)),
            timesteps=timesteps,
        )

    def check_against(self, network: Network) -> None:
        """Raise KeyError if the series names an element absent from ``network``."""
        load_ids = {load.id for load in network.loads}
        gen_ids = {gen.id for gen in network.generators}
        for load_id in self.load_ids:
            if load_id not in load_ids:
                raise KeyError(f"Series references unknown load id {load_id}.")
        for gen_id in self.gen_ids:
            if gen_id not in gen_ids:
                raise KeyError(f"Series references unknown generator id {gen_id}.")


def apply_timestep(network: Network, series: ScenarioSeries, t: int) -> Network:
    """Instantiate ``network`` at timestep ``t`` (1-based) of ``series``.

    Loads named by the series are scaled by their multiplier and generators
    named by it take the override as p_max (p_min follows it down when the
    override is smaller). The input network is never modified.

    Raises:
        IndexError: If ``t`` is outside 1..N_t.
    """
    if not 1 <= t <= series.timesteps:
        raise IndexError(f"Timestep {t} outside 1..{series.timesteps}.")
    row = t - 1

    multipliers = dict(zip(series.load_ids, series.load_multipliers[row]))
    loads = tuple(
        dataclasses.replace(load, p=load.p * float(multipliers[load.id]))
        if load.id in multipliers
        else load
        for load in network.loads
    )

    overrides = dict(zip(series.gen_ids, series.gen_pmax[row]))
    generators = []
    for gen in network.generators:
        if gen.id in overrides:
            p_max = float(overrides[gen.id])
            gen = dataclasses.replace(gen, p_max=p_max, p_min=min(gen.p_min, p_max))
        generators.append(gen)

    return network.replace(loads=loads, generators=tuple(generators)).validate(
        check_balance=False
    )


__all__ = [
    "Bus",
    "Line",
    "Generator",
    "Load",
    "Network",
    "NetworkValidationError",
    "ScenarioSeries",
    "apply_timestep",
]
