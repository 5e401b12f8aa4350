"""
Test fixtures for the grid carbon atlas tests.
"""

from pathlib import Path

import pytest

from carbon_atlas.data import load_case, load_timeseries
from carbon_atlas.grid import Bus, Generator, Line, Load, Network
from carbon_atlas.intensity import Metric
from carbon_atlas.shifting import ShiftConfig
from carbon_atlas.workflow import run_shifting_study

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
CASES_DIR = DATA_DIR / "cases"

# Emission intensities used throughout the bundled cases (tCO2/MWh)
COAL = 0.9606
GAS = 0.6042

DEMO_CONFIG = ShiftConfig(datacenter_buses=(2,), nominal_load=100.0, flexibility=0.2, horizon=2)


def linear_generator(gen_id, bus, p_max, slope, intensity, p_min=0.0):
    """A generator with a single linear cost segment over [p_min, p_max]."""
    upper = p_max if p_max > p_min else p_min + 1.0
    return Generator(
        id=gen_id,
        bus=bus,
        p_min=p_min,
        p_max=p_max,
        cost_points=((p_min, slope * p_min), (upper, slope * upper)),
        emission_intensity=intensity,
    )


@pytest.fixture
def cases_dir():
    return CASES_DIR


@pytest.fixture
def uncongested():
    """Triangle where coal at bus 1 is the only marginal unit."""
    return load_case(CASES_DIR / "case3_uncongested.m")


@pytest.fixture
def congested():
    """Triangle where line 1-3 binds and both units are marginal."""
    return load_case(CASES_DIR / "case3_congested.m")


@pytest.fixture
def case5():
    return load_case(CASES_DIR / "case5_gen_intensity.m")


@pytest.fixture
def demo():
    """Two-bus case with one data center at bus 2."""
    return load_case(CASES_DIR / "demo2bus.m")


@pytest.fixture
def demo_series(demo):
    return load_timeseries(CASES_DIR / "demo2bus_series.csv", demo)


@pytest.fixture
def single_bus_tie():
    """Two free generators competing for one load: every vertex is degenerate."""
    return Network(
        base_mva=100.0,
        buses=(Bus(id=1, is_ref=True),),
        lines=(),
        generators=(
            linear_generator(1, 1, 100.0, 0.0, COAL),
            linear_generator(2, 1, 100.0, 0.0, GAS),
        ),
        loads=(Load(id=1, bus=1, p=100.0),),
    ).validate()


@pytest.fixture
def single_bus_fixed():
    """A must-run unit exactly covering the load; no perturbation is feasible."""
    return Network(
        base_mva=100.0,
        buses=(Bus(id=1, is_ref=True),),
        lines=(),
        generators=(linear_generator(1, 1, 100.0, 0.0, COAL, p_min=100.0),),
        loads=(Load(id=1, bus=1, p=100.0),),
    ).validate()


@pytest.fixture
def two_bus_line():
    """Cheap coal at bus 1 feeding bus 2 through a line."""
    return Network(
        base_mva=100.0,
        buses=(Bus(id=1, is_ref=True), Bus(id=2)),
        lines=(Line(from_bus=1, to_bus=2, reactance=0.1),),
        generators=(
            linear_generator(1, 1, 200.0, 10.0, COAL),
            linear_generator(2, 2, 200.0, 30.0, GAS),
        ),
        loads=(Load(id=1, bus=2, p=100.0),),
    ).validate()


@pytest.fixture
def demo_studies(demo, demo_series):
    """Average- and marginal-metric shifting studies of the demo case."""
    return {
        metric: run_shifting_study(demo, demo_series, metric, DEMO_CONFIG)
        for metric in (Metric.ACE, Metric.LMCE)
    }
