"""
Grid Carbon Atlas - nodal carbon metrics on DC optimal power flow dispatches

Computes average, marginal, adjusted marginal and flow-traced carbon
intensities per bus, accounts emissions to loads with each of them, and
runs data-center load-shifting studies that re-dispatch the grid to
measure what a shift really does to system emissions.
"""

__version__ = "0.1.0"

from carbon_atlas.atlas import CarbonAtlas
from carbon_atlas.data import load_case, load_timeseries, parse_case, parse_timeseries
from carbon_atlas.intensity import IntensityVector, Metric
from carbon_atlas.shifting import ShiftConfig
from carbon_atlas.workflow import run_accounting_study, run_shifting_study

__all__ = [
    "CarbonAtlas",
    "IntensityVector",
    "Metric",
    "ShiftConfig",
    "load_case",
    "load_timeseries",
    "parse_case",
    "parse_timeseries",
    "run_accounting_study",
    "run_shifting_study",
]
