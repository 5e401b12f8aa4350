"""
Case-file and time-series ingestion for the grid carbon atlas.

The case grammar is a strict subset of the MATPOWER ``.m`` format
(``mpc.baseMVA``, ``mpc.bus``, ``mpc.gen``, ``mpc.branch``, ``mpc.gencost``)
plus a required ``mpc.emissions`` column vector aligned with ``mpc.gen``.
Optional extensions: ``mpc.load``, ``mpc.bus_name`` and ``mpc.bus_geo``.
"""

import io
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from carbon_atlas.grid import (
    Bus,
    Generator,
    Line,
    Load,
    Network,
    NetworkValidationError,
    ScenarioSeries,
)

logger = logging.getLogger(__name__)

# MATPOWER column positions (0-based)
BUS_I, BUS_TYPE, PD = 0, 1, 2
REF_BUS_TYPE, ISOLATED_BUS_TYPE = 3, 4
GEN_BUS, GEN_STATUS, PMAX, PMIN = 0, 7, 8, 9
F_BUS, T_BUS, BR_X, RATE_A, BR_STATUS = 0, 1, 3, 5, 10
MODEL, NCOST, COST = 0, 3, 4
PW_LINEAR, POLYNOMIAL = 1, 2

_MIN_COLUMNS = {"bus": 3, "gen": 10, "branch": 11, "gencost": 5, "load": 5, "bus_geo": 3}
_KNOWN_FIELDS = {
    "baseMVA",
    "version",
    "bus",
    "gen",
    "branch",
    "gencost",
    "emissions",
    "load",
    "bus_name",
    "bus_geo",
}

_ASSIGN = re.compile(r"mpc\.(?P<name>[A-Za-z_]\w*)\s*=\s*")
_MATRIX_TOKEN = re.compile(r"[\s,]*(?P<tok>[;\]]|[^\s;\],]+)")
_CELL_TOKEN = re.compile(r"\s*(?:'(?P<str>(?:[^']|'')*)'|(?P<sep>[;,}]))")


class CaseParseError(ValueError):
    """Syntax or semantic error in a case file, with its location when known."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        location = ""
        if line is not None:
            location = f"line {line}, column {column or 1}: "
        super().__init__(location + message)


class SeriesParseError(ValueError):
    """Malformed scenario time series."""


@dataclass
class _Field:
    """One ``mpc.<name> = ...`` assignment as read from the file."""

    name: str
    kind: str  # "matrix", "cell" or "scalar"
    line: int
    column: int
    rows: List[List[float]] = field(default_factory=list)
    row_lines: List[int] = field(default_factory=list)
    strings: List[str] = field(default_factory=list)
    text: str = ""


# ---- Data directory discovery ----


def get_data_dir(data_dir: Optional[Union[str, Path]] = None) -> Path:
    """Find the directory holding the bundled example cases.

    Args:
        data_dir: Optional user-specified data directory

    Returns:
        Path to a directory containing a ``cases/`` subdirectory

    Raises:
        FileNotFoundError: If no data directory can be found
    """
    if data_dir is not None:
        path = Path(data_dir)
        if path.exists():
            return path
        raise FileNotFoundError(f"Specified data directory '{path}' not found")

    possible_paths = [
        Path.cwd() / "data",
        Path(__file__).parent.parent / "data",
        Path.home() / "grid_carbon_atlas/data",
    ]
    for path in possible_paths:
        if (path / "cases").is_dir():
            return path

    raise FileNotFoundError(
        "Could not find the grid carbon atlas data directory.\n"
        "Please ensure a data/cases/ directory exists or pass an explicit case path."
    )


def resolve_case_path(case: Union[str, Path], data_dir: Optional[Union[str, Path]] = None) -> Path:
    """Resolve a case argument to a file: an existing path or a bundled case name.

    Raises:
        FileNotFoundError: If neither interpretation names an existing file
    """
    path = Path(case)
    if path.is_file():
        return path
    try:
        cases_dir = get_data_dir(data_dir) / "cases"
    except FileNotFoundError:
        raise FileNotFoundError(f"Case file not found: {path}") from None
    for candidate in (cases_dir / path.name, cases_dir / f"{path.name}.m"):
        if candidate.is_file():
            return candidate
    raise FileNotFoundError(f"Case file not found: {path}")


def load_case(path: Union[str, Path]) -> Network:
    """Read and parse a case file.

    Raises:
        FileNotFoundError: If the file does not exist
        CaseParseError: If the file cannot be decoded or parsed
    """
    case_path = resolve_case_path(path)
    try:
        text = case_path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise CaseParseError(f"Case file {case_path} is not valid UTF-8: {e}") from e
    return parse_case(text)


def load_timeseries(path: Union[str, Path], network: Network) -> ScenarioSeries:
    """Read and parse a scenario CSV for ``network``.

    Raises:
        FileNotFoundError: If the file does not exist
        SeriesParseError: If the file is malformed or names unknown elements
    """
    series_path = Path(path)
    if not series_path.is_file():
        raise FileNotFoundError(f"Series file not found: {series_path}")
    try:
        text = series_path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise SeriesParseError(f"Series file {series_path} is not valid UTF-8: {e}") from e
    return parse_timeseries(text, network)


# ---- Case parsing ----


def _strip_comment(line: str) -> str:
    """Drop a trailing ``%`` comment, leaving quoted strings intact."""
    quoted = False
    for i, char in enumerate(line):
        if char == "'":
            quoted = not quoted
        elif char == "%" and not quoted:
            return line[:i]
    return line


def _tokenize_case(text: str) -> Dict[str, _Field]:
    fields: Dict[str, _Field] = {}
    current: Optional[_Field] = None
    row: List[float] = []

    def close_row(lineno: int, column: int) -> None:
        nonlocal row
        if row:
            if current.rows and len(row) != len(current.rows[0]):
                raise CaseParseError(
                    f"mpc.{current.name} row has {len(row)} columns, "
                    f"expected {len(current.rows[0])}",
                    lineno,
                    column,
                )
            current.rows.append(row)
            current.row_lines.append(lineno)
            row = []

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw)
        pos = 0
        while pos < len(line):
            if current is None:
                while pos < len(line) and line[pos].isspace():
                    pos += 1
                if pos >= len(line):
                    break
                if line.startswith("function", pos):
                    break
                if line[pos] == ";":
                    pos += 1
                    continue
                match = _ASSIGN.match(line, pos)
                if not match:
                    raise CaseParseError("expected 'mpc.<field> = ...'", lineno, pos + 1)
                name = match.group("name")
                if name in fields:
                    raise CaseParseError(f"duplicate assignment to mpc.{name}", lineno, pos + 1)
                pos = match.end()
                opener = line[pos] if pos < len(line) else ""
                if opener == "[":
                    current = _Field(name, "matrix", lineno, pos + 1)
                    pos += 1
                elif opener == "{":
                    current = _Field(name, "cell", lineno, pos + 1)
                    pos += 1
                else:
                    end = line.find(";", pos)
                    value = line[pos:] if end < 0 else line[pos:end]
                    if not value.strip():
                        raise CaseParseError(f"missing value for mpc.{name}", lineno, pos + 1)
                    fields[name] = _Field(name, "scalar", lineno, pos + 1, text=value.strip())
                    pos = len(line) if end < 0 else end + 1
            elif current.kind == "matrix":
                match = _MATRIX_TOKEN.match(line, pos)
                if not match:
                    break
                token = match.group("tok")
                column = match.start("tok") + 1
                pos = match.end()
                if token not in (";", "]"):
                    try:
                        row.append(float(token))
                    except ValueError:
                        raise CaseParseError(
                            f"invalid number '{token}' in mpc.{current.name}", lineno, column
                        ) from None
                elif token == ";":
                    close_row(lineno, column)
                else:
                    close_row(lineno, column)
                    fields[current.name] = current
                    current = None
            else:
                match = _CELL_TOKEN.match(line, pos)
                if not match or match.end() == pos:
                    if line[pos:].strip():
                        raise CaseParseError(
                            f"expected a quoted string in mpc.{current.name}", lineno, pos + 1
                        )
                    break
                pos = match.end()
                if match.group("str") is not None:
                    current.strings.append(match.group("str").replace("''", "'"))
                elif match.group("sep") == "}":
                    fields[current.name] = current
                    current = None
        if current is not None and current.kind == "matrix":
            close_row(lineno, len(line) + 1)

    if current is not None:
        raise CaseParseError(
            f"mpc.{current.name} is not terminated", current.line, current.column
        )
    return fields


def _matrix(fields: Dict[str, _Field], name: str, required: bool = True) -> Optional[_Field]:
    entry = fields.get(name)
    if entry is None:
        if required:
            raise CaseParseError(f"missing required field mpc.{name}")
        return None
    if entry.kind != "matrix":
        raise CaseParseError(f"mpc.{name} must be a matrix", entry.line, entry.column)
    minimum = _MIN_COLUMNS.get(name, 1)
    if entry.rows and len(entry.rows[0]) < minimum:
        raise CaseParseError(
            f"mpc.{name} needs at least {minimum} columns, found {len(entry.rows[0])}",
            entry.row_lines[0],
            1,
        )
    return entry


def _as_int(value: float, entry: _Field, index: int, what: str) -> int:
    if value != int(value):
        raise CaseParseError(
            f"{what} in mpc.{entry.name} must be an integer, got {value:g}",
            entry.row_lines[index],
            1,
        )
    return int(value)


def _cost_points(
    row: List[float], p_min: float, p_max: float, entry: _Field, index: int
) -> Tuple[Tuple[float, float], ...]:
    """Convert one gencost row into PWL breakpoints."""
    lineno = entry.row_lines[index]
    model = int(row[MODEL])
    n = _as_int(row[NCOST], entry, index, "NCOST")
    if model == PW_LINEAR:
        if n < 1 or len(row) < COST + 2 * n:
            raise CaseParseError(f"gencost row declares {n} points but has too few columns", lineno, 1)
        values = row[COST : COST + 2 * n]
        points = tuple(zip(values[0::2], values[1::2]))
        xs = [x for x, _ in points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise CaseParseError("gencost breakpoints must strictly increase in MW", lineno, 1)
        slopes = [(y1 - y0) / (x1 - x0) for (x0, y0), (x1, y1) in zip(points, points[1:])]
        if any(b < a for a, b in zip(slopes, slopes[1:])):
            raise CaseParseError("gencost is not convex (segment slopes decrease)", lineno, 1)
        return points
    if model == POLYNOMIAL:
        if n < 1 or len(row) < COST + n:
            raise CaseParseError(f"gencost row declares {n} coefficients but has too few columns", lineno, 1)
        coefficients = list(row[COST : COST + n])
        while len(coefficients) > 1 and coefficients[0] == 0:
            coefficients.pop(0)
        if len(coefficients) > 2:
            raise CaseParseError(
                f"polynomial gencost of degree {len(coefficients) - 1} is not supported "
                f"(only degree <= 1)",
                lineno,
                1,
            )
        slope = coefficients[0] if len(coefficients) == 2 else 0.0
        constant = coefficients[-1]
        upper = p_max if p_max > p_min else p_min + 1.0
        return ((p_min, slope * p_min + constant), (upper, slope * upper + constant))
    raise CaseParseError(f"unknown gencost model {row[MODEL]:g}", lineno, 1)


def parse_case(text: str) -> Network:
    """Parse case-file text into a validated Network.

    Out-of-service elements (status 0) and isolated buses (type 4) are
    dropped. Generator ids are 1-based mpc.gen row numbers, so ids stay
    aligned with ``mpc.emissions`` and series columns.

    Raises:
        CaseParseError: On syntax errors (with line and column) or semantic
            errors such as dangling bus references, non-convex costs, a
            missing reference bus or a missing ``mpc.emissions`` vector.
    """
    fields = _tokenize_case(text)
    for name, entry in fields.items():
        if name not in _KNOWN_FIELDS:
            logger.warning("Ignoring unsupported field mpc.%s (line %d)", name, entry.line)

    base = fields.get("baseMVA")
    if base is None:
        raise CaseParseError("missing required field mpc.baseMVA")
    try:
        base_mva = float(base.text)
    except ValueError:
        raise CaseParseError(
            f"mpc.baseMVA must be a number, got '{base.text}'", base.line, base.column
        ) from None

    bus_entry = _matrix(fields, "bus")
    gen_entry = _matrix(fields, "gen")
    branch_entry = _matrix(fields, "branch", required=False)
    cost_entry = _matrix(fields, "gencost")
    load_entry = _matrix(fields, "load", required=False)
    geo_entry = _matrix(fields, "bus_geo", required=False)

    emissions_entry = fields.get("emissions")
    if emissions_entry is None:
        raise CaseParseError(
            "missing required field mpc.emissions (one emission intensity per mpc.gen row)"
        )
    if emissions_entry.kind != "matrix":
        raise CaseParseError(
            "mpc.emissions must be a column vector", emissions_entry.line, emissions_entry.column
        )
    emissions = [value for row in emissions_entry.rows for value in row]
    if len(emissions) != len(gen_entry.rows):
        raise CaseParseError(
            f"mpc.emissions has {len(emissions)} entries but mpc.gen has "
            f"{len(gen_entry.rows)} rows",
            emissions_entry.line,
            emissions_entry.column,
        )

    names: List[str] = []
    names_entry = fields.get("bus_name")
    if names_entry is not None:
        if names_entry.kind != "cell" or len(names_entry.strings) != len(bus_entry.rows):
            raise CaseParseError(
                "mpc.bus_name must be a cell array with one name per mpc.bus row",
                names_entry.line,
                names_entry.column,
            )
        names = names_entry.strings

    # Buses
    all_bus_ids = set()
    buses = []
    bus_demand: Dict[int, float] = {}
    for index, row in enumerate(bus_entry.rows):
        bus_id = _as_int(row[BUS_I], bus_entry, index, "bus id")
        if bus_id in all_bus_ids:
            raise CaseParseError(f"duplicate bus id {bus_id}", bus_entry.row_lines[index], 1)
        all_bus_ids.add(bus_id)
        bus_type = int(row[BUS_TYPE])
        if bus_type == ISOLATED_BUS_TYPE:
            logger.warning("Dropping isolated bus %d", bus_id)
            continue
        name = names[index] if names else ""
        buses.append(Bus(id=bus_id, name=name, is_ref=bus_type == REF_BUS_TYPE))
        bus_demand[bus_id] = row[PD]
    active_buses = {bus.id for bus in buses}
    if not any(bus.is_ref for bus in buses):
        raise CaseParseError("no reference bus (BUS_TYPE 3) in mpc.bus", bus_entry.line, 1)

    def check_bus(bus_id: int, entry: _Field, index: int, what: str) -> bool:
        """True if the bus is in service, False if isolated; error if unknown."""
        if bus_id not in all_bus_ids:
            raise CaseParseError(
                f"{what} references unknown bus {bus_id}", entry.row_lines[index], 1
            )
        if bus_id not in active_buses:
            logger.warning("Dropping %s attached to isolated bus %d", what, bus_id)
            return False
        return True

    # Generators
    if len(cost_entry.rows) < len(gen_entry.rows):
        raise CaseParseError(
            f"mpc.gencost has {len(cost_entry.rows)} rows but mpc.gen has "
            f"{len(gen_entry.rows)}",
            cost_entry.line,
            cost_entry.column,
        )
    generators = []
    for index, row in enumerate(gen_entry.rows):
        gen_id = index + 1
        if row[GEN_STATUS] <= 0:
            continue
        bus_id = _as_int(row[GEN_BUS], gen_entry, index, "GEN_BUS")
        if not check_bus(bus_id, gen_entry, index, f"generator {gen_id}"):
            continue
        p_min, p_max = row[PMIN], row[PMAX]
        if p_min > p_max:
            raise CaseParseError(
                f"generator {gen_id} has PMIN {p_min:g} > PMAX {p_max:g}",
                gen_entry.row_lines[index],
                1,
            )
        if emissions[index] < 0:
            raise CaseParseError(
                f"generator {gen_id} has negative emission intensity",
                emissions_entry.row_lines[min(index, len(emissions_entry.row_lines) - 1)],
                1,
            )
        generators.append(
            Generator(
                id=gen_id,
                bus=bus_id,
                p_min=p_min,
                p_max=p_max,
                cost_points=_cost_points(cost_entry.rows[index], p_min, p_max, cost_entry, index),
                emission_intensity=emissions[index],
            )
        )

    # Lines
    lines = []
    for index, row in enumerate(branch_entry.rows if branch_entry else []):
        if row[BR_STATUS] <= 0:
            continue
        f_bus = _as_int(row[F_BUS], branch_entry, index, "F_BUS")
        t_bus = _as_int(row[T_BUS], branch_entry, index, "T_BUS")
        what = f"branch {index + 1}"
        if not (check_bus(f_bus, branch_entry, index, what) and check_bus(t_bus, branch_entry, index, what)):
            continue
        if row[BR_X] <= 0:
            raise CaseParseError(
                f"branch {index + 1} has non-positive reactance {row[BR_X]:g}",
                branch_entry.row_lines[index],
                1,
            )
        limit = row[RATE_A] if row[RATE_A] > 0 else math.inf
        lines.append(Line(from_bus=f_bus, to_bus=t_bus, reactance=row[BR_X], flow_limit=limit))

    # Loads
    loads = []
    if load_entry is not None:
        if any(bus_demand.values()):
            logger.warning("mpc.load present; ignoring PD in mpc.bus")
        for index, row in enumerate(load_entry.rows):
            load_id = _as_int(row[0], load_entry, index, "load id")
            if row[4] <= 0:
                continue
            bus_id = _as_int(row[1], load_entry, index, "load bus")
            if not check_bus(bus_id, load_entry, index, f"load {load_id}"):
                continue
            loads.append(Load(id=load_id, bus=bus_id, p=row[2], is_datacenter=bool(row[3])))
    else:
        loads = [
            Load(id=bus_id, bus=bus_id, p=demand)
            for bus_id, demand in bus_demand.items()
            if demand != 0
        ]

    geo = {}
    for index, row in enumerate(geo_entry.rows if geo_entry else []):
        bus_id = _as_int(row[0], geo_entry, index, "bus id")
        if check_bus(bus_id, geo_entry, index, "bus_geo entry"):
            geo[bus_id] = (row[1], row[2])

    network = Network(
        base_mva=base_mva,
        buses=tuple(buses),
        lines=tuple(lines),
        generators=tuple(generators),
        loads=tuple(loads),
        bus_geo=geo,
    )
    try:
        return network.validate(check_balance=True)
    except NetworkValidationError as e:
        raise CaseParseError(str(e)) from e


# ---- Case serialization ----


def _fmt(value: float) -> str:
    value = float(value)
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _matrix_text(name: str, rows: List[List[float]]) -> List[str]:
    lines = [f"mpc.{name} = ["]
    lines.extend("\t" + "\t".join(_fmt(v) for v in row) + ";" for row in rows)
    lines.append("];")
    return lines


def serialize_case(network: Network) -> str:
    """Write ``network`` in the canonical case format read by :func:`parse_case`.

    Gaps in generator ids are filled with out-of-service placeholder rows so
    ids survive the round trip; loads always go to ``mpc.load``.
    """
    out = ["function mpc = carbon_case", "mpc.version = '2';", f"mpc.baseMVA = {_fmt(network.base_mva)};", ""]

    out += ["%% bus data", "%\tbus_i\ttype\tPd"]
    out += _matrix_text(
        "bus", [[bus.id, REF_BUS_TYPE if bus.is_ref else 1, 0] for bus in network.buses]
    )

    first_bus = network.buses[0].id
    by_id = {gen.id: gen for gen in network.generators}
    gen_rows, cost_rows, emissions = [], [], []
    width = max((len(gen.cost_points) for gen in network.generators), default=2)
    for gen_id in range(1, max(by_id, default=0) + 1):
        gen = by_id.get(gen_id)
        if gen is None:
            gen_rows.append([first_bus, 0, 0, 0, 0, 1, network.base_mva, 0, 0, 0])
            points = [(0.0, 0.0), (1.0, 0.0)]
            emissions.append([0])
        else:
            gen_rows.append([gen.bus, 0, 0, 0, 0, 1, network.base_mva, 1, gen.p_max, gen.p_min])
            points = list(gen.cost_points)
            emissions.append([gen.emission_intensity])
        flat = [v for point in points for v in point]
        flat += [0.0] * (2 * width - len(flat))
        cost_rows.append([PW_LINEAR, 0, 0, len(points)] + flat)

    out += ["", "%% generator data", "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin"]
    out += _matrix_text("gen", gen_rows)
    out += ["", "%% branch data", "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus"]
    out += _matrix_text(
        "branch",
        [
            [line.from_bus, line.to_bus, 0, line.reactance, 0, line.flow_limit if line.is_limited else 0, 0, 0, 0, 0, 1]
            for line in network.lines
        ],
    )
    out += ["", "%% generator cost data (piecewise linear)"]
    out += _matrix_text("gencost", cost_rows)
    out += ["", "%% generator emission intensity (tCO2/MWh)"]
    out += _matrix_text("emissions", emissions)
    out += ["", "%% loads: id bus Pd is_datacenter status"]
    out += _matrix_text(
        "load", [[load.id, load.bus, load.p, int(load.is_datacenter), 1] for load in network.loads]
    )

    if any(bus.name for bus in network.buses):
        out += ["", "mpc.bus_name = {"]
        out += ["\t'" + bus.name.replace("'", "''") + "';" for bus in network.buses]
        out.append("};")
    if network.bus_geo:
        out += ["", "%% bus coordinates: bus x y"]
        out += _matrix_text("bus_geo", [[bus_id, x, y] for bus_id, (x, y) in network.bus_geo.items()])
    return "\n".join(out) + "\n"


# ---- Time series ----


def parse_timeseries(text: str, network: Network) -> ScenarioSeries:
    """Parse a scenario CSV.

    The first column is ``t`` (1-based, consecutive); the others are
    ``load:<id>`` multipliers or ``gen_pmax:<id>`` MW overrides.

    Raises:
        SeriesParseError: On unknown ids, ragged rows, negative or
            non-numeric values, or a malformed ``t`` column.
    """
    try:
        frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        raise SeriesParseError("Series is empty.") from e
    except pd.errors.ParserError as e:
        raise SeriesParseError(f"Ragged row in series: {e}") from e

    columns = [str(c).strip() for c in frame.columns]
    if not columns or columns[0] != "t":
        raise SeriesParseError("First series column must be 't'.")
    if frame.empty:
        raise SeriesParseError("Series has no data rows.")

    load_ids = {load.id for load in network.loads}
    gen_ids = {gen.id for gen in network.generators}
    load_columns: List[Tuple[int, str]] = []
    gen_columns: List[Tuple[int, str]] = []
    for raw, name in zip(frame.columns, columns):
        if name == "t":
            continue
        kind, _, ident = name.partition(":")
        try:
            element_id = int(ident)
        except ValueError:
            raise SeriesParseError(f"Malformed column header '{name}'.") from None
        if kind == "load":
            if element_id not in load_ids:
                raise SeriesParseError(f"Unknown load id {element_id} in column '{name}'.")
            load_columns.append((element_id, raw))
        elif kind == "gen_pmax":
            if element_id not in gen_ids:
                raise SeriesParseError(f"Unknown generator id {element_id} in column '{name}'.")
            gen_columns.append((element_id, raw))
        else:
            raise SeriesParseError(f"Malformed column header '{name}'.")
    for ids in (load_columns, gen_columns):
        seen = [element_id for element_id, _ in ids]
        if len(set(seen)) != len(seen):
            raise SeriesParseError("Duplicate series column.")

    values = np.empty(frame.shape, dtype=float)
    for j, raw in enumerate(frame.columns):
        for i, cell in enumerate(frame[raw].tolist()):
            if not isinstance(cell, str) or cell.strip() == "":
                raise SeriesParseError(f"Ragged row {i + 1}: missing value for '{columns[j]}'.")
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise SeriesParseError(
                    f"Row {i + 1}: non-numeric value '{cell}' for '{columns[j]}'."
                ) from None
    if not np.all(np.isfinite(values)):
        raise SeriesParseError("Series values must be finite.")

    steps = values[:, 0]
    if not np.array_equal(steps, np.arange(1, len(steps) + 1)):
        raise SeriesParseError("Column 't' must count 1, 2, ... N without gaps.")
    data = values[:, 1:]
    if (data < 0).any():
        row, col = np.argwhere(data < 0)[0]
        raise SeriesParseError(f"Row {row + 1}: negative value for '{columns[col + 1]}'.")

    position = {raw: j for j, raw in enumerate(frame.columns)}
    return ScenarioSeries(
        load_ids=tuple(element_id for element_id, _ in load_columns),
        load_multipliers=values[:, [position[raw] for _, raw in load_columns]],
        gen_ids=tuple(element_id for element_id, _ in gen_columns),
        gen_pmax=values[:, [position[raw] for _, raw in gen_columns]],
        timesteps=len(steps),
    )
