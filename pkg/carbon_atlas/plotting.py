"""
Self-contained SVG figures: the daily-delta histogram and per-metric network
maps colored by bus intensity.

Output is plain text built from fixed-precision numbers, so identical
inputs give identical bytes.
"""

import math
from html import escape
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import networkx as nx

from carbon_atlas.grid import Network

# Green (clean) to red (dirty); values are interpolated linearly in RGB.
COLOR_RAMP = ("#1a9850", "#91cf60", "#ffffbf", "#fc8d59", "#d73027")
MISSING_COLOR = "#bdbdbd"
LINE_COLOR = "#9e9e9e"
DATACENTER_COLOR = "#d62728"
BAR_COLOR = "#348ABD"

PANEL_SIZE = 360
PANEL_MARGIN = 40
BUS_RADIUS = 9
GEN_SIZE = 7


def _num(value: float) -> str:
    return f"{value:.2f}"


def _svg_open(width: float, height: float) -> List[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(width)}" '
        f'height="{_num(height)}" viewBox="0 0 {_num(width)} {_num(height)}" '
        'font-family="sans-serif">',
        f'<rect x="0" y="0" width="{_num(width)}" height="{_num(height)}" fill="white"/>',
    ]


def ramp_color(value: float, low: float, high: float) -> str:
    """Hex color for ``value`` on the ramp spanning ``low``..``high``."""
    if value is None or math.isnan(value):
        return MISSING_COLOR
    if high <= low:
        fraction = 0.5
    else:
        fraction = min(1.0, max(0.0, (value - low) / (high - low)))
    position = fraction * (len(COLOR_RAMP) - 1)
    k = min(int(position), len(COLOR_RAMP) - 2)
    local = position - k
    start = [int(COLOR_RAMP[k][i : i + 2], 16) for i in (1, 3, 5)]
    end = [int(COLOR_RAMP[k + 1][i : i + 2], 16) for i in (1, 3, 5)]
    rgb = [round(a + (b - a) * local) for a, b in zip(start, end)]
    return "#" + "".join(f"{c:02x}" for c in rgb)


def histogram_svg(histogram: Mapping[str, Any], title: str = "", unit: str = "tCO2") -> str:
    """Bar chart of a daily-delta histogram given as ``DeltaHistogram.to_dict()``.

    Zero-count bins draw no bar, so a one-day study shows a single bar.
    """
    edges = [float(v) for v in histogram["edges"]]
    counts = [int(v) for v in histogram["counts"]]
    if len(edges) != len(counts) + 1 or not counts:
        raise ValueError("Histogram needs one more edge than counts and at least one bin.")

    width, height = 640, 420
    left, right, top, bottom = 70, 20, 70, 60
    chart_w = width - left - right
    chart_h = height - top - bottom
    peak = max(max(counts), 1)
    bar_w = chart_w / len(counts)

    parts = _svg_open(width, height)
    parts.append(
        f'<text x="{_num(width / 2)}" y="30" text-anchor="middle" font-size="18" '
        f'font-weight="bold" fill="#333">{escape(title)}</text>'
    )
    stats = [
        f"{label} {histogram[key]:.3f}"
        for label, key in (("mean", "mean"), ("median", "median"), ("p10", "p10"), ("p90", "p90"))
        if histogram.get(key) is not None
    ]
    if stats:
        parts.append(
            f'<text x="{_num(width / 2)}" y="52" text-anchor="middle" font-size="12" '
            f'fill="#666">{escape(", ".join(stats))} {escape(unit)}</text>'
        )
    base_y = top + chart_h
    parts.append(
        f'<line x1="{left}" y1="{base_y}" x2="{left + chart_w}" y2="{base_y}" '
        'stroke="#ccc" stroke-width="2"/>'
    )
    parts.append(
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{base_y}" stroke="#ccc" stroke-width="2"/>'
    )
    for i, count in enumerate(counts):
        if count == 0:
            continue
        bar_h = count / peak * chart_h
        x = left + i * bar_w
        parts.append(
            f'<rect class="bar" x="{_num(x + 1)}" y="{_num(base_y - bar_h)}" '
            f'width="{_num(max(bar_w - 2, 1))}" height="{_num(bar_h)}" fill="{BAR_COLOR}"/>'
        )
        parts.append(
            f'<text x="{_num(x + bar_w / 2)}" y="{_num(base_y - bar_h - 5)}" '
            f'text-anchor="middle" font-size="11" fill="#333">{count}</text>'
        )
    for x, edge in ((left, edges[0]), (left + chart_w, edges[-1])):
        parts.append(
            f'<text x="{_num(x)}" y="{base_y + 20}" text-anchor="middle" font-size="11" '
            f'fill="#333">{edge:.3f}</text>'
        )
    parts.append(
        f'<text x="{_num(left + chart_w / 2)}" y="{height - 15}" text-anchor="middle" '
        f'font-size="13" fill="#666">Change in daily emissions ({escape(unit)})</text>'
    )
    parts.append(
        f'<text x="-{_num(top + chart_h / 2)}" y="25" transform="rotate(-90)" '
        'text-anchor="middle" font-size="13" fill="#666">Days</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def bus_layout(network: Network) -> Dict[int, Tuple[float, float]]:
    """Bus coordinates scaled to the unit square.

    ``bus_geo`` is used when it covers every bus; otherwise buses sit on a
    circle in id order.
    """
    bus_ids = network.bus_ids
    if bus_ids and all(bus in network.bus_geo for bus in bus_ids):
        raw = {bus: tuple(map(float, network.bus_geo[bus])) for bus in bus_ids}
    else:
        graph = nx.Graph()
        graph.add_nodes_from(bus_ids)
        raw = {bus: (float(p[0]), float(p[1])) for bus, p in nx.circular_layout(graph).items()}

    xs = [p[0] for p in raw.values()]
    ys = [p[1] for p in raw.values()]
    span = max(max(xs) - min(xs), max(ys) - min(ys), 1e-12) if raw else 1.0
    # screen y grows downward
    return {
        bus: ((x - min(xs)) / span, (max(ys) - y) / span) for bus, (x, y) in raw.items()
    }


def _value_range(panels: Mapping[str, Mapping[int, float]]) -> Tuple[float, float]:
    finite = [
        v
        for values in panels.values()
        for v in values.values()
        if v is not None and not math.isnan(v)
    ]
    if not finite:
        return 0.0, 1.0
    return min(finite), max(finite)


def _legend(x: float, y: float, low: float, high: float, unit: str) -> List[str]:
    width, height = 240, 14
    stops = "".join(
        f'<stop offset="{_num(100 * k / (len(COLOR_RAMP) - 1))}%" stop-color="{color}"/>'
        for k, color in enumerate(COLOR_RAMP)
    )
    return [
        f'<defs><linearGradient id="ramp" x1="0%" y1="0%" x2="100%" y2="0%">{stops}'
        "</linearGradient></defs>",
        f'<rect class="legend" x="{_num(x)}" y="{_num(y)}" width="{width}" height="{height}" '
        'fill="url(#ramp)" stroke="#666"/>',
        f'<text x="{_num(x)}" y="{_num(y + height + 14)}" font-size="11" fill="#333">'
        f"{low:.3f}</text>",
        f'<text x="{_num(x + width)}" y="{_num(y + height + 14)}" text-anchor="end" '
        f'font-size="11" fill="#333">{high:.3f}</text>',
        f'<text x="{_num(x + width / 2)}" y="{_num(y + height + 14)}" text-anchor="middle" '
        f'font-size="11" fill="#666">{escape(unit)}</text>',
    ]


def _panel(
    network: Network,
    layout: Mapping[int, Tuple[float, float]],
    name: str,
    values: Mapping[int, float],
    origin: Tuple[float, float],
    low: float,
    high: float,
) -> List[str]:
    ox, oy = origin
    inner = PANEL_SIZE - 2 * PANEL_MARGIN

    def at(bus: int) -> Tuple[float, float]:
        x, y = layout[bus]
        return ox + PANEL_MARGIN + x * inner, oy + PANEL_MARGIN + y * inner

    parts = [
        f'<g class="panel" id="panel-{escape(name)}">',
        f'<text x="{_num(ox + PANEL_SIZE / 2)}" y="{_num(oy + 20)}" text-anchor="middle" '
        f'font-size="14" font-weight="bold" fill="#333">{escape(name.upper())}</text>',
    ]
    for line in network.lines:
        x1, y1 = at(line.from_bus)
        x2, y2 = at(line.to_bus)
        parts.append(
            f'<line x1="{_num(x1)}" y1="{_num(y1)}" x2="{_num(x2)}" y2="{_num(y2)}" '
            f'stroke="{LINE_COLOR}" stroke-width="1.5"/>'
        )

    datacenters = set(network.datacenter_buses())
    for bus in network.bus_ids:
        x, y = at(bus)
        value = values.get(bus, math.nan)
        value = math.nan if value is None else value
        stroke = (
            f'stroke="{DATACENTER_COLOR}" stroke-width="3"'
            if bus in datacenters
            else 'stroke="#333" stroke-width="1"'
        )
        label = "n/a" if math.isnan(value) else f"{value:.3f}"
        parts.append(
            f'<circle class="bus" cx="{_num(x)}" cy="{_num(y)}" r="{BUS_RADIUS}" '
            f'fill="{ramp_color(value, low, high)}" {stroke}>'
            f"<title>bus {bus}: {label}</title></circle>"
        )
        parts.append(
            f'<text x="{_num(x)}" y="{_num(y - BUS_RADIUS - 4)}" text-anchor="middle" '
            f'font-size="10" fill="#333">{bus}</text>'
        )

    placed: Dict[int, int] = {}
    for gen in network.generators:
        if not gen.in_service:
            continue
        k = placed.get(gen.bus, 0)
        placed[gen.bus] = k + 1
        x, y = at(gen.bus)
        gx = x + BUS_RADIUS + 3 + k * (GEN_SIZE + 2)
        gy = y + BUS_RADIUS - GEN_SIZE
        parts.append(
            f'<rect class="gen" x="{_num(gx)}" y="{_num(gy)}" width="{GEN_SIZE}" '
            f'height="{GEN_SIZE}" fill="{ramp_color(gen.emission_intensity, low, high)}" '
            f'stroke="#333" stroke-width="0.5"><title>gen {gen.id}: '
            f"{gen.emission_intensity:.4f}</title></rect>"
        )
    parts.append("</g>")
    return parts


def network_svg(
    network: Network,
    panels: Mapping[str, Mapping[int, float]],
    title: str = "",
    unit: str = "tCO2/MWh",
    columns: Optional[int] = None,
) -> str:
    """One network map per metric with buses colored on a shared scale.

    Args:
        network: Supplies the topology, generators and datacenter buses
        panels: Metric name to per-bus value, drawn in the given order
        title: Figure title
        columns: Panels per row; two when there is more than one panel
    """
    if not panels:
        raise ValueError("At least one panel is required.")
    names: Sequence[str] = list(panels)
    columns = columns or (1 if len(names) == 1 else 2)
    rows = math.ceil(len(names) / columns)
    header, footer = 40, 60
    width = max(columns * PANEL_SIZE, 320)
    height = header + rows * PANEL_SIZE + footer

    low, high = _value_range(panels)
    layout = bus_layout(network)
    parts = _svg_open(width, height)
    parts.append(
        f'<text x="{_num(width / 2)}" y="26" text-anchor="middle" font-size="18" '
        f'font-weight="bold" fill="#333">{escape(title)}</text>'
    )
    for k, name in enumerate(names):
        origin = ((k % columns) * PANEL_SIZE, header + (k // columns) * PANEL_SIZE)
        parts.extend(_panel(network, layout, name, panels[name], origin, low, high))
    parts.extend(_legend((width - 240) / 2, height - footer + 12, low, high, unit))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


__all__ = [
    "COLOR_RAMP",
    "ramp_color",
    "histogram_svg",
    "bus_layout",
    "network_svg",
]
