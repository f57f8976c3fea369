"""
SVG rendering of a fleet plan.

One unit is one meter; y is flipped so that north points up on screen.
Air-frame paths are drawn with exact line and arc commands. Under wind the
ground tracks are drawn as dense polylines, since a drifting arc is no
longer a circle. Discs of radius delta/2 mark each aircraft at the instants
the conflict screen samples: two discs overlap exactly when separation is
lost there.
"""

import logging
import math
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from jinja2 import Environment, select_autoescape

from .dubins_core import FleetPath, LinePrimitive, sample_positions
from .separation import screen_times

logger = logging.getLogger(__name__)

PALETTE = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
]
GROUND_TRACK_SAMPLES = 400
MARGIN = 0.05

SVG_TEMPLATE = """<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" viewBox="{{ view_box }}" width="{{ width_px }}" height="{{ height_px }}">
  {% if title %}<title>{{ title }}</title>{% endif %}
  <rect x="{{ bounds[0] }}" y="{{ bounds[1] }}" width="{{ bounds[2] }}" height="{{ bounds[3] }}" fill="white"/>
  {% for track in tracks %}
  <g id="aircraft-{{ loop.index0 }}" stroke="{{ track.color }}" fill="{{ track.color }}">
    <path d="{{ track.d }}" fill="none" stroke-width="{{ stroke }}"/>
    {% for disc in track.discs %}
    <circle cx="{{ disc[0] }}" cy="{{ disc[1] }}" r="{{ disc_radius }}" fill-opacity="0.12" stroke-width="{{ disc_stroke }}"/>
    {% endfor %}
  </g>
  {% endfor %}
</svg>
"""

_environment = Environment(autoescape=select_autoescape(default=True, default_for_string=True))
_template = _environment.from_string(SVG_TEMPLATE)


def _fmt(value: float) -> str:
    return f"{value:.9f}"


def _point(z: complex) -> str:
    return f"{_fmt(z.real)} {_fmt(-z.imag)}"


def path_data(path: FleetPath) -> str:
    """SVG path commands for the air-frame path (arcs split into quarter turns at most)"""
    commands = [f"M {_point(path.start.position)}"]
    for primitive in path.primitives:
        if primitive.duration <= 0.0:
            continue
        if isinstance(primitive, LinePrimitive):
            commands.append(f"L {_point(primitive.end_position())}")
            continue
        pieces = max(1, math.ceil(abs(primitive.sweep) / (math.pi / 2)))
        sweep_flag = 0 if primitive.angular_rate > 0 else 1
        radius = _fmt(primitive.radius)
        for piece in range(1, pieces + 1):
            end = primitive.position(primitive.duration * piece / pieces)
            commands.append(f"A {radius} {radius} 0 0 {sweep_flag} {_point(end)}")
    return " ".join(commands)


def _polyline(points: np.ndarray) -> str:
    head, *rest = points
    return " ".join([f"M {_point(head)}"] + [f"L {_point(z)}" for z in rest])


def render_svg(
    paths: Sequence[FleetPath],
    delta: float,
    wind: complex = 0j,
    disc_times: Optional[Sequence[float]] = None,
    title: str = "",
    width_px: int = 900,
) -> str:
    """SVG document showing every path with delta/2 discs at the screening instants"""
    if not paths:
        raise ValueError("Nothing to render")
    wind = complex(wind)
    horizon = min(path.duration for path in paths)
    if disc_times is None:
        disc_times = screen_times(horizon)
    disc_times = np.asarray(disc_times, dtype=float)

    tracks = []
    all_points: List[np.ndarray] = []
    for k, path in enumerate(paths):
        dense_times = np.linspace(0.0, path.duration, GROUND_TRACK_SAMPLES)
        dense = sample_positions(path, dense_times) + wind * dense_times
        discs = sample_positions(path, disc_times) + wind * disc_times
        d = path_data(path) if wind == 0 else _polyline(dense)
        tracks.append({
            "color": PALETTE[k % len(PALETTE)],
            "d": d,
            "discs": [(_fmt(z.real), _fmt(-z.imag)) for z in discs],
        })
        all_points.extend([dense, discs])

    points = np.concatenate(all_points)
    pad = delta / 2.0
    min_x, max_x = points.real.min() - pad, points.real.max() + pad
    min_y, max_y = -points.imag.max() - pad, -points.imag.min() + pad
    span_x, span_y = max_x - min_x, max_y - min_y
    min_x -= MARGIN * span_x
    min_y -= MARGIN * span_y
    span_x *= 1.0 + 2.0 * MARGIN
    span_y *= 1.0 + 2.0 * MARGIN

    bounds = (_fmt(min_x), _fmt(min_y), _fmt(span_x), _fmt(span_y))
    return _template.render(
        view_box=" ".join(bounds),
        bounds=bounds,
        width_px=width_px,
        height_px=int(round(width_px * span_y / span_x)),
        title=title,
        tracks=tracks,
        stroke=_fmt(max(span_x, span_y) / 400.0),
        disc_stroke=_fmt(max(span_x, span_y) / 800.0),
        disc_radius=_fmt(delta / 2.0),
    )


def write_svg(path: Path, paths: Sequence[FleetPath], delta: float, wind: complex = 0j, title: str = "",
              disc_times: Optional[Sequence[float]] = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_svg(paths, delta, wind=wind, disc_times=disc_times, title=title), encoding="utf-8")
    logger.info(f"Wrote {path}")
