"""Hand-emitted SVG line charts for sweep curves (no plotting dependency).

Output is plain deterministic text: three rate series against component count
with a vertical marker at the selected operating point.
"""

from __future__ import annotations

WIDTH = 640
HEIGHT = 400
MARGIN_LEFT = 56
MARGIN_RIGHT = 150
MARGIN_TOP = 40
MARGIN_BOTTOM = 48

SERIES_COLORS = {
    "accuracy": "#1f77b4",
    "recall": "#d62728",
    "specificity": "#2ca02c",
}


def _x(k: float, k_min: int, k_max: int) -> float:
    span = max(k_max - k_min, 1)
    inner = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    return MARGIN_LEFT + (k - k_min) / span * inner


def _y(rate: float) -> float:
    inner = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    return MARGIN_TOP + (1.0 - rate) * inner


def sweep_chart(
    title: str,
    component_counts: list[int],
    series: dict[str, list[float]],
    c0: int | None = None,
) -> str:
    """Render rate-vs-component-count polylines with an optional C0 marker."""
    k_min, k_max = component_counts[0], component_counts[-1]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{title}</text>',
    ]
    # horizontal gridlines and y tick labels at 0, 0.25, ..., 1
    x0, x1 = _x(k_min, k_min, k_max), _x(k_max, k_min, k_max)
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = _y(tick)
        parts.append(
            f'<line x1="{x0:.1f}" y1="{y:.1f}" x2="{x1:.1f}" y2="{y:.1f}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x0 - 8:.1f}" y="{y + 4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{tick:.2f}</text>'
        )
    # x ticks on integer component counts (thinned when the sweep is long)
    step = max(1, (k_max - k_min) // 10)
    for k in range(k_min, k_max + 1, step):
        x = _x(k, k_min, k_max)
        y_axis = _y(0.0)
        parts.append(
            f'<line x1="{x:.1f}" y1="{y_axis:.1f}" x2="{x:.1f}" y2="{y_axis + 4:.1f}" '
            f'stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x:.1f}" y="{y_axis + 18:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{k}</text>'
        )
    parts.append(
        f'<text x="{(x0 + x1) / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">components</text>'
    )
    if c0 is not None:
        x = _x(c0, k_min, k_max)
        parts.append(
            f'<line x1="{x:.1f}" y1="{_y(1.0):.1f}" x2="{x:.1f}" y2="{_y(0.0):.1f}" '
            f'stroke="#888888" stroke-width="1.5" stroke-dasharray="5,3"/>'
        )
        parts.append(
            f'<text x="{x + 4:.1f}" y="{_y(1.0) - 6:.1f}" font-family="sans-serif" '
            f'font-size="11">C0={c0}</text>'
        )
    legend_y = MARGIN_TOP + 10
    for name, values in series.items():
        color = SERIES_COLORS.get(name, "#333333")
        pts = " ".join(
            f"{_x(k, k_min, k_max):.1f},{_y(v):.1f}" for k, v in zip(component_counts, values)
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        lx = WIDTH - MARGIN_RIGHT + 12
        parts.append(
            f'<line x1="{lx}" y1="{legend_y}" x2="{lx + 22}" y2="{legend_y}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{lx + 28}" y="{legend_y + 4}" font-family="sans-serif" '
            f'font-size="12">{name}</text>'
        )
        legend_y += 18
    # axes drawn last so they sit on top of the gridlines
    parts.append(
        f'<line x1="{x0:.1f}" y1="{_y(1.0):.1f}" x2="{x0:.1f}" y2="{_y(0.0):.1f}" '
        f'stroke="#333333" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{x0:.1f}" y1="{_y(0.0):.1f}" x2="{x1:.1f}" y2="{_y(0.0):.1f}" '
        f'stroke="#333333" stroke-width="1"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
