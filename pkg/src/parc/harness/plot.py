"""Minimal SVG line charts for training curves (no plotting dependency)."""

from __future__ import annotations

from xml.sax.saxutils import escape

from ..hppo import TrainStats

COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]
PANEL_W, PANEL_H, MARGIN = 460, 260, 50


def average_curves(runs: list[list[TrainStats]]) -> list[tuple[int, float, float]]:
    """Per-iteration mean over runs, cut to the shortest run."""
    n = min(len(r) for r in runs)
    out = []
    for i in range(n):
        rows = [r[i] for r in runs]
        out.append((rows[0].iteration, sum(x.success_rate for x in rows) / len(rows),
                    sum(x.mean_ep_reward for x in rows) / len(rows)))
    return out


def _panel(x0: float, title: str, curves: dict[str, list[tuple[float, float]]]) -> list[str]:
    pts = [p for c in curves.values() for p in c]
    xs = [p[0] for p in pts] or [0.0]
    ys = [p[1] for p in pts] or [0.0]
    xmin, xmax = min(xs), max(xs)
    ymin, ymax = min(ys), max(ys)
    if xmax == xmin:
        xmax = xmin + 1
    if ymax == ymin:
        ymin, ymax = ymin - 0.5, ymax + 0.5
    w, h = PANEL_W - 2 * MARGIN, PANEL_H - 2 * MARGIN

    def sx(x):
        return x0 + MARGIN + (x - xmin) / (xmax - xmin) * w

    def sy(y):
        return MARGIN + h - (y - ymin) / (ymax - ymin) * h

    out = [
        f'<rect x="{x0 + MARGIN}" y="{MARGIN}" width="{w}" height="{h}" fill="none" stroke="#444"/>',
        f'<text x="{x0 + PANEL_W / 2}" y="{MARGIN - 15}" text-anchor="middle">{escape(title)}</text>',
        f'<text x="{x0 + PANEL_W / 2}" y="{PANEL_H - 12}" text-anchor="middle">iteration</text>',
        f'<text x="{x0 + MARGIN - 5}" y="{MARGIN + h}" text-anchor="end">{ymin:.3g}</text>',
        f'<text x="{x0 + MARGIN - 5}" y="{MARGIN + 10}" text-anchor="end">{ymax:.3g}</text>',
        f'<text x="{x0 + MARGIN}" y="{MARGIN + h + 15}" text-anchor="middle">{xmin:g}</text>',
        f'<text x="{x0 + MARGIN + w}" y="{MARGIN + h + 15}" text-anchor="middle">{xmax:g}</text>',
    ]
    for i, (label, c) in enumerate(curves.items()):
        color = COLORS[i % len(COLORS)]
        path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in c)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>')
        out.append(f'<text x="{x0 + MARGIN + 8}" y="{MARGIN + 16 + 14 * i}" fill="{color}">{escape(label)}</text>')
    return out


def render_svg(curves: dict[str, list[tuple[int, float, float]]]) -> str:
    """Two panels: trailing success rate and trailing mean episode reward."""
    succ = {k: [(it, s) for it, s, _ in v] for k, v in curves.items()}
    rew = {k: [(it, r) for it, _, r in v] for k, v in curves.items()}
    body = _panel(0, "success rate (trailing window)", succ) + _panel(PANEL_W, "mean episode reward", rew)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{2 * PANEL_W}" height="{PANEL_H}" '
            f'font-family="sans-serif" font-size="11">\n<rect width="100%" height="100%" fill="white"/>\n'
            + "\n".join(body) + "\n</svg>\n")
