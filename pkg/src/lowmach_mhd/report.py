"""CSV tables and a dependency-free log-log SVG chart."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .asymptotics import RateFit

SWEEP_COLUMNS = ("eps", "s", "sup_error", "sup_error_canonical", "max_residual_over_eps", "achieved_T")
RATE_COLUMNS = ("label", "points", "slope", "K", "max_residual")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Mapping]) -> Path:
    """Header plus one line per row, columns in the given order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])
    return path


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def rate_row(fit: RateFit, label: str) -> dict:
    return {"label": label, "points": len(fit.eps_list), "slope": fit.slope, "K": fit.K,
            "max_residual": fit.max_residual}


def svg_loglog(path: str | Path, eps: Sequence[float], errors: Sequence[float], fit: RateFit | None,
               title: str = "error vs eps", width: int = 480, height: int = 360) -> Path:
    """Log-log chart of error against eps, with the fitted line and a slope-1 reference."""
    W, H, pad = width, height, 56
    xs = [math.log10(e) for e in eps]
    ys = [math.log10(v) for v in errors]
    lines: list[tuple[str, list[tuple[float, float]]]] = []
    if fit is not None:
        fx = [min(xs), max(xs)]
        lines.append(("#c0392b", [(x, math.log10(fit.K) + fit.slope * x) for x in fx]))
        # slope-1 reference through the smallest-eps point
        x0 = min(xs)
        y0 = ys[xs.index(x0)]
        lines.append(("#7f8c8d", [(x, y0 + (x - x0)) for x in fx]))
    all_y = ys + [p[1] for _, pts in lines for p in pts]
    x_lo, x_hi = min(xs) - 0.05, max(xs) + 0.05
    y_lo, y_hi = min(all_y) - 0.1, max(all_y) + 0.1

    def px(x, y):
        return (pad + (x - x_lo) / (x_hi - x_lo) * (W - 2 * pad),
                H - pad - (y - y_lo) / (y_hi - y_lo) * (H - 2 * pad))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
           f'<rect x="{pad}" y="{pad}" width="{W - 2 * pad}" height="{H - 2 * pad}" fill="none" stroke="black"/>']
    for e in eps:
        x, _ = px(math.log10(e), y_lo)
        out.append(f'<text x="{x:.1f}" y="{H - pad + 16}" text-anchor="middle" font-size="10">{e:g}</text>')
    for k in range(math.floor(y_lo), math.ceil(y_hi) + 1):
        if y_lo <= k <= y_hi:
            _, y = px(x_lo, k)
            out.append(f'<text x="{pad - 6}" y="{y + 3:.1f}" text-anchor="end" font-size="10">1e{k}</text>')
    out.append(f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle" font-size="12">eps</text>')
    for color, pts in lines:
        (x1, y1), (x2, y2) = px(*pts[0]), px(*pts[1])
        out.append(f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y2:.1f}" stroke="{color}" stroke-width="1.5"/>')
    for x, y in zip(xs, ys):
        cx, cy = px(x, y)
        out.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="4" fill="#2c3e50"/>')
    if fit is not None:
        out.append(f'<text x="{pad + 8}" y="{pad + 16}" font-size="11" fill="#c0392b">fit slope {fit.slope:.3f}</text>')
        out.append(f'<text x="{pad + 8}" y="{pad + 30}" font-size="11" fill="#7f8c8d">reference slope 1</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path
