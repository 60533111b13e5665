"""CSV and SVG output, and single-column CSV input.

Every CSV starts with one ``#`` comment line documenting its columns,
followed by a header row. Readers skip ``#`` lines.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import DomainError


def fmt(x) -> str:
    """Locale-free, round-trippable formatting."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "NA"
        return repr(x)
    return str(x)


def write_csv(path, doc: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write(f"# {doc}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_rows(path) -> list[dict[str, str]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc.strerror}") from None
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        return []
    return list(csv.DictReader(lines))


def read_column(path, column: str) -> np.ndarray:
    text_rows = read_rows(path)
    if text_rows and column not in text_rows[0]:
        raise DomainError(f"{path}: missing required column {column!r}")
    try:
        return np.array([float(r[column]) for r in text_rows], dtype=float)
    except ValueError as exc:
        raise DomainError(f"{path}: non-numeric value in column {column!r}: {exc}") from None


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def write_svg(path, title: str, xlabel: str, ylabel: str,
              series: dict[str, tuple[Sequence[float], Sequence[float]]],
              log_x: bool = False, width: int = 640, height: int = 400) -> Path:
    """Line plot with axes, min/max tick labels and a legend."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pts = {k: [(float(x), float(y)) for x, y in zip(*v) if math.isfinite(float(y))]
           for k, v in series.items()}
    tx = (lambda x: math.log10(x)) if log_x else (lambda x: x)
    xs = [tx(x) for p in pts.values() for x, _ in p]
    ys = [y for p in pts.values() for _, y in p]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y0, y1 = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    ml, mr, mt, mb = 70, 150, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def px(x):
        return ml + (tx(x) - x0) / (x1 - x0) * pw

    def py(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{ml}" y="20" font-size="14">{title}</text>',
           f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>',
           f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{xlabel}</text>',
           f'<text x="15" y="{mt + ph / 2:.1f}" transform="rotate(-90 15 {mt + ph / 2:.1f})" '
           f'text-anchor="middle">{ylabel}</text>']
    lab = (lambda v: f"{10 ** v:.4g}") if log_x else (lambda v: f"{v:.4g}")
    out += [f'<text x="{ml}" y="{mt + ph + 16}" text-anchor="middle">{lab(x0)}</text>',
            f'<text x="{ml + pw}" y="{mt + ph + 16}" text-anchor="middle">{lab(x1)}</text>',
            f'<text x="{ml - 5}" y="{mt + ph}" text-anchor="end">{y0:.4g}</text>',
            f'<text x="{ml - 5}" y="{mt + 4}" text-anchor="end">{y1:.4g}</text>']
    for i, (name, p) in enumerate(pts.items()):
        color = _PALETTE[i % len(_PALETTE)]
        if p:
            d = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in p)
            out.append(f'<polyline points="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = mt + 15 * i + 10
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly}" x2="{ml + pw + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 35}" y="{ly + 4}">{name}</text>')
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path
