"""SVG figures rendered purely from the CSV files the commands write."""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

from .csvio import read_rows, write_svg


def _f(x: str) -> float:
    return math.nan if x in ("NA", "") else float(x)


def _series_label(r: dict) -> str:
    if r["mechanism"] == "nonprivate":
        return "nonprivate"
    return f"{r['mechanism']} a={r['renyi_alpha']} e={r['epsilon']}"


def render_ci(csv_path, svg_path) -> Path:
    """Mean interval width against n, one line per (mechanism, budget)."""
    acc = defaultdict(lambda: defaultdict(list))
    for r in read_rows(csv_path):
        if r["status"] == "N/A":
            continue
        acc[_series_label(r)][int(r["n"])].append(_f(r["width"]))
    series = {k: (sorted(v), [sum(v[n]) / len(v[n]) for n in sorted(v)]) for k, v in acc.items()}
    return write_svg(svg_path, "Confidence set width", "n", "mean width", series, log_x=True)


def render_monitor(csv_path, svg_path) -> Path:
    """Cumulative log e-value per batch for the first repetition."""
    acc = defaultdict(lambda: ([], []))
    for r in read_rows(csv_path):
        if r["rep"] != "0":
            continue
        xs, ys = acc[_series_label(r)]
        xs.append(int(r["batch_index"]))
        ys.append(_f(r["cumulative_log_e"]))
    return write_svg(svg_path, "Running log e-value", "batch", "log e", dict(acc))


def render_conformal(csv_path, svg_path) -> Path:
    """Mean prediction-set size against epsilon, one line per (mechanism, order)."""
    acc = defaultdict(lambda: defaultdict(list))
    base = []
    for r in read_rows(csv_path):
        if r["status"] != "ok":
            continue
        if r["mechanism"] == "nonprivate":
            base.append(_f(r["avg_size"]))
            continue
        acc[f"{r['mechanism']} a={r['renyi_alpha']}"][_f(r["epsilon"])].append(_f(r["avg_size"]))
    series = {k: (sorted(v), [sum(v[e]) / len(v[e]) for e in sorted(v)]) for k, v in acc.items()}
    eps = sorted({e for v in acc.values() for e in v})
    if base and eps:
        m = sum(base) / len(base)
        series["nonprivate"] = (eps, [m] * len(eps))
    return write_svg(svg_path, "Prediction set size", "epsilon", "mean set size", series,
                     log_x=True)


RENDERERS = {"ci": render_ci, "monitor": render_monitor, "conformal": render_conformal}
