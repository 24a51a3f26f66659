"""Run-directory reports: aggregate metrics and plot them as SVG.

A report scans a run directory for metrics files (metrics*.csv), merges
them by (task, model), and writes one aggregate CSV per task plus one
SVG per (task, k) plotting relative error against c, one series per
model.  The error axis is log-scaled; zero errors are clamped to the
axis floor.  The SVG emitter uses fixed number formatting throughout,
so identical inputs produce identical bytes.
"""

import csv
import io
import math
import os
from pathlib import Path

from .experiments import ReTable, read_metrics_csv
from .util import write_atomic

REPORT_COLUMNS = ("task", "model", "k", "c", "median_re", "mean_re")

_PALETTE = ("#1f6fb4", "#d1495b", "#2e8b57", "#9467bd", "#e0a10e", "#4b5563")

Y_FLOOR = 1e-12


def collect_metrics(run_dir):
    """Merge every metrics*.csv under run_dir into (task, model) tables."""
    files = sorted(Path(run_dir).rglob("metrics*.csv"))
    if not files:
        raise ValueError("no metrics*.csv files under %s" % (run_dir,))
    groups = {}
    for path in files:
        for task, model, table in read_metrics_csv(path):
            groups.setdefault((task, model), ReTable()).merge(table)
    return groups


def _fmt(v):
    return "%.2f" % v


def _axis_decades(lo, hi):
    lo_e = math.floor(math.log10(lo))
    hi_e = math.ceil(math.log10(hi))
    if hi_e <= lo_e:
        hi_e = lo_e + 1
    return lo_e, hi_e


def svg_plot(series, title, x_label="c", y_label="relative error",
             width=640, height=420):
    """Line plot with a log-scaled y axis, rendered to an SVG string.

    series is a list of (label, points) with points as (x, y) pairs in
    drawing order; y values are clamped to Y_FLOOR before the log.
    """
    if not series or not any(pts for _, pts in series):
        raise ValueError("nothing to plot")
    left, right, top, bottom = 70.0, 20.0, 36.0, 46.0
    pw = width - left - right
    ph = height - top - bottom

    xs = [x for _, pts in series for x, _ in pts]
    ys = [max(y, Y_FLOOR) for _, pts in series for _, y in pts]
    x_lo, x_hi = min(xs), max(xs)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    e_lo, e_hi = _axis_decades(min(ys), max(ys))

    def px(x):
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        e = math.log10(max(y, Y_FLOOR))
        return top + (e_hi - e) / (e_hi - e_lo) * ph

    out = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
        'viewBox="0 0 %d %d">' % (width, height, width, height),
        '<rect width="%d" height="%d" fill="white"/>' % (width, height),
        '<text x="%s" y="22" font-family="sans-serif" font-size="14" '
        'text-anchor="middle">%s</text>' % (_fmt(left + pw / 2), title),
    ]

    # y decades: gridline, tick label 10^e
    step = 1 if e_hi - e_lo <= 8 else 2
    for e in range(e_lo, e_hi + 1, step):
        y = py(10.0 ** e)
        out.append('<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="#dddddd"/>'
                   % (_fmt(left), _fmt(y), _fmt(left + pw), _fmt(y)))
        out.append('<text x="%s" y="%s" font-family="sans-serif" font-size="11" '
                   'text-anchor="end">1e%d</text>'
                   % (_fmt(left - 6), _fmt(y + 4), e))

    # x ticks at integer steps
    span = x_hi - x_lo
    x_step = max(1, int(round(span / 6)))
    tick = int(math.ceil(x_lo))
    while tick <= x_hi:
        x = px(tick)
        out.append('<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="#dddddd"/>'
                   % (_fmt(x), _fmt(top), _fmt(x), _fmt(top + ph)))
        out.append('<text x="%s" y="%s" font-family="sans-serif" font-size="11" '
                   'text-anchor="middle">%d</text>'
                   % (_fmt(x), _fmt(top + ph + 16), tick))
        tick += x_step

    # frame and axis labels
    out.append('<rect x="%s" y="%s" width="%s" height="%s" fill="none" '
               'stroke="#333333"/>' % (_fmt(left), _fmt(top), _fmt(pw), _fmt(ph)))
    out.append('<text x="%s" y="%s" font-family="sans-serif" font-size="12" '
               'text-anchor="middle">%s</text>'
               % (_fmt(left + pw / 2), _fmt(height - 10), x_label))
    out.append('<text x="16" y="%s" font-family="sans-serif" font-size="12" '
               'text-anchor="middle" transform="rotate(-90 16 %s)">%s</text>'
               % (_fmt(top + ph / 2), _fmt(top + ph / 2), y_label))

    for i, (label, pts) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join("%s,%s" % (_fmt(px(x)), _fmt(py(max(y, Y_FLOOR))))
                          for x, y in pts)
        out.append('<polyline points="%s" fill="none" stroke="%s" '
                   'stroke-width="1.5"/>' % (coords, color))
        ly = top + 14 + 16 * i
        out.append('<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="%s" '
                   'stroke-width="1.5"/>'
                   % (_fmt(left + pw - 120), _fmt(ly), _fmt(left + pw - 100),
                      _fmt(ly), color))
        out.append('<text x="%s" y="%s" font-family="sans-serif" '
                   'font-size="11">%s</text>'
                   % (_fmt(left + pw - 94), _fmt(ly + 4), label))

    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_report(run_dir, out_dir, svg=True, ks=None):
    """Aggregate a run directory into CSV tables and per-(task, k) plots.

    Returns the list of written paths.  ks, when given, restricts which
    k values get an SVG.
    """
    groups = collect_metrics(run_dir)
    os.makedirs(out_dir, exist_ok=True)
    tasks = sorted({task for task, _ in groups})
    written = []
    for task in tasks:
        models = sorted(model for t, model in groups if t == task)
        per_model = {model: groups[(task, model)].per_point() for model in models}

        buf = io.StringIO(newline="")
        writer = csv.writer(buf)
        writer.writerow(REPORT_COLUMNS)
        for model in models:
            for (k, c), (med, mean) in sorted(per_model[model].items()):
                writer.writerow((task, model, k, c, "%.12g" % med, "%.12g" % mean))
        csv_path = os.path.join(out_dir, "re_%s.csv" % task)
        write_atomic(csv_path, buf.getvalue())
        written.append(csv_path)

        if not svg:
            continue
        k_values = sorted({k for pts in per_model.values() for (k, _) in pts})
        if ks is not None:
            k_values = [k for k in k_values if k in set(ks)]
        for k in k_values:
            series = []
            for model in models:
                pts = sorted((c, med) for (kk, c), (med, _) in
                             per_model[model].items() if kk == k)
                if pts:
                    series.append((model, pts))
            if not series:
                continue
            path = os.path.join(out_dir, "re_%s_k%d.svg" % (task, k))
            write_atomic(path, svg_plot(series, "%s, k=%d" % (task, k)))
            written.append(path)
    return written
