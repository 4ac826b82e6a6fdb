"""CSV output and static SVG plots for sweep and phase-diagram results."""

import csv
import math
import xml.etree.ElementTree as ET
from dataclasses import asdict, is_dataclass

import numpy as np

from .exceptions import ContractViolation, OutputError, PlotError

SCHEMAS = {
    "sweep": ("algo", "n", "m", "k", "sigma", "trials", "mean_error", "std_error",
              "mean_time_seconds", "mean_correlation", "success_rate"),
    "phase": ("algo", "delta", "rho", "n", "m", "k", "trials", "success_rate"),
    "trial": ("algo", "n", "m", "k", "sigma", "trial_index", "seed", "recovery_error",
              "covariance", "correlation", "elapsed_seconds", "success", "converged"),
}

# columns that hold wall-clock measurements and so differ between runs
TIMING_COLUMNS = frozenset({"mean_time_seconds", "elapsed_seconds"})

_INT_COLUMNS = frozenset({"n", "m", "k", "trials", "trial_index", "seed"})
_BOOL_COLUMNS = frozenset({"success", "converged"})

# fixed per-algorithm colors, in the order bp, grades, omp, iht, laplace, rvm
ALGO_COLORS = {
    "bp": "#1f77b4",
    "grades": "#ff7f0e",
    "omp": "#2ca02c",
    "iht": "#d62728",
    "laplace": "#9467bd",
    "rvm": "#8c564b",
}
_FALLBACK_COLORS = ("#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
PHASE_SHADE = "#08306b"


def format_value(value):
    """Render one CSV field: reals at 9 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.9g}"
    return str(value)


def _as_dict(record):
    if is_dataclass(record):
        return asdict(record)
    return dict(record)


def write_csv(records, schema, path):
    """Write ``records`` under ``schema`` ("sweep", "phase" or "trial").

    Header first, LF line endings, identical bytes for identical records.
    """
    if schema not in SCHEMAS:
        raise ContractViolation(f"unknown CSV schema {schema!r}")
    columns = SCHEMAS[schema]
    rows = []
    for rec in records:
        d = _as_dict(rec)
        missing = [c for c in columns if c not in d]
        if missing:
            raise ContractViolation(f"record lacks column(s) {', '.join(missing)} for {schema} schema")
        rows.append([format_value(d[c]) for c in columns])
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            writer.writerows(rows)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _parse(column, text):
    if column in _BOOL_COLUMNS:
        return text == "true"
    if column in _INT_COLUMNS:
        return int(text)
    if column == "algo":
        return text
    return float(text)


def read_csv(path, schema):
    """Read a file written by :func:`write_csv` back into typed dicts."""
    columns = SCHEMAS[schema]
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != columns:
            raise ContractViolation(f"{path}: header does not match the {schema} schema")
        return [{c: _parse(c, v) for c, v in zip(columns, row)} for row in reader]


# ---------------------------------------------------------------------------
# SVG helpers
# ---------------------------------------------------------------------------

_SVG_NS = "http://www.w3.org/2000/svg"


def _svg(width, height):
    return ET.Element("svg", {
        "xmlns": _SVG_NS,
        "width": str(width),
        "height": str(height),
        "viewBox": f"0 0 {width} {height}",
        "font-family": "sans-serif",
        "font-size": "11",
    })


def _text(parent, x, y, label, anchor="middle", **attrs):
    el = ET.SubElement(parent, "text", {"x": f"{x:.2f}", "y": f"{y:.2f}", "text-anchor": anchor, **attrs})
    el.text = label
    return el


def _line(parent, x1, y1, x2, y2, stroke="#000000"):
    ET.SubElement(parent, "line", {
        "x1": f"{x1:.2f}", "y1": f"{y1:.2f}", "x2": f"{x2:.2f}", "y2": f"{y2:.2f}",
        "stroke": stroke, "stroke-width": "1",
    })


def _write_svg(root, path):
    tree = ET.ElementTree(root)
    try:
        with open(path, "wb") as fh:
            tree.write(fh, encoding="utf-8", xml_declaration=True)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _color(algo, index):
    return ALGO_COLORS.get(algo, _FALLBACK_COLORS[index % len(_FALLBACK_COLORS)])


def _padded_range(lo, hi):
    if hi > lo:
        return lo, hi
    pad = 0.1 * abs(lo) if lo != 0 else 0.1
    return lo - pad, hi + pad


def _ticks(lo, hi, count=5):
    return list(np.linspace(lo, hi, count))


_AXIS_LABELS = {
    "m": "measurements M",
    "k": "sparsity K",
    "mean_error": "mean recovery error",
    "mean_time_seconds": "mean time (s)",
    "mean_correlation": "mean correlation (%)",
}


def render_line_plot(rows, x_axis, y_axis, path, title=None):
    """One polyline per algorithm of ``y_axis`` against ``x_axis``.

    ``rows`` are aggregate rows (dataclasses or dicts).  Every algorithm must
    have at least two points and all algorithms must share the same x values.
    """
    if x_axis not in ("m", "k"):
        raise ContractViolation(f"x_axis must be 'm' or 'k', got {x_axis!r}")
    if y_axis not in ("mean_error", "mean_time_seconds", "mean_correlation"):
        raise ContractViolation(f"unsupported y_axis {y_axis!r}")
    groups = {}
    for row in rows:
        d = _as_dict(row)
        groups.setdefault(d["algo"], []).append((float(d[x_axis]), float(d[y_axis])))
    if not groups:
        raise PlotError("nothing to plot: no rows")
    reference = None
    for algo, pts in groups.items():
        pts.sort()
        if len(pts) < 2:
            raise PlotError(f"algorithm {algo!r} has {len(pts)} point(s); need at least 2")
        xs = [p[0] for p in pts]
        if reference is None:
            reference = (algo, xs)
        elif xs != reference[1]:
            extra = sorted(set(xs).symmetric_difference(reference[1]))
            where = f"{x_axis}={extra[0]:g}" if extra else "point order"
            raise PlotError(
                f"x grid of {algo!r} differs from {reference[0]!r} at {where}"
            )

    width, height = 640, 420
    left, right, top, bottom = 70, 150, 40, 50
    pw, ph = width - left - right, height - top - bottom
    all_x = reference[1]
    all_y = [p[1] for pts in groups.values() for p in pts]
    x_lo, x_hi = _padded_range(min(all_x), max(all_x))
    y_lo, y_hi = _padded_range(min(all_y), max(all_y))

    def sx(v):
        return left + (v - x_lo) / (x_hi - x_lo) * pw

    def sy(v):
        return top + ph - (v - y_lo) / (y_hi - y_lo) * ph

    root = _svg(width, height)
    if title:
        _text(root, width / 2, 20, title, **{"font-size": "13"})
    axes = ET.SubElement(root, "g", {"class": "axes"})
    _line(axes, left, top + ph, left + pw, top + ph)
    _line(axes, left, top, left, top + ph)
    for v in _ticks(x_lo, x_hi):
        _line(axes, sx(v), top + ph, sx(v), top + ph + 5)
        _text(axes, sx(v), top + ph + 18, f"{v:.4g}")
    for v in _ticks(y_lo, y_hi):
        _line(axes, left - 5, sy(v), left, sy(v))
        _text(axes, left - 8, sy(v) + 4, f"{v:.4g}", anchor="end")
    _text(axes, left + pw / 2, height - 10, _AXIS_LABELS[x_axis])
    _text(axes, 16, top + ph / 2, _AXIS_LABELS[y_axis],
          transform=f"rotate(-90 16 {top + ph / 2:.2f})")

    legend = ET.SubElement(root, "g", {"class": "legend"})
    for i, (algo, pts) in enumerate(groups.items()):
        color = _color(algo, i)
        ET.SubElement(root, "polyline", {
            "points": " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts),
            "fill": "none",
            "stroke": color,
            "stroke-width": "1.5",
            "data-algo": algo,
        })
        ly = top + 10 + 18 * i
        _line(legend, left + pw + 15, ly, left + pw + 40, ly, stroke=color)
        _text(legend, left + pw + 46, ly + 4, algo, anchor="start")
    _write_svg(root, path)


def _theory_points(samples=100):
    # from delta = 0.01 up to the point where the curve leaves the unit square
    hi = math.exp(-0.5)
    deltas = np.linspace(0.01, hi, samples)
    return [(float(d), 1.0 / (2.0 * math.log(1.0 / d))) for d in deltas]


def render_phase_heatmap(cells, overlay_theory, path, title=None):
    """Success-rate heatmap over (delta, rho), one panel per algorithm.

    Shade is proportional to the success rate (0 white, 1 full shade).  With
    ``overlay_theory`` the curve ``rho = 1 / (2 ln(1/delta))`` is drawn as a
    polyline of 100 samples.
    """
    panels = {}
    for cell in cells:
        d = _as_dict(cell)
        panels.setdefault(d["algo"], []).append(d)
    if not panels:
        raise PlotError("nothing to plot: no cells")
    for algo, group in panels.items():
        deltas = sorted({c["delta"] for c in group})
        rhos = sorted({c["rho"] for c in group})
        present = {(c["delta"], c["rho"]) for c in group}
        missing = [(dl, r) for dl in deltas for r in rhos if (dl, r) not in present]
        if missing or len(group) != len(deltas) * len(rhos):
            where = f" (missing delta={missing[0][0]:g}, rho={missing[0][1]:g})" if missing else ""
            raise PlotError(f"phase grid for {algo!r} is not a complete rectangle{where}")

    size, gap, left, top, bottom = 260, 50, 60, 40, 50
    width = left + len(panels) * (size + gap)
    height = top + size + bottom
    root = _svg(width, height)
    if title:
        _text(root, width / 2, 18, title, **{"font-size": "13"})

    for p, (algo, group) in enumerate(panels.items()):
        x0 = left + p * (size + gap)
        deltas = sorted({c["delta"] for c in group})
        rhos = sorted({c["rho"] for c in group})
        cw, ch = size / len(deltas), size / len(rhos)
        panel = ET.SubElement(root, "g", {"class": "panel", "data-algo": algo})
        for c in sorted(group, key=lambda c: (c["delta"], c["rho"])):
            i, j = deltas.index(c["delta"]), rhos.index(c["rho"])
            ET.SubElement(panel, "rect", {
                "x": f"{x0 + i * cw:.2f}",
                "y": f"{top + size - (j + 1) * ch:.2f}",
                "width": f"{cw:.2f}",
                "height": f"{ch:.2f}",
                "fill": PHASE_SHADE,
                "fill-opacity": format_value(float(c["success_rate"])),
                "data-delta": format_value(c["delta"]),
                "data-rho": format_value(c["rho"]),
            })
        ET.SubElement(panel, "rect", {
            "x": f"{x0:.2f}", "y": f"{top:.2f}", "width": f"{size:.2f}", "height": f"{size:.2f}",
            "fill": "none", "stroke": "#000000",
        })
        for v in (0.0, 0.5, 1.0):
            _text(panel, x0 + v * size, top + size + 15, f"{v:g}")
            _text(panel, x0 - 6, top + size - v * size + 4, f"{v:g}", anchor="end")
        _text(panel, x0 + size / 2, top + size + 35, "delta = M/N")
        _text(panel, x0 + size / 2, top - 8, algo)
        if p == 0:
            _text(panel, 14, top + size / 2, "rho = K/M",
                  transform=f"rotate(-90 14 {top + size / 2:.2f})")
        if overlay_theory:
            ET.SubElement(panel, "polyline", {
                "class": "theory",
                "points": " ".join(
                    f"{x0 + d * size:.4f},{top + size - r * size:.4f}" for d, r in _theory_points()
                ),
                "fill": "none",
                "stroke": "#d62728",
                "stroke-width": "1.5",
            })
    _write_svg(root, path)
