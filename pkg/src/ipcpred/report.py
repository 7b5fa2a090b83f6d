"""Static SVG figures and their CSV companions.

Files are named ``<kind>.svg`` / ``<kind>.csv`` inside a caller-chosen
directory. Output is a pure function of the figure spec: coordinates use
six fixed decimals, tick labels four significant digits, and nothing
time- or environment-dependent is written.

CSV columns per kind:

* ``scatter_pred_actual``: ``actual,predicted``
* ``residuals``: ``predicted,residual`` (or ``index,residual``)
* ``importance_bars``: ``feature,score`` in bar order
"""

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

from .errors import ReportError
from .evaluation import EvalReport, ImportanceReport

KINDS = ("scatter_pred_actual", "residuals", "importance_bars")

WIDTH, HEIGHT = 800, 600
LEFT, RIGHT, TOP, BOTTOM = 90.0, 770.0, 60.0, 500.0
N_TICKS = 5


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    title: str
    source: object  # EvalReport or ImportanceReport
    out_dir: Path
    x_axis: str = "predicted"  # residuals only: "predicted" or "index"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ReportError(f"unknown figure kind {self.kind!r}")
        want = ImportanceReport if self.kind == "importance_bars" else EvalReport
        if not isinstance(self.source, want):
            raise ReportError(f"{self.kind} needs a {want.__name__}")
        if self.x_axis not in ("predicted", "index"):
            raise ReportError(f"x_axis must be 'predicted' or 'index', got {self.x_axis!r}")

    @property
    def svg_path(self):
        return Path(self.out_dir) / f"{self.kind}.svg"

    @property
    def csv_path(self):
        return Path(self.out_dir) / f"{self.kind}.csv"


def _c(v):
    return f"{v:.6f}"


def _label(v):
    return escape(format(v, ".4g"))


def _range(values):
    lo, hi = min(values), max(values)
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


class _Canvas:
    def __init__(self, title):
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
            '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2:.6f}" y="30.000000" text-anchor="middle" font-family="sans-serif" '
            f'font-size="18">{escape(title)}</text>',
        ]

    def add(self, s):
        self.parts.append(s)

    def line(self, x1, y1, x2, y2, cls, stroke="black", extra=""):
        self.add(
            f'<line class="{cls}" x1="{_c(x1)}" y1="{_c(y1)}" x2="{_c(x2)}" y2="{_c(y2)}" stroke="{stroke}"{extra}/>'
        )

    def text(self, x, y, s, anchor="middle", extra=""):
        self.add(
            f'<text x="{_c(x)}" y="{_c(y)}" text-anchor="{anchor}" font-family="sans-serif" font-size="12"{extra}>'
            f"{s}</text>"
        )

    def render(self):
        return "\n".join(self.parts + ["</svg>"]) + "\n"


class _Axes:
    def __init__(self, xlo, xhi, ylo, yhi):
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi

    def x(self, v):
        return LEFT + (v - self.xlo) / (self.xhi - self.xlo) * (RIGHT - LEFT)

    def y(self, v):
        return BOTTOM - (v - self.ylo) / (self.yhi - self.ylo) * (BOTTOM - TOP)

    def draw(self, canvas, xlabel, ylabel, xticks=True):
        canvas.line(LEFT, BOTTOM, RIGHT, BOTTOM, "axis")
        canvas.line(LEFT, TOP, LEFT, BOTTOM, "axis")
        for i in range(N_TICKS):
            frac = i / (N_TICKS - 1)
            yv = self.ylo + frac * (self.yhi - self.ylo)
            py = self.y(yv)
            canvas.line(LEFT - 5, py, LEFT, py, "tick")
            canvas.text(LEFT - 8, py + 4, _label(yv), anchor="end")
            if xticks:
                xv = self.xlo + frac * (self.xhi - self.xlo)
                px = self.x(xv)
                canvas.line(px, BOTTOM, px, BOTTOM + 5, "tick")
                canvas.text(px, BOTTOM + 20, _label(xv))
        canvas.text((LEFT + RIGHT) / 2, HEIGHT - 20, escape(xlabel))
        cy = (TOP + BOTTOM) / 2
        canvas.text(25, cy, escape(ylabel), extra=f' transform="rotate(-90 25.000000 {_c(cy)})"')


def _scatter_svg(spec):
    pairs = spec.source.pairs
    lo, hi = _range([v for pair in pairs for v in pair])
    ax = _Axes(lo, hi, lo, hi)
    cv = _Canvas(spec.title)
    ax.draw(cv, "Actual IPC", "Predicted IPC")
    cv.line(ax.x(lo), ax.y(lo), ax.x(hi), ax.y(hi), "identity", stroke="gray", extra=' stroke-dasharray="6,4"')
    for a, p in pairs:
        cv.add(f'<circle class="point" cx="{_c(ax.x(a))}" cy="{_c(ax.y(p))}" r="3" fill="steelblue"/>')
    return cv.render()


def _residual_series(spec):
    rep = spec.source
    if spec.x_axis == "index":
        xs = [float(i) for i in range(len(rep.residuals))]
    else:
        xs = [p for _, p in rep.pairs]
    return xs, list(rep.residuals)


def _residuals_svg(spec):
    xs, rs = _residual_series(spec)
    xlo, xhi = _range(xs)
    ylo, yhi = _range(rs + [0.0])
    ax = _Axes(xlo, xhi, ylo, yhi)
    cv = _Canvas(spec.title)
    ax.draw(cv, "Sample index" if spec.x_axis == "index" else "Predicted IPC", "Residual (predicted - actual)")
    cv.line(LEFT, ax.y(0.0), RIGHT, ax.y(0.0), "zero", stroke="gray", extra=' stroke-dasharray="6,4"')
    for x, r in zip(xs, rs):
        cv.add(f'<circle class="point" cx="{_c(ax.x(x))}" cy="{_c(ax.y(r))}" r="3" fill="firebrick"/>')
    return cv.render()


def _bars(spec):
    return spec.source.ranked()


def _importance_svg(spec):
    bars = _bars(spec)
    scores = [s for _, s in bars]
    ylo, yhi = _range(scores + [0.0])
    ax = _Axes(0.0, float(len(bars)), ylo, yhi)
    cv = _Canvas(spec.title)
    ax.draw(cv, "Feature", f"Importance ({spec.source.method})", xticks=False)
    slot = (RIGHT - LEFT) / len(bars)
    y0 = ax.y(0.0)
    for i, (name, s) in enumerate(bars):
        x = LEFT + i * slot + 0.15 * slot
        top = min(y0, ax.y(s))
        height = abs(ax.y(s) - y0)
        cv.add(
            f'<rect class="bar" x="{_c(x)}" y="{_c(top)}" width="{_c(0.7 * slot)}" height="{_c(height)}" '
            f'fill="seagreen"><title>{escape(name)}</title></rect>'
        )
        cx = LEFT + (i + 0.5) * slot
        cv.text(cx, BOTTOM + 14, escape(name), anchor="end", extra=f' transform="rotate(-35 {_c(cx)} {_c(BOTTOM + 14)})"')
    cv.line(LEFT, y0, RIGHT, y0, "zero", stroke="gray")
    return cv.render()


def _check_nonempty(spec):
    src = spec.source
    empty = not src.scores if isinstance(src, ImportanceReport) else not src.pairs
    if empty:
        raise ReportError(f"{spec.kind}: source has no data")


def svg_text(spec):
    _check_nonempty(spec)
    if spec.kind == "scatter_pred_actual":
        return _scatter_svg(spec)
    if spec.kind == "residuals":
        return _residuals_svg(spec)
    return _importance_svg(spec)


def csv_text(spec):
    _check_nonempty(spec)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")

    def f(v):
        return format(float(v), ".17g")

    if spec.kind == "scatter_pred_actual":
        w.writerow(["actual", "predicted"])
        w.writerows([f(a), f(p)] for a, p in spec.source.pairs)
    elif spec.kind == "residuals":
        xs, rs = _residual_series(spec)
        w.writerow([spec.x_axis, "residual"])
        w.writerows([str(int(x)) if spec.x_axis == "index" else f(x), f(r)] for x, r in zip(xs, rs))
    else:
        w.writerow(["feature", "score"])
        w.writerows([name, f(s)] for name, s in _bars(spec))
    return buf.getvalue()


def _write(path, text):
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc.strerror}") from None
    return Path(path)


def render_svg(spec):
    return _write(spec.svg_path, svg_text(spec))


def render_csv(spec):
    return _write(spec.csv_path, csv_text(spec))


def render(spec):
    """Write both the SVG and its CSV companion; returns the two paths."""
    svg, table = svg_text(spec), csv_text(spec)
    return _write(spec.svg_path, svg), _write(spec.csv_path, table)
