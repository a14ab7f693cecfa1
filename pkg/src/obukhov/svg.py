"""A small SVG line-plot writer: axes, ticks, polylines, legend.

Only what the scenario plots need.  Logarithmic axes take positive data and
place ticks at integer powers of ten.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22"]


@dataclass
class Series:
    x: list
    y: list
    label: str = ""
    color: str | None = None
    width: float = 1.5
    dashed: bool = False


@dataclass
class Plot:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    xlog: bool = False
    ylog: bool = False
    width: int = 640
    height: int = 440
    series: list = field(default_factory=list)

    def add(self, x, y, label="", **style):
        self.series.append(Series(list(map(float, x)), list(map(float, y)), label, **style))
        return self

    # -- geometry --------------------------------------------------------------

    def _tf(self, v, log):
        return math.log10(v) if log else v

    def _range(self, axis, log):
        vals = [self._tf(v, log) for s in self.series for v in getattr(s, axis)
                if math.isfinite(v) and (v > 0 or not log)]
        if not vals:
            return 0.0, 1.0
        lo, hi = min(vals), max(vals)
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.03 * (hi - lo)
        return lo - pad, hi + pad

    @staticmethod
    def _ticks(lo, hi, log):
        if log:
            a, b = math.ceil(lo), math.floor(hi)
            if b - a < 1:  # under two decades: add 2x and 5x ticks
                return [math.log10(m) + e for e in range(math.floor(lo), math.ceil(hi) + 1)
                        for m in (1, 2, 5) if lo <= math.log10(m) + e <= hi]
            step = max(1, (b - a) // 8 + 1)
            return [float(v) for v in range(a, b + 1, step)]
        raw = (hi - lo) / 6
        mag = 10 ** math.floor(math.log10(raw))
        step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
        start = math.ceil(lo / step) * step
        out, v = [], start
        while v <= hi + 1e-12 * abs(step):
            out.append(round(v, 12))
            v += step
        return out

    @staticmethod
    def _label(v, log):
        if log:
            return f"1e{int(v)}" if v == int(v) else f"{10 ** v:.3g}"
        return f"{v:g}"

    def render(self) -> str:
        W, H = self.width, self.height
        left, right, top, bottom = 70, 20, 36, 52
        pw, ph = W - left - right, H - top - bottom
        x0, x1 = self._range("x", self.xlog)
        y0, y1 = self._range("y", self.ylog)

        def px(v):
            return left + (self._tf(v, self.xlog) - x0) / (x1 - x0) * pw

        def py(v):
            return top + ph - (self._tf(v, self.ylog) - y0) / (y1 - y0) * ph

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
               f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
               f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
               f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
        for t in self._ticks(x0, x1, self.xlog):
            X = left + (t - x0) / (x1 - x0) * pw
            out.append(f'<line x1="{X:.2f}" y1="{top + ph}" x2="{X:.2f}" y2="{top + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{X:.2f}" y="{top + ph + 18}" text-anchor="middle">'
                       f'{escape(self._label(t, self.xlog))}</text>')
        for t in self._ticks(y0, y1, self.ylog):
            Y = top + ph - (t - y0) / (y1 - y0) * ph
            out.append(f'<line x1="{left - 5}" y1="{Y:.2f}" x2="{left}" y2="{Y:.2f}" stroke="black"/>')
            out.append(f'<text x="{left - 8}" y="{Y + 4:.2f}" text-anchor="end">'
                       f'{escape(self._label(t, self.ylog))}</text>')
        if self.title:
            out.append(f'<text x="{W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(self.title)}</text>')
        if self.xlabel:
            out.append(f'<text x="{left + pw / 2:.1f}" y="{H - 12}" text-anchor="middle">{escape(self.xlabel)}</text>')
        if self.ylabel:
            out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
                       f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(self.ylabel)}</text>')
        for i, s in enumerate(self.series):
            color = s.color or PALETTE[i % len(PALETTE)]
            pts = [(px(a), py(b)) for a, b in zip(s.x, s.y)
                   if math.isfinite(a) and math.isfinite(b) and (a > 0 or not self.xlog) and (b > 0 or not self.ylog)]
            if not pts:
                continue
            dash = ' stroke-dasharray="5,3"' if s.dashed else ""
            path = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="{s.width}"{dash} points="{path}"/>')
        labelled = [(i, s) for i, s in enumerate(self.series) if s.label]
        for row, (i, s) in enumerate(labelled):
            color = s.color or PALETTE[i % len(PALETTE)]
            Y = top + 14 + 14 * row
            out.append(f'<line x1="{left + 10}" y1="{Y - 4}" x2="{left + 30}" y2="{Y - 4}" stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{left + 35}" y="{Y}">{escape(s.label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.render())
        return path
