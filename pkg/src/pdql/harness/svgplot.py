"""Hand-rolled SVG charts: byte-identical output for identical inputs.

No plotting library: element order, colors, and float formatting are fixed,
and nothing time- or environment-dependent is written.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .experiment import aggregate

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 36, 48
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf")


def _f(x) -> str:
    return f"{x:.2f}"


class _Canvas:
    def __init__(self, title):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH // 2}" y="20" font-family="sans-serif" '
            f'font-size="14" text-anchor="middle">{title}</text>',
        ]

    def line(self, x1, y1, x2, y2, color="#333333", width=1.0):
        self.parts.append(
            f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
            f'stroke="{color}" stroke-width="{_f(width)}"/>')

    def polyline(self, points, color):
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in points)
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"/>')

    def circle(self, x, y, r, color):
        self.parts.append(
            f'<circle cx="{_f(x)}" cy="{_f(y)}" r="{_f(r)}" fill="{color}"/>')

    def text(self, x, y, s, size=11, anchor="middle", color="#333333"):
        self.parts.append(
            f'<text x="{_f(x)}" y="{_f(y)}" font-family="sans-serif" '
            f'font-size="{size}" text-anchor="{anchor}" fill="{color}">{s}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


class _Axes:
    """Linear axes mapping data space onto the canvas, with ticks."""

    def __init__(self, canvas, x_range, y_range, x_label, y_label):
        self.c = canvas
        x_lo, x_hi = x_range
        y_lo, y_hi = y_range
        if x_hi <= x_lo:
            x_hi = x_lo + 1.0
        if y_hi <= y_lo:
            y_hi = y_lo + 1.0
        self.x_lo, self.x_hi, self.y_lo, self.y_hi = x_lo, x_hi, y_lo, y_hi
        self._frame(x_label, y_label)

    def px(self, x):
        w = WIDTH - MARGIN_L - MARGIN_R
        return MARGIN_L + (x - self.x_lo) / (self.x_hi - self.x_lo) * w

    def py(self, y):
        h = HEIGHT - MARGIN_T - MARGIN_B
        return HEIGHT - MARGIN_B - (y - self.y_lo) / (self.y_hi - self.y_lo) * h

    def _frame(self, x_label, y_label):
        c = self.c
        c.line(MARGIN_L, HEIGHT - MARGIN_B, WIDTH - MARGIN_R, HEIGHT - MARGIN_B)
        c.line(MARGIN_L, MARGIN_T, MARGIN_L, HEIGHT - MARGIN_B)
        for i in range(5):
            xv = self.x_lo + (self.x_hi - self.x_lo) * i / 4
            yv = self.y_lo + (self.y_hi - self.y_lo) * i / 4
            c.line(self.px(xv), HEIGHT - MARGIN_B, self.px(xv), HEIGHT - MARGIN_B + 4)
            c.text(self.px(xv), HEIGHT - MARGIN_B + 16, f"{xv:g}", size=10)
            c.line(MARGIN_L - 4, self.py(yv), MARGIN_L, self.py(yv))
            c.text(MARGIN_L - 8, self.py(yv) + 3, f"{yv:.3g}", size=10, anchor="end")
        c.text((MARGIN_L + WIDTH - MARGIN_R) / 2, HEIGHT - 10, x_label, size=11)
        c.text(14, MARGIN_T - 10, y_label, size=11, anchor="start")


def _legend(canvas, names):
    for i, name in enumerate(names):
        y = MARGIN_T + 14 + 16 * i
        canvas.line(WIDTH - MARGIN_R - 120, y - 4, WIDTH - MARGIN_R - 96, y - 4,
                    color=PALETTE[i % len(PALETTE)], width=2)
        canvas.text(WIDTH - MARGIN_R - 90, y, name, size=11, anchor="start")


def _empty(title, note="no data") -> str:
    canvas = _Canvas(title)
    _Axes(canvas, (0.0, 1.0), (0.0, 1.0), "", "")
    canvas.text(WIDTH / 2, HEIGHT / 2, note, size=13)
    return canvas.render()


def figure_a_svg(records) -> str:
    """Mean samples-to-convergence vs state count, one series per learner,
    with +/- one standard deviation error bars."""
    rows = [r for r in aggregate(records) if r.mean_samples is not None]
    title = "samples to reach the error threshold vs state count"
    if not rows:
        return _empty(title)
    learners = sorted({r.learner for r in rows})
    xs = [r.num_states for r in rows]
    tops = [r.mean_samples + (r.std_samples or 0.0) for r in rows]
    canvas = _Canvas(title)
    axes = _Axes(canvas, (0.0, max(xs) * 1.05), (0.0, max(tops) * 1.1),
                 "state count", "samples")
    for i, learner in enumerate(learners):
        color = PALETTE[i % len(PALETTE)]
        series = sorted((r.num_states, r.mean_samples, r.std_samples or 0.0)
                        for r in rows if r.learner == learner)
        canvas.polyline([(axes.px(s), axes.py(m)) for s, m, _ in series], color)
        for s, m, sd in series:
            canvas.circle(axes.px(s), axes.py(m), 2.5, color)
            if sd > 0:
                canvas.line(axes.px(s), axes.py(m - sd), axes.px(s),
                            axes.py(m + sd), color=color)
    _legend(canvas, learners)
    return canvas.render()


def figure_b_svg(traces, fig_b_size: int) -> str:
    """Mean error vs timestep for each learner at one state count (the first
    seed of each learner; falls back to the nearest available size)."""
    title = "mean error vs samples"
    sizes = sorted({size for (_, size, _) in traces})
    if not sizes:
        return _empty(title)
    size = min(sizes, key=lambda s: abs(s - fig_b_size))
    chosen = {}
    for (learner, s, seed), trace in sorted(traces.items()):
        if s == size and learner not in chosen:
            chosen[learner] = trace
    if not chosen:
        return _empty(title)
    t_max = max(p.timestep for tr in chosen.values() for p in tr.samples)
    errs = [p.mean_error for tr in chosen.values() for p in tr.samples]
    canvas = _Canvas(f"{title} (S={size})")
    axes = _Axes(canvas, (0.0, t_max * 1.02),
                 (min(0.0, min(errs)) * 1.1, max(errs) * 1.05),
                 "samples", "mean error")
    if min(errs) < 0 < max(errs):
        canvas.line(axes.px(0), axes.py(0), axes.px(t_max), axes.py(0),
                    color="#bbbbbb")
    for i, learner in enumerate(sorted(chosen)):
        pts = [(axes.px(p.timestep), axes.py(p.mean_error))
               for p in chosen[learner].samples]
        canvas.polyline(pts, PALETTE[i % len(PALETTE)])
    _legend(canvas, sorted(chosen))
    return canvas.render()


def emit_plots(records, traces, outdir, fig_b_size: int = 200):
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "figure_a.svg").write_text(figure_a_svg(records))
    (out / "figure_b.svg").write_text(figure_b_svg(traces, fig_b_size))
    return out / "figure_a.svg", out / "figure_b.svg"
