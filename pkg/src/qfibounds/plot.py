"""Minimal self-contained log-log SVG plot of a bound trace."""

from __future__ import annotations

import math
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

W, H = 640, 480
MARGIN = dict(left=70, right=20, top=30, bottom=55)


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _decade_label(k: int) -> str:
    return f"1e{k}"


def loglog_svg(
    t: np.ndarray,
    F: np.ndarray,
    title: str = "",
    overlays: Sequence[tuple[str, np.ndarray, np.ndarray]] = (),
    vlines: Sequence[tuple[str, Optional[float]]] = (),
) -> str:
    """SVG text with the trace, dashed overlay curves and labelled vertical markers."""
    mask = (t > 0) & (F > 0)
    if not np.any(mask):
        raise ValueError("nothing positive to plot on log axes")
    t, F = t[mask], F[mask]
    x0, x1 = math.floor(math.log10(t[0])), math.ceil(math.log10(t[-1]))
    y0, y1 = math.floor(math.log10(F.min())), math.ceil(math.log10(F.max()))
    if y1 == y0:
        y1 += 1
    if x1 == x0:
        x1 += 1
    pw = W - MARGIN["left"] - MARGIN["right"]
    ph = H - MARGIN["top"] - MARGIN["bottom"]

    def px(tv):
        return MARGIN["left"] + (np.log10(tv) - x0) / (x1 - x0) * pw

    def py(fv):
        return MARGIN["top"] + (y1 - np.log10(fv)) / (y1 - y0) * ph

    def path(tt, ff):
        ok = (tt > 0) & (ff > 0)
        tt, ff = tt[ok], ff[ok]
        # thin to ~800 log-spaced vertices
        if len(tt) > 800:
            idx = np.unique(np.searchsorted(tt, np.geomspace(tt[0], tt[-1], 800)).clip(0, len(tt) - 1))
            tt, ff = tt[idx], ff[idx]
        ff = np.clip(ff, 10.0**y0, 10.0**y1)
        return " ".join(f"{'M' if i == 0 else 'L'}{_fmt(a)},{_fmt(b)}" for i, (a, b) in enumerate(zip(px(tt), py(ff))))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<clipPath id="plot"><rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}"/></clipPath>',
    ]
    for k in range(x0, x1 + 1):
        x = _fmt(px(10.0**k))
        out.append(f'<line x1="{x}" y1="{MARGIN["top"]}" x2="{x}" y2="{MARGIN["top"] + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{x}" y="{H - MARGIN["bottom"] + 18}" font-size="11" text-anchor="middle">{_decade_label(k)}</text>')
    for k in range(y0, y1 + 1):
        y = _fmt(py(10.0**k))
        out.append(f'<line x1="{MARGIN["left"]}" y1="{y}" x2="{MARGIN["left"] + pw}" y2="{y}" stroke="#ddd"/>')
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{y}" font-size="11" text-anchor="end" dominant-baseline="middle">{_decade_label(k)}</text>')
    out.append(f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')

    colors = ["#c33", "#36c", "#393", "#939"]
    for i, (label, tt, ff) in enumerate(overlays):
        c = colors[i % len(colors)]
        out.append(f'<path d="{path(np.asarray(tt), np.asarray(ff))}" fill="none" stroke="{c}" stroke-dasharray="6,4" clip-path="url(#plot)"/>')
        out.append(f'<text x="{MARGIN["left"] + 10}" y="{MARGIN["top"] + 16 * (i + 2)}" font-size="11" fill="{c}">{escape(label)}</text>')
    for label, tv in vlines:
        if tv is None or not (10.0**x0 <= tv <= 10.0**x1):
            continue
        x = _fmt(px(tv))
        out.append(f'<line x1="{x}" y1="{MARGIN["top"]}" x2="{x}" y2="{MARGIN["top"] + ph}" stroke="#888" stroke-dasharray="2,3"/>')
        out.append(f'<text x="{x}" y="{MARGIN["top"] - 4}" font-size="11" text-anchor="middle">{escape(label)}</text>')

    out.append(f'<path d="{path(t, F)}" fill="none" stroke="black" stroke-width="2" clip-path="url(#plot)"/>')
    out.append(f'<text x="{MARGIN["left"] + 10}" y="{MARGIN["top"] + 16}" font-size="11">bound</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{H - 12}" font-size="12" text-anchor="middle">t</text>')
    out.append(f'<text x="16" y="{MARGIN["top"] + ph / 2}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {MARGIN["top"] + ph / 2})">F(t)</text>')
    if title:
        out.append(f'<text x="{W / 2}" y="18" font-size="13" text-anchor="middle">{escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
