"""Monitoring plots as standalone SVG line charts."""

from html import escape
from pathlib import Path

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def monitoring_svg(series, title="Monitoring", width=720, panel_height=260):
    """Render ``{(metric, label): (epochs, values)}`` as SVG, one panel per metric."""
    metrics = sorted({m for m, _ in series})
    left, right, top, bottom = 70, 230, 30, 40
    height = max(1, len(metrics)) * (panel_height + top) + 20
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2}" y="16" text-anchor="middle" font-size="14">{escape(title)}</text>']
    for k, metric in enumerate(metrics):
        y0 = 20 + k * (panel_height + top) + top
        keys = sorted(key for key in series if key[0] == metric)
        xs = [x for key in keys for x in series[key][0]]
        ys = [y for key in keys for y in series[key][1]]
        if not xs:
            continue
        xlo, xhi = min(xs), max(xs)
        ylo, yhi = min(ys), max(ys)
        if yhi == ylo:
            ylo, yhi = ylo - 0.5, yhi + 0.5
        pw, ph = width - left - right, panel_height - bottom

        def px(x):
            return left + (0 if xhi == xlo else (x - xlo) / (xhi - xlo) * pw)

        def py(y):
            return y0 + ph - (y - ylo) / (yhi - ylo) * ph

        out.append(f'<rect x="{left}" y="{y0}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>')
        out.append(f'<text x="{left}" y="{y0 - 6}">{escape(metric)}</text>')
        for t in _ticks(ylo, yhi):
            out.append(f'<text x="{left - 6}" y="{py(t) + 4:.1f}" text-anchor="end">{t:.4g}</text>')
        for t in _ticks(xlo, xhi):
            out.append(f'<text x="{px(t):.1f}" y="{y0 + ph + 16}" text-anchor="middle">{t:.0f}</text>')
        out.append(f'<text x="{left + pw / 2}" y="{y0 + ph + 32}" text-anchor="middle">epoch</text>')
        for j, key in enumerate(keys):
            color = PALETTE[j % len(PALETTE)]
            ex, ey = series[key]
            pts = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(ex, ey))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
            ly = y0 + 12 + 14 * j
            out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 28}" '
                       f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{left + pw + 32}" y="{ly}">{escape(key[1])}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_monitoring_svg(series, path, title="Monitoring"):
    Path(path).write_text(monitoring_svg(series, title))
    return Path(path)
