"""Minimal native SVG 1.1 line/scatter plots (no plotting dependency).

Output carries no timestamps or other volatile metadata, so identical
data always renders to identical bytes.
"""

W, H = 640, 420
MARGIN = 55
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _ticks(lo, hi, count=5):
    if hi == lo:
        hi = lo + 1.0
    span = hi - lo
    return [lo + span * i / (count - 1) for i in range(count)]


def _scale(vals, lo, hi, out_lo, out_hi):
    span = hi - lo or 1.0
    return [out_lo + (v - lo) / span * (out_hi - out_lo) for v in vals]


def render(series, title="", xlabel="", ylabel="", scatter=False):
    """series: list of (label, xs, ys). Returns an SVG string."""
    all_x = [x for _, xs, _ in series for x in xs]
    all_y = [y for _, _, ys in series for y in ys if y == y]  # drop NaN
    if not all_x or not all_y:
        all_x, all_y = [0.0, 1.0], [0.0, 1.0]
    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = min(all_y), max(all_y)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W/2:.1f}" y="20" text-anchor="middle" '
        f'font-size="14">{title}</text>',
    ]
    # axes
    parts.append(f'<line x1="{MARGIN}" y1="{H-MARGIN}" x2="{W-MARGIN}" '
                 f'y2="{H-MARGIN}" stroke="black"/>')
    parts.append(f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" '
                 f'y2="{H-MARGIN}" stroke="black"/>')
    for tx in _ticks(x_lo, x_hi):
        px = _scale([tx], x_lo, x_hi, MARGIN, W - MARGIN)[0]
        parts.append(f'<text x="{px:.1f}" y="{H-MARGIN+18}" '
                     f'text-anchor="middle" font-size="10">{tx:.4g}</text>')
    for ty in _ticks(y_lo, y_hi):
        py = _scale([ty], y_lo, y_hi, H - MARGIN, MARGIN)[0]
        parts.append(f'<text x="{MARGIN-6}" y="{py:.1f}" text-anchor="end" '
                     f'font-size="10">{ty:.4g}</text>')
    parts.append(f'<text x="{W/2:.1f}" y="{H-12}" text-anchor="middle" '
                 f'font-size="12">{xlabel}</text>')
    parts.append(f'<text x="16" y="{H/2:.1f}" text-anchor="middle" '
                 f'font-size="12" transform="rotate(-90 16 {H/2:.1f})">'
                 f'{ylabel}</text>')
    for i, (label, xs, ys) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        pts = [(px, py) for px, py, y in zip(
            _scale(xs, x_lo, x_hi, MARGIN, W - MARGIN),
            _scale(ys, y_lo, y_hi, H - MARGIN, MARGIN), ys) if y == y]
        if scatter:
            for px, py in pts:
                parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3" '
                             f'fill="{color}"/>')
        else:
            poly = " ".join(f"{px:.2f},{py:.2f}" for px, py in pts)
            parts.append(f'<polyline points="{poly}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
        ly = MARGIN + 16 * i + 4
        parts.append(f'<rect x="{W-MARGIN-130}" y="{ly-8}" width="10" '
                     f'height="10" fill="{color}"/>')
        parts.append(f'<text x="{W-MARGIN-115}" y="{ly+1}" '
                     f'font-size="11">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def save(path, series, **kwargs):
    with open(path, "w") as fh:
        fh.write(render(series, **kwargs))
