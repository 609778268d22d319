"""Minimal native SVG line plots (log-log or semilog) for sweep artifacts."""
import math


def _fmt(x):
    return f"{x:.2f}"


def line_plot_svg(series, title="", xlabel="", ylabel="", logx=True, logy=True,
                  width=640, height=440):
    """series: list of (label, xs, ys). Returns the SVG document string."""
    pad_l, pad_r, pad_t, pad_b = 70, 20, 40, 50
    iw, ih = width - pad_l - pad_r, height - pad_t - pad_b

    def tx(v):
        return math.log10(v) if logx else v

    def ty(v):
        return math.log10(v) if logy else v

    xs_all = [tx(x) for _, xs, _ in series for x in xs]
    ys_all = [ty(y) for _, _, ys in series for y in ys if (not logy) or y > 0]
    if not xs_all or not ys_all:
        xs_all, ys_all = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(ys_all), max(ys_all)
    if x1 - x0 < 1e-12:
        x1 = x0 + 1.0
    if y1 - y0 < 1e-12:
        y1 = y0 + 1.0

    def px(v):
        return pad_l + iw * (tx(v) - x0) / (x1 - x0)

    def py(v):
        return pad_t + ih * (1.0 - (ty(v) - y0) / (y1 - y0))

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width/2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{pad_l}" y="{pad_t}" width="{iw}" height="{ih}" fill="none" stroke="#999"/>',
    ]
    nticks = 5
    for i in range(nticks + 1):
        fx = x0 + (x1 - x0) * i / nticks
        gx = pad_l + iw * i / nticks
        lab = f"1e{fx:.1f}" if logx else _fmt(fx)
        parts.append(
            f'<line x1="{gx:.1f}" y1="{pad_t}" x2="{gx:.1f}" y2="{pad_t+ih}" '
            f'stroke="#eee"/>'
        )
        parts.append(
            f'<text x="{gx:.1f}" y="{pad_t+ih+18}" text-anchor="middle" '
            f'font-size="11">{lab}</text>'
        )
        fy = y0 + (y1 - y0) * i / nticks
        gy = pad_t + ih * (1 - i / nticks)
        laby = f"1e{fy:.1f}" if logy else _fmt(fy)
        parts.append(
            f'<line x1="{pad_l}" y1="{gy:.1f}" x2="{pad_l+iw}" y2="{gy:.1f}" '
            f'stroke="#eee"/>'
        )
        parts.append(
            f'<text x="{pad_l-6}" y="{gy+4:.1f}" text-anchor="end" '
            f'font-size="11">{laby}</text>'
        )
    parts.append(
        f'<text x="{width/2:.0f}" y="{height-8}" text-anchor="middle" '
        f'font-size="12">{xlabel}</text>'
    )
    parts.append(
        f'<text x="16" y="{height/2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {height/2:.0f})">{ylabel}</text>'
    )
    for i, (label, xs, ys) in enumerate(series):
        col = colors[i % len(colors)]
        pts = " ".join(
            f"{px(x):.1f},{py(y):.1f}"
            for x, y in zip(xs, ys)
            if (not logy) or y > 0
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{pad_l+8}" y="{pad_t+16+14*i}" font-size="11" '
            f'fill="{col}">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
