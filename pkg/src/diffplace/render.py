"""SVG rendering of placements: single frames, denoising filmstrips, and the
small line charts used by the study harness.

Output is byte-stable for fixed inputs and options (fixed float formatting),
so golden-file tests work.  Macros are yellow, standard-cell clusters blue,
terminals gray; overlapping objects get a red stroke.
"""

import numpy as np

from . import metrics

MACRO_FILL = "#f5c542"
CLUSTER_FILL = "#5b8def"
TERMINAL_FILL = "#b0b0b0"
OVERLAP_STROKE = "#d62728"
EDGE_STROKE = "#7a7a7a"


def _fmt(v):
    return f"{v:.2f}"


def _object_fill(netlist, i):
    if netlist.fixed_mask is not None and netlist.fixed_mask[i]:
        return TERMINAL_FILL
    if netlist.macro_mask is not None:
        return MACRO_FILL if netlist.macro_mask[i] else CLUSTER_FILL
    return MACRO_FILL


def _panel(netlist, coords, size, ox, oy, draw_edges, highlight, label):
    """SVG fragment for one placement panel with origin (ox, oy)."""
    half = size / 2.0

    def sx(x):
        return ox + (x + 1.0) * half

    def sy(y):
        # svg y grows downward
        return oy + (1.0 - y) * half

    out = []
    out.append(
        f'<rect x="{_fmt(ox)}" y="{_fmt(oy)}" width="{_fmt(size)}" height="{_fmt(size)}" '
        f'fill="white" stroke="black" stroke-width="1"/>'
    )
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    hot = set()
    if highlight:
        for i, j in metrics.overlapping_pairs(netlist, coords):
            hot.add(int(i))
            hot.add(int(j))
    for i in range(netlist.num_objects):
        w, h = netlist.sizes[i]
        x = sx(coords[i, 0] - w / 2.0)
        y = sy(coords[i, 1] + h / 2.0)
        stroke = OVERLAP_STROKE if i in hot else "#333333"
        width = "1.5" if i in hot else "0.5"
        out.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w * half)}" '
            f'height="{_fmt(h * half)}" fill="{_object_fill(netlist, i)}" '
            f'fill-opacity="0.85" stroke="{stroke}" stroke-width="{width}"/>'
        )
    if draw_edges:
        for k in range(netlist.num_edges):
            i, j = netlist.edges[k]
            a = netlist.edge_attr[k]
            x1 = sx(coords[i, 0] + a[0])
            y1 = sy(coords[i, 1] + a[1])
            x2 = sx(coords[j, 0] + a[2])
            y2 = sy(coords[j, 1] + a[3])
            out.append(
                f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
                f'stroke="{EDGE_STROKE}" stroke-width="0.4" stroke-opacity="0.6"/>'
            )
    if label:
        out.append(
            f'<text x="{_fmt(ox + 4)}" y="{_fmt(oy + 14)}" font-size="12" '
            f'font-family="monospace">{label}</text>'
        )
    return "\n".join(out)


def render_svg(netlist, coords, size=480, draw_edges=False, highlight_overlaps=True, label=None):
    """One placement as a standalone SVG document string."""
    body = _panel(netlist, coords, size, 0.0, 0.0, draw_edges, highlight_overlaps, label)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">\n{body}\n</svg>\n'
    )


def render_filmstrip(netlist, snapshots, size=240, draw_edges=False):
    """Denoising trajectory: one panel per (label, coords) snapshot."""
    gap = 6
    total_w = len(snapshots) * size + (len(snapshots) - 1) * gap
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{size}" '
        f'viewBox="0 0 {total_w} {size}">'
    ]
    for idx, (label, coords) in enumerate(snapshots):
        ox = idx * (size + gap)
        parts.append(
            _panel(netlist, coords, size, ox, 0.0, draw_edges, False, label)
        )
    parts.append("</svg>\n")
    return "\n".join(parts)


def render_line_chart(series, xlabel="", ylabel="", width=520, height=340):
    """Minimal line chart: series is a dict name -> (xs, ys)."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]
    pad_l, pad_r, pad_t, pad_b = 56, 16, 16, 44
    pw = width - pad_l - pad_r
    ph = height - pad_t - pad_b

    all_x = np.concatenate([np.asarray(xs, dtype=np.float64) for xs, _ in series.values()])
    all_y = np.concatenate([np.asarray(ys, dtype=np.float64) for _, ys in series.values()])
    x0, x1 = float(all_x.min()), float(all_x.max())
    y0, y1 = float(all_y.min()), float(all_y.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def px(x):
        return pad_l + (x - x0) / (x1 - x0) * pw

    def py(y):
        return pad_t + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="white" '
        f'stroke="#888" stroke-width="1"/>',
    ]
    for tick in range(5):
        fx = x0 + (x1 - x0) * tick / 4
        fy = y0 + (y1 - y0) * tick / 4
        out.append(
            f'<text x="{_fmt(px(fx))}" y="{height - 24}" font-size="10" '
            f'text-anchor="middle" font-family="monospace">{fx:.3g}</text>'
        )
        out.append(
            f'<text x="{pad_l - 6}" y="{_fmt(py(fy) + 3)}" font-size="10" '
            f'text-anchor="end" font-family="monospace">{fy:.3g}</text>'
        )
    for ci, (name, (xs, ys)) in enumerate(series.items()):
        color = colors[ci % len(colors)]
        pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
        out.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        out.append(
            f'<text x="{pad_l + 8}" y="{pad_t + 16 + 14 * ci}" font-size="11" '
            f'fill="{color}" font-family="monospace">{name}</text>'
        )
    if xlabel:
        out.append(
            f'<text x="{pad_l + pw / 2:.0f}" y="{height - 6}" font-size="11" '
            f'text-anchor="middle" font-family="monospace">{xlabel}</text>'
        )
    if ylabel:
        out.append(
            f'<text x="14" y="{pad_t + ph / 2:.0f}" font-size="11" text-anchor="middle" '
            f'font-family="monospace" transform="rotate(-90 14 {pad_t + ph / 2:.0f})">'
            f"{ylabel}</text>"
        )
    out.append("</svg>\n")
    return "\n".join(out)
