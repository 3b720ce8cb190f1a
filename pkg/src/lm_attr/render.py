"""Heatmaps, tables and figures for attribution results.

The heatmap puts feature labels along the top and target tokens down the
left.  Colors come from a diverging scale centered at zero and bounded by the
largest absolute score: positive cells shade toward blue, negative toward
red, zero is white.
"""

from __future__ import annotations

import csv
import io
import math
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .errors import ConfigError, RenderError

CHAR_W = 7.2
FONT = "font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\""


def diverging_rgb(value: float, vmax: float) -> tuple[int, int, int]:
    """White-centered red/blue ramp; ``vmax`` maps to pure blue, ``-vmax`` to pure red."""
    if vmax <= 0:
        return (255, 255, 255)
    t = max(-1.0, min(1.0, value / vmax))
    fade = round(255 * (1 - abs(t)))
    return (fade, fade, 255) if t >= 0 else (255, fade, fade)


def _cmap_rgb(cmap: str, value: float, vmax: float) -> tuple[int, int, int]:
    if cmap == "redblue":
        return diverging_rgb(value, vmax)
    import matplotlib

    try:
        mapper = matplotlib.colormaps[cmap]
    except KeyError as exc:
        raise ConfigError(f"unknown color map {cmap!r}") from exc
    t = 0.5 if vmax <= 0 else 0.5 + 0.5 * max(-1.0, min(1.0, value / vmax))
    r, g, b, _ = mapper(t)
    return (round(r * 255), round(g * 255), round(b * 255))


def format_value(value: float, number_format: str = "{:.4f}") -> str:
    text = number_format.format(value)
    # no "-0.0000"
    if text.startswith("-") and float(text) == 0:
        text = text[1:]
    return text


def feature_labels(result) -> list[str]:
    return [label if label else f"(feature {i})" for i, label in enumerate(result.features)]


def _check_finite(result):
    matrix = np.asarray(result.matrix, dtype=float)
    if matrix.size == 0:
        raise RenderError("nothing to render: empty score matrix")
    bad = np.argwhere(np.isnan(matrix))
    if len(bad):
        r, c = bad[0]
        raise RenderError(f"score for target {result.target_tokens[r]!r} x feature {result.features[c]!r} is NaN")
    return matrix


def render_heatmap(result, cmap: str = "redblue", cell_size=(72, 28), number_format: str = "{:.4f}") -> str:
    """Standalone SVG 1.1 heatmap of ``result``."""
    matrix = _check_finite(result)
    vmax = float(np.max(np.abs(matrix[np.isfinite(matrix)]), initial=0.0))
    cols = feature_labels(result)
    rows = [t if t else f"(token {i})" for i, t in enumerate(result.target_tokens)]
    cell_w, cell_h = cell_size
    col_w = [max(cell_w, math.ceil(len(c) * CHAR_W) + 12) for c in cols]
    left = max(math.ceil(len(r) * CHAR_W) + 16 for r in rows)
    top = cell_h + 8
    width = left + sum(col_w) + 8
    height = top + cell_h * len(rows) + 8
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    x = left
    for label, w in zip(cols, col_w):
        out.append(
            f'<text x="{x + w / 2:g}" y="{top - 10}" text-anchor="middle" {FONT}>{escape(label)}</text>'
        )
        x += w
    for r, label in enumerate(rows):
        y = top + r * cell_h
        out.append(
            f'<text x="{left - 8}" y="{y + cell_h / 2 + 4:g}" text-anchor="end" {FONT}>{escape(label)}</text>'
        )
        x = left
        for c, w in enumerate(col_w):
            value = float(matrix[r, c])
            rgb = _cmap_rgb(cmap, value, vmax)
            fill = "#%02x%02x%02x" % rgb
            shown = format_value(value, number_format)
            ink = "#ffffff" if sum(rgb) < 300 else "#000000"
            out.append(
                f'<rect x="{x}" y="{y}" width="{w}" height="{cell_h}" fill="{fill}" stroke="#cccccc" '
                f'data-row="{r}" data-col="{c}" data-value={quoteattr(shown)}/>'
            )
            out.append(
                f'<text x="{x + w / 2:g}" y="{y + cell_h / 2 + 4:g}" text-anchor="middle" fill="{ink}" {FONT}>'
                f"{escape(shown)}</text>"
            )
            x += w
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_html(result, title: str = "Attribution", **options) -> str:
    """Static HTML page embedding the SVG heatmap."""
    svg = render_heatmap(result, **options)
    body = svg.split("\n", 1)[1]  # drop the XML declaration
    return (
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
        f"<title>{escape(title)}</title>\n</head>\n<body>\n{body}</body>\n</html>\n"
    )


def render_terminal(result, orientation: str = "features-top", number_format: str = "{:.4f}") -> str:
    """Fixed-width table with a totals line.

    ``features-top`` matches the heatmap (one column per feature, one line per
    target token, totals as the last line).  ``features-left`` transposes it:
    one line per feature, totals as the last column.
    """
    matrix = np.asarray(result.matrix, dtype=float)
    features = feature_labels(result)
    tokens = [t if t else f"(token {i})" for i, t in enumerate(result.target_tokens)]
    totals = matrix.sum(axis=0)
    if orientation == "features-top":
        header = [""] + features
        body = [[tok] + [format_value(v, number_format) for v in row] for tok, row in zip(tokens, matrix)]
        body.append(["total"] + [format_value(v, number_format) for v in totals])
    elif orientation == "features-left":
        header = ["feature"] + tokens + ["total"]
        body = [
            [feat] + [format_value(v, number_format) for v in matrix[:, c]] + [format_value(totals[c], number_format)]
            for c, feat in enumerate(features)
        ]
    else:
        raise ConfigError(f"unknown orientation {orientation!r}")
    table = [header] + body
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = []
    for n, row in enumerate(table):
        cells = [row[0].ljust(widths[0])] + [cell.rjust(w) for cell, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render_csv(result) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["target_token"] + feature_labels(result))
    for tok, row in zip(result.target_tokens, np.asarray(result.matrix)):
        writer.writerow([tok] + [repr(float(v)) for v in row])
    writer.writerow(["total"] + [repr(float(v)) for v in np.asarray(result.matrix).sum(axis=0)])
    return buf.getvalue()


def plot_heatmap(result, path=None, cmap: str = "RdBu", figsize=None, annotate: bool = True):
    """Matplotlib heatmap; saved to ``path`` when given, else returned as (fig, ax)."""
    import matplotlib

    if path is not None:
        matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matrix = _check_finite(result)
    vmax = float(np.max(np.abs(matrix))) or 1.0
    rows, cols = matrix.shape
    if figsize is None:
        figsize = (max(4.0, 1.1 * cols + 2.0), max(2.5, 0.5 * rows + 1.5))
    fig, ax = plt.subplots(figsize=figsize)
    ax.grid(False)
    im = ax.imshow(matrix, cmap=cmap, vmin=-vmax, vmax=vmax, aspect="auto")
    fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    ax.set_xticks(range(cols), labels=feature_labels(result), rotation=30, ha="left", rotation_mode="anchor")
    ax.xaxis.tick_top()
    ax.set_yticks(range(rows), labels=result.target_tokens)
    if annotate:
        for r in range(rows):
            for c in range(cols):
                value = matrix[r, c]
                color = "white" if abs(value) > 0.6 * vmax else "black"
                ax.text(c, r, format_value(value), ha="center", va="center", color=color, fontsize=8)
    fig.tight_layout()
    if path is None:
        return fig, ax
    fig.savefig(path, metadata={"Software": None} if str(path).endswith(".png") else None)
    plt.close(fig)
    return path
