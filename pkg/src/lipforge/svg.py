"""Minimal SVG heatmap emission (no plotting dependency)."""

import numpy as np

from .colormap import color_hex
from .errors import InputError
from .serialize import enc_float


def heatmap_svg(values, bbox, title="", cell_px=4):
    """SVG string for a 2-d scalar field sampled on a regular grid.

    values: (nx, ny) array (axis 0 = x, axis 1 = y); bbox: (lo, hi).  Cells
    are colored by the fixed 256-entry table after min-max normalization;
    the value range is recorded in a comment for reference.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise InputError("heatmap needs a 2-d scalar field")
    nx, ny = values.shape
    vmin, vmax = float(np.min(values)), float(np.max(values))
    spread = vmax - vmin if vmax > vmin else 1.0
    w, h = nx * cell_px, ny * cell_px
    out = []
    out.append('<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
               'viewBox="0 0 %d %d">' % (w, h, w, h))
    out.append("<!-- range [%s, %s] bbox lo=%s hi=%s -->"
               % (enc_float(vmin), enc_float(vmax),
                  [enc_float(v) for v in np.asarray(bbox[0]).ravel()],
                  [enc_float(v) for v in np.asarray(bbox[1]).ravel()]))
    if title:
        out.append("<title>%s</title>" % title)
    for i in range(nx):
        for j in range(ny):
            t = (values[i, j] - vmin) / spread
            # SVG y grows downward; flip so bbox hi_y is at the top
            out.append('<rect x="%d" y="%d" width="%d" height="%d" fill="%s"/>'
                       % (i * cell_px, (ny - 1 - j) * cell_px, cell_px,
                          cell_px, color_hex(t)))
    out.append("</svg>")
    return "\n".join(out)


def write_heatmap(path, values, bbox, title="", cell_px=4):
    with open(path, "w") as fh:
        fh.write(heatmap_svg(values, bbox, title=title, cell_px=cell_px))
