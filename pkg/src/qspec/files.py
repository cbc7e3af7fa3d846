"""Text artifacts: point CSVs with a ``# qspec v1`` header, and static SVG scatter plots."""
from __future__ import annotations

import json

import numpy as np

from . import __version__
from .joint import JointSpectrumCloud

MAGIC = "# qspec v1"


class ArtifactError(ValueError):
    """An input file is missing, unreadable or not in the expected format."""


def fmt(x: float) -> str:
    """17 significant digits: enough to round-trip any IEEE double."""
    return format(float(x), ".17g")


def header_lines(config: dict | None) -> list:
    lines = [MAGIC, f"# version: {__version__}"]
    if config is not None:
        lines.append("# config: " + json.dumps(config, sort_keys=True, separators=(",", ":")))
    return lines


def points_csv(clouds, config: dict | None = None) -> str:
    """Rows ``x1,…,xd,mult,hbar`` for every cloud, after the header."""
    clouds = list(clouds)
    d = clouds[0].dim_d if clouds else 1
    lines = header_lines(config)
    lines.append(",".join([f"x{i + 1}" for i in range(d)] + ["mult", "hbar"]))
    for c in clouds:
        if c.dim_d != d:
            raise ValueError("all clouds in one file must share the dimension")
        for p, m in zip(c.points, c.mult):
            lines.append(",".join([fmt(v) for v in p] + [str(int(m)), fmt(c.hbar)]))
    return "\n".join(lines) + "\n"


def polyline_csv(polylines, config: dict | None = None) -> str:
    """Columns ``x1,x2,part``; ``part`` numbers the polylines."""
    lines = header_lines(config)
    lines.append("x1,x2,part")
    for k, poly in enumerate(polylines):
        for p in np.atleast_2d(poly):
            lines.append(f"{fmt(p[0])},{fmt(p[1])},{k}")
    return "\n".join(lines) + "\n"


def _read(path) -> tuple:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise ArtifactError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or lines[0] != MAGIC:
        raise ArtifactError(f"{path}: missing '{MAGIC}' header")
    config = {}
    body = []
    for ln in lines[1:]:
        if ln.startswith("# config: "):
            try:
                config = json.loads(ln[len("# config: "):])
            except json.JSONDecodeError as exc:
                raise ArtifactError(f"{path}: bad config line: {exc}") from exc
        elif ln.startswith("#") or not ln.strip():
            continue
        else:
            body.append(ln)
    if not body:
        raise ArtifactError(f"{path}: no column header")
    return config, body[0].split(","), body[1:]


def read_points_csv(path):
    """Inverse of :func:`points_csv`: returns ``(clouds ordered by decreasing ħ, config)``."""
    config, cols, rows = _read(path)
    if len(cols) < 3 or cols[-2:] != ["mult", "hbar"]:
        raise ArtifactError(f"{path}: expected columns x1..xd,mult,hbar, got {cols}")
    d = len(cols) - 2
    try:
        data = [r.split(",") for r in rows]
        pts = np.array([[float(v) for v in r[:d]] for r in data], dtype=float).reshape(-1, d)
        mult = np.array([int(r[d]) for r in data], dtype=int)
        hb = np.array([float(r[d + 1]) for r in data], dtype=float)
    except (ValueError, IndexError) as exc:
        raise ArtifactError(f"{path}: malformed row: {exc}") from exc
    clouds = []
    for h in sorted(set(hb.tolist()), reverse=True):
        sel = hb == h
        clouds.append(JointSpectrumCloud(pts[sel], mult[sel], h))
    return clouds, config


def read_polyline_csv(path):
    config, cols, rows = _read(path)
    if cols != ["x1", "x2", "part"]:
        raise ArtifactError(f"{path}: expected columns x1,x2,part, got {cols}")
    parts = {}
    try:
        for r in rows:
            a, b, k = r.split(",")
            parts.setdefault(int(k), []).append((float(a), float(b)))
    except ValueError as exc:
        raise ArtifactError(f"{path}: malformed row: {exc}") from exc
    return [np.array(parts[k]) for k in sorted(parts)], config


# -- SVG -----------------------------------------------------------------------


def _plane(cloud):
    """Points to draw; 1-d clouds are spread vertically by their ħ."""
    p = cloud.points
    if p.shape[1] == 1:
        return np.column_stack([p[:, 0], np.full(p.shape[0], cloud.hbar)])
    return p[:, :2]


def render_svg(clouds, boundary=(), width: int = 720, title: str | None = None) -> str:
    """Scatter plot of the clouds, with optional red boundary polylines.

    The viewBox is the data bounding box plus a 5% margin; dot radius grows
    with ħ. Coordinates are printed with fixed precision so equal inputs
    give byte-identical files.
    """
    clouds = list(clouds)
    boundary = [np.atleast_2d(np.asarray(b, dtype=float)) for b in boundary if len(b)]
    pieces = [_plane(c) for c in clouds if len(c)] + boundary
    if not pieces:
        raise ValueError("nothing to plot")
    allp = np.concatenate(pieces)
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    lo, hi = lo - 0.05 * span, hi + 0.05 * span
    span = hi - lo
    height = max(1, int(round(width * span[1] / span[0])))
    height = min(height, 4 * width)
    sx, sy = width / span[0], height / span[1]

    def px(p):
        return (p[:, 0] - lo[0]) * sx, (hi[1] - p[:, 1]) * sy

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        safe = title.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        out.append(f"<title>{safe}</title>")
    for c in clouds:
        if not len(c):
            continue
        r = min(6.0, 0.6 + 12.0 * c.hbar)
        x, y = px(_plane(c))
        out.append(f'<g fill="black" data-hbar="{fmt(c.hbar)}">')
        out.extend(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="{r:.2f}"/>' for a, b in zip(x, y))
        out.append("</g>")
    for b in boundary:
        x, y = px(b)
        pts = " ".join(f"{a:.2f},{c:.2f}" for a, c in zip(x, y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="red" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
