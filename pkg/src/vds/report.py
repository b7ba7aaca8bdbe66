"""Deterministic run artifacts: metrics CSV, run manifest, PCA scatter SVG.

Everything here is byte-reproducible: floats go through one canonical
formatter, the PCA uses a fixed-iteration seeded power method instead of a
library eigensolver whose convergence path may vary across BLAS builds, and
no artifact embeds timestamps or hostnames. Wall-clock timings belong on
stderr, never in these files.
"""

import hashlib

import numpy as np

from .errors import ShapeMismatch

CSV_HEADER = "stage,mode,k,metric,value"

# fixed class palette, cycled when a bundle has more classes than entries
PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


def format_value(x):
    """Canonical scalar formatting shared by every artifact writer."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def _csv_field(s):
    """Quote a field only when it needs it (comma, quote, or newline)."""
    if any(c in s for c in ",\"\n"):
        return '"' + s.replace('"', '""') + '"'
    return s


def metric_row(stage, mode, k, metric, value):
    k_field = "" if k is None else str(int(k))
    fields = (stage, mode, k_field, metric, format_value(value))
    return ",".join(_csv_field(f) for f in fields)


def write_metrics_csv(path, rows):
    """rows: iterables of (stage, mode, k, metric, value); k may be None."""
    lines = [CSV_HEADER]
    for stage, mode, k, metric, value in rows:
        lines.append(metric_row(stage, mode, k, metric, value))
    data = ("\n".join(lines) + "\n").encode("utf-8")
    with open(path, "wb") as f:
        f.write(data)
    return data


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest_text(subcommand, flags, input_paths, version):
    """Plain-text run manifest: what ran, with which flags, on which bytes.

    flags: list of (name, value) already stringified by the caller;
    input_paths: list of (label, path) hashed with SHA-256.
    """
    lines = [f"tool=vds {subcommand}", f"version={version}"]
    for name, value in flags:
        lines.append(f"flag:{name}={value}")
    for label, path in input_paths:
        lines.append(f"input:{label}=sha256:{sha256_file(path)}")
    return "\n".join(lines) + "\n"


def write_manifest(path, subcommand, flags, input_paths, version):
    text = manifest_text(subcommand, flags, input_paths, version)
    with open(path, "wb") as f:
        f.write(text.encode("utf-8"))
    return text


def pca_2d(X, seed=0, iters=100):
    """Top-2 principal projection via a fixed-iteration power method.

    The iteration count is constant (no convergence test) and the starting
    vectors come from a seeded counter-based stream, so the projection is a
    pure function of (X, seed). Components are sign-canonicalized: the entry
    of largest magnitude is made positive.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 2:
        raise ShapeMismatch(f"need an n x d matrix with d >= 2, got {X.shape}")
    Xc = X - X.mean(axis=0, keepdims=True)
    cov = (Xc.T @ Xc) / max(len(Xc) - 1, 1)
    rng = np.random.Generator(np.random.Philox(seed))
    comps = []
    work = cov.copy()
    for _ in range(2):
        v = rng.standard_normal(X.shape[1])
        v /= np.linalg.norm(v)
        for _ in range(iters):
            v = work @ v
            norm = np.linalg.norm(v)
            if norm == 0.0:
                break
            v /= norm
        pivot = int(np.argmax(np.abs(v)))
        if v[pivot] < 0:
            v = -v
        comps.append(v)
        lam = float(v @ cov @ v)
        work = work - lam * np.outer(v, v)
    comps = np.stack(comps)
    return Xc @ comps.T, comps


def _panel_svg(points, labels, title, x0, size, margin):
    pts = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = np.where(hi - lo == 0.0, 1.0, hi - lo)
    inner = size - 2 * margin
    parts = [
        f'<rect x="{x0}" y="0" width="{size}" height="{size}" '
        f'fill="white" stroke="#cccccc"/>',
        f'<text x="{x0 + size / 2:.1f}" y="{margin - 8}" '
        f'text-anchor="middle" font-family="monospace" font-size="12">'
        f"{title}</text>",
    ]
    for (px, py), lab in zip(pts, labels):
        cx = x0 + margin + (px - lo[0]) / span[0] * inner
        cy = margin + (1.0 - (py - lo[1]) / span[1]) * inner
        color = PALETTE[int(lab) % len(PALETTE)]
        parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="2" '
                     f'fill="{color}" fill-opacity="0.75"/>')
    return parts


def write_scatter_svg(path, panels, size=320, margin=34):
    """panels: list of (title, n x 2 points, labels). One square per panel,
    left to right, shared styling, colors keyed by class id."""
    if not panels:
        raise ShapeMismatch("at least one panel is required")
    width = size * len(panels)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{size}" viewBox="0 0 {width} {size}">'
    ]
    for i, (title, points, labels) in enumerate(panels):
        parts.extend(_panel_svg(points, labels, title, i * size, size, margin))
    parts.append("</svg>")
    data = ("\n".join(parts) + "\n").encode("utf-8")
    with open(path, "wb") as f:
        f.write(data)
    return data
