"""CSV and SVG emission with byte-stable formatting."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

SIG_DIGITS = 12


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list = field(default_factory=list)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.{SIG_DIGITS - 1}e}"
    if x is None:
        return ""
    return str(x)


def _sorted_rows(table: Table) -> list:
    rows = list(table.rows)
    cols = table.columns
    tcol = next((c for c in ("t", "t_sup") if c in cols), None)
    if tcol is not None:
        ti = cols.index(tcol)
        rows.sort(key=lambda r: r[ti])
    if "eps" in cols:
        ei = cols.index("eps")
        rows.sort(key=lambda r: -r[ei])
    return rows


def emit_csv(table: Table, path) -> Path:
    """Write ``table`` sorted by eps descending, then t ascending."""
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(table.columns)
            for row in _sorted_rows(table):
                w.writerow([format_value(x) for x in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


# --------------------------------------------------------------------------
# SVG

W, H = 480, 360
PAD = 50


def _svg_open(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f"<title>{title}</title>",
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<path class="axes" d="M{PAD},{PAD} V{H - PAD} H{W - PAD}" stroke="black" fill="none"/>',
    ]


def _scale(lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return lambda x: a + (x - lo) / span * (b - a)


def _rate_svg(table: Table, x: str, y: str, fit) -> list[str] | None:
    xs = np.asarray(table.column(x), dtype=float)
    ys = np.asarray(table.column(y), dtype=float)
    ok = (xs > 0) & (ys > 0)
    xs, ys = xs[ok], ys[ok]
    if xs.size < 2:
        return None
    lx, ly = np.log10(xs), np.log10(ys)
    if fit is None:
        slope, intercept = np.polyfit(np.log(xs), np.log(ys), 1)
    else:
        slope, intercept = fit.slope, fit.intercept
    fy = (slope * np.log(xs) + intercept) / math.log(10)
    lo_y, hi_y = min(ly.min(), fy.min()), max(ly.max(), fy.max())
    sx = _scale(lx.min(), lx.max(), PAD + 10, W - PAD - 10)
    sy = _scale(lo_y, hi_y, H - PAD - 10, PAD + 10)
    out = _svg_open(f"{y} vs {x}")
    for a, b in zip(lx, ly):
        out.append(f'<circle class="marker" cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="4" fill="steelblue"/>')
    i0, i1 = int(np.argmin(lx)), int(np.argmax(lx))
    out.append(
        f'<line class="fit" x1="{sx(lx[i0]):.2f}" y1="{sy(fy[i0]):.2f}" '
        f'x2="{sx(lx[i1]):.2f}" y2="{sy(fy[i1]):.2f}" stroke="firebrick"/>'
    )
    out.append(f'<text x="{PAD + 10}" y="{PAD - 15}" font-size="14">slope≈{slope:.1f}</text>')
    out.append(f'<text x="{W / 2:.0f}" y="{H - 12}" font-size="12" text-anchor="middle">log10 {x}</text>')
    out.append(f'<text x="14" y="{H / 2:.0f}" font-size="12" transform="rotate(-90 14 {H / 2:.0f})">log10 {y}</text>')
    return out


def _manifold_svg(table: Table) -> list[str] | None:
    if not table.rows:
        return None
    eps = table.column("eps")
    slow = table.column("sigma_slow")
    crit = table.column("sigma_critical")
    beta = table.column("beta")
    slopes = [s / (2 * b) for s, b in zip(slow, beta)] + [crit[0] / (2 * beta[0])]
    vmax = max(1.0, max(abs(s) for s in slopes))
    sx = _scale(-1.0, 1.0, PAD, W - PAD)
    sy = _scale(-vmax, vmax, H - PAD, PAD)
    out = _svg_open("slow and critical lines")
    m = crit[0] / (2 * beta[0])
    out.append(
        f'<line class="critical" x1="{sx(-1):.2f}" y1="{sy(-m):.2f}" x2="{sx(1):.2f}" y2="{sy(m):.2f}" '
        'stroke="black" stroke-dasharray="6,4"/>'
    )
    for e, s, b in zip(eps, slow, beta):
        m = s / (2 * b)
        out.append(
            f'<line class="slow" x1="{sx(-1):.2f}" y1="{sy(-m):.2f}" x2="{sx(1):.2f}" y2="{sy(m):.2f}" stroke="steelblue"/>'
        )
        out.append(f'<text x="{sx(1) + 2:.2f}" y="{sy(m):.2f}" font-size="10">eps={format_value(float(e))}</text>')
    out.append(f'<text x="{W / 2:.0f}" y="{H - 12}" font-size="12" text-anchor="middle">u_hat</text>')
    out.append(f'<text x="14" y="{H / 2:.0f}" font-size="12">v_hat</text>')
    return out


def emit_svg(table: Table, kind: str, path, x: str = "eps", y: str | None = None, fit=None) -> bool:
    """Write a static plot; returns False (and writes nothing) if there is too little data.

    ``kind="rate"`` draws a log-log scatter of column ``y`` against ``x`` with
    the fitted line.  ``kind="manifold"`` needs columns eps, sigma_slow,
    sigma_critical and beta and draws every line v = sigma/(2 beta) u.
    """
    if kind == "rate":
        if y is None:
            raise ValueError("rate plots need a y column")
        body = _rate_svg(table, x, y, fit)
    elif kind == "manifold":
        body = _manifold_svg(table)
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    if body is None:
        log.warning("not enough points for %s plot %s; skipped", kind, path)
        return False
    body.append("</svg>")
    path = Path(path)
    try:
        path.write_text("\n".join(body) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return True
