"""Risk sweeps over a radial grid of means, with CSV and SVG output."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, fields
from typing import Sequence

import numpy as np

from lpshrink.estimators import ScaleMode, ShrinkageConfig, shrink_batch
from lpshrink.exceptions import ValidationError
from lpshrink.norms import format_pnorm
from lpshrink.risk import MeanConfig, RiskEstimate, simulate, sure_batch

__all__ = ["ReportRow", "COLUMNS", "risk_sweep", "rows_to_csv", "risk_curve_svg"]


@dataclass(frozen=True)
class ReportRow:
    d: int
    p: str
    alpha: float
    phi: str
    scale_mode: str
    n: int | None
    theta_norm: float
    reps: int
    seed: int
    risk_mean: float
    risk_stderr: float
    sure_mean: float | None = None
    zeroed_fraction: float | None = None


COLUMNS = [f.name for f in fields(ReportRow)]


def risk_sweep(
    config: ShrinkageConfig,
    theta_norms: Sequence[float],
    reps: int,
    seed: int = 0,
    *,
    sigma2: float = 1.0,
    n: int | None = None,
    direction: Sequence[float] | None = None,
    workers: int = 1,
) -> list[ReportRow]:
    """One row per theta norm (ascending). Every cell reuses ``seed``, so the
    curve is computed with common random numbers across norms."""
    norms = sorted(float(t) for t in theta_norms)
    if any(t < 0 for t in norms):
        raise ValidationError("theta norms must be non-negative")
    if not norms:
        raise ValidationError("at least one theta norm is required")
    unknown = config.scale_mode is ScaleMode.UNKNOWN
    if unknown and n is None:
        raise ValidationError("unknown scale requires n")
    with_sure = not unknown and not config.positive_part
    rows = []
    for t in norms:
        mean_config = MeanConfig.radial(
            config.d, t, direction, sigma2=sigma2, scale_mode=config.scale_mode, n=n if unknown else None
        )
        theta = mean_config.theta

        def stat(z, s):
            scale2 = sigma2 if s is None else s / (n + 2)
            est = shrink_batch(z, scale2, config)
            cols = [((est - theta) ** 2).sum(axis=1) / sigma2, (est == 0).mean(axis=1)]
            if with_sure:
                cols.append(sure_batch(z, sigma2, config))
            return np.stack(cols)

        out = simulate(stat, mean_config, reps, seed, workers)
        risk = RiskEstimate.from_samples(out[0], seed)
        rows.append(
            ReportRow(
                d=config.d,
                p=format_pnorm(config.p),
                alpha=config.alpha,
                phi=config.phi_label,
                scale_mode=config.scale_mode.value,
                n=n if unknown else None,
                theta_norm=t,
                reps=risk.reps,
                seed=seed,
                risk_mean=risk.mean,
                risk_stderr=risk.stderr,
                sure_mean=float(out[2].mean()) if with_sure else None,
                zeroed_fraction=float(out[1].mean()),
            )
        )
    return rows


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def rows_to_csv(rows: Sequence[ReportRow], header_comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in header_comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_cell(x) for x in astuple(row)])
    return buf.getvalue()


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-9 * step:
        out.append(round(t, 12))
        t += step
    return out


def risk_curve_svg(rows: Sequence[ReportRow], title: str | None = None) -> str:
    """Static 800x600 line chart of ``risk_mean`` against ``theta_norm``.

    A dashed horizontal line marks the benchmark risk ``d``.
    """
    if not rows:
        raise ValidationError("no rows to plot")
    d = rows[0].d
    xs = [r.theta_norm for r in rows]
    ys = [r.risk_mean for r in rows]
    left, right, top, bottom = 80.0, 770.0, 60.0, 530.0
    x_lo, x_hi = min(xs), max(xs)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    y_lo = min(0.0, min(ys))
    y_hi = max(max(ys), float(d)) * 1.08
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def px(x):
        return left + (x - x_lo) / (x_hi - x_lo) * (right - left)

    def py(y):
        return bottom - (y - y_lo) / (y_hi - y_lo) * (bottom - top)

    heading = title or f"Monte Carlo risk, d={d}, p={rows[0].p}, alpha={rows[0].alpha:g}, phi={rows[0].phi}"
    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 800 600" width="800" height="600">',
        '<rect x="0" y="0" width="800" height="600" fill="white"/>',
        f'<text x="400" y="30" text-anchor="middle" font-family="sans-serif" font-size="16">{_escape(heading)}</text>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
    ]
    for t in _ticks(x_lo, x_hi):
        parts.append(f'<line x1="{px(t):.2f}" y1="{bottom}" x2="{px(t):.2f}" y2="{bottom + 5}" stroke="black"/>')
        parts.append(
            f'<text x="{px(t):.2f}" y="{bottom + 20}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="12">{t:g}</text>'
        )
    for t in _ticks(y_lo, y_hi):
        parts.append(f'<line x1="{left - 5}" y1="{py(t):.2f}" x2="{left}" y2="{py(t):.2f}" stroke="black"/>')
        parts.append(
            f'<text x="{left - 8}" y="{py(t) + 4:.2f}" text-anchor="end" font-family="sans-serif" '
            f'font-size="12">{t:g}</text>'
        )
    parts.append(
        f'<text x="{(left + right) / 2}" y="570" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">||theta||</text>'
    )
    parts.append(
        f'<text x="20" y="{(top + bottom) / 2}" text-anchor="middle" font-family="sans-serif" font-size="14" '
        f'transform="rotate(-90 20 {(top + bottom) / 2})">risk</text>'
    )
    parts.append(
        f'<line x1="{left}" y1="{py(d):.2f}" x2="{right}" y2="{py(d):.2f}" stroke="gray" '
        f'stroke-dasharray="6,4" class="reference"/>'
    )
    parts.append(
        f'<text x="{right - 4}" y="{py(d) - 6:.2f}" text-anchor="end" font-family="sans-serif" '
        f'font-size="12" fill="gray">d = {d}</text>'
    )
    points = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
    parts.append(f'<polyline points="{points}" fill="none" stroke="steelblue" stroke-width="2"/>')
    for x, y in zip(xs, ys):
        parts.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="4" fill="steelblue"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
