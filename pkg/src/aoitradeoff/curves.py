"""Tradeoff-curve construction, dominance reporting, and CSV/SVG emission."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .stochastics import ArrivalModel
from .policies import (
    SimplifiedEtatp,
    Threshold,
    TradeoffCurve,
    TradeoffPoint,
    ZeroWait,
)
from .search import (
    InfeasibleRateError,
    max_rate_zero_wait,
    optimize_simplified,
    optimize_threshold,
    optimize_zero_wait,
)
from .etatp import EtatpConvergenceError, EtatpInfeasibleError, GeneralEtatp, min_aoi_at_rate

POLICY_KINDS = ("zero-wait", "threshold", "simplified", "etatp")

# the named figures state overlap only visually; 2% relative AoI is the
# quantitative stand-in used everywhere in this package
PLOT_TOLERANCE = 0.02


def default_rate_grid(model: ArrivalModel, n_points: int = 40, max_frac: float = 0.98):
    """Evenly spaced rate floors in [0, max_frac * r*]; optimizers degenerate
    at exactly r*, hence the fractional cap."""
    r_star, _ = max_rate_zero_wait(model)
    return list(np.linspace(0.0, max_frac * r_star, n_points))


def build_region(
    model: ArrivalModel,
    policy_kind: str,
    r_grid,
    trunc: tuple[int, int] | None = None,
    m_grid: int = 64,
) -> TradeoffCurve:
    """Minimal-AoI frontier of one policy family over a grid of rate floors."""
    if policy_kind not in POLICY_KINDS:
        raise ValueError(f"unknown policy kind {policy_kind!r}")
    r_grid = [float(r) for r in r_grid]

    def solve(r):
        if policy_kind == "zero-wait":
            return optimize_zero_wait(model, r)
        if policy_kind == "threshold":
            return optimize_threshold(model, r)
        if policy_kind == "simplified":
            return optimize_simplified(model, r)
        return min_aoi_at_rate(model, r, trunc, m_grid)

    raw: list = [None] * len(r_grid)
    errors = []
    for i, r in enumerate(r_grid):
        try:
            raw[i] = solve(r)
        except (InfeasibleRateError, EtatpInfeasibleError, EtatpConvergenceError) as exc:
            errors.append((r, str(exc)))

    # frontier envelope: a point feasible at a higher rate floor is feasible
    # at every lower one, so AoI(r) may never decrease along the grid
    best_later = None
    for i in range(len(raw) - 1, -1, -1):
        if raw[i] is None:
            continue
        if best_later is not None and best_later.aoi < raw[i].aoi:
            raw[i] = best_later
        best_later = raw[i]

    grid_aoi = [p.aoi if p is not None else math.nan for p in raw]
    points = []
    for p in raw:
        if p is None:
            continue
        if points and p.rate <= points[-1].rate:
            continue  # strict ordering by achieved rate
        points.append(p)
    return TradeoffCurve(
        model,
        policy_kind,
        points,
        {
            "r_grid": r_grid,
            "grid_aoi": grid_aoi,
            "grid_points": raw,
            "trunc": trunc,
            "errors": errors,
            "tool_version": __version__,
        },
    )


@dataclass
class DominanceReport:
    """Pointwise AoI ordering of several curves on a shared rate grid."""

    q: float
    r_grid: list
    kinds: list
    max_gap: dict = field(default_factory=dict)  # (a, b) -> max(aoi_a - aoi_b)
    max_rel_gap: dict = field(default_factory=dict)  # (a, b) -> max |gap|/aoi_b
    containment_violation: float = 0.0
    zero_wait_worst: bool = True

    def render(self) -> str:
        lines = [f"dominance report, q = {self.q:g}, {len(self.r_grid)} rate points"]
        for (a, b), gap in sorted(self.max_gap.items()):
            rel = self.max_rel_gap[(a, b)]
            lines.append(f"  max aoi({a}) - aoi({b}) = {gap: .3e}  (rel {rel:.3%})")
        lines.append(f"  expected-containment max violation: {self.containment_violation:.3e}")
        lines.append(f"  zero-wait weakly dominated by all others: {self.zero_wait_worst}")
        return "\n".join(lines)


def dominance_report(curves) -> DominanceReport:
    """Compare curves that share a model and rate grid."""
    if not curves:
        raise ValueError("at least one curve required")
    q = curves[0].model.q
    grid = curves[0].metadata.get("r_grid")
    aoi = {}
    for c in curves:
        if c.model.q != q or c.metadata.get("r_grid") != grid:
            raise ValueError("curves must share model and rate grid")
        aoi[c.policy_kind] = np.asarray(c.metadata["grid_aoi"], dtype=float)
    kinds = list(aoi)
    report = DominanceReport(q, grid, kinds)
    for a in kinds:
        for b in kinds:
            if a == b:
                continue
            diff = aoi[a] - aoi[b]
            ok = ~np.isnan(diff)
            gap = float(diff[ok].max()) if ok.any() else math.nan
            report.max_gap[(a, b)] = gap
            with np.errstate(invalid="ignore", divide="ignore"):
                rel = np.abs(diff) / aoi[b]
            report.max_rel_gap[(a, b)] = float(rel[ok].max()) if ok.any() else math.nan
    expected = [(a, b) for a, b in report.max_gap if a == "etatp" or b == "zero-wait"]
    if expected:
        report.containment_violation = max(
            report.max_gap[pair] for pair in expected if not math.isnan(report.max_gap[pair])
        )
    if "zero-wait" in kinds:
        worst = max(
            (report.max_gap[(a, "zero-wait")] for a in kinds if a != "zero-wait"),
            default=0.0,
        )
        report.zero_wait_worst = worst <= PLOT_TOLERANCE * float(np.nanmax(aoi["zero-wait"]))
    return report


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _point_param_items(point: TradeoffPoint):
    p = point.params
    if isinstance(p, ZeroWait):
        return [("p", p.p)]
    if isinstance(p, Threshold):
        return [("tau0", p.tau0), ("p", p.p)]
    if isinstance(p, SimplifiedEtatp):
        return [("c", p.c), ("p_low", p.p_low), ("p_high", p.p_high)]
    if isinstance(p, GeneralEtatp):
        mean, _, _ = p.pmf.moments()
        return [("m", mean)]
    if isinstance(p, dict):
        return list(p.items())
    return []


CSV_HEADER = (
    "q,policy,rate_bits_per_slot,aoi_slots,"
    "param1_name,param1,param2_name,param2,param3_name,param3"
)


def emit_csv(curves, path) -> None:
    """Write one row per point, 17 significant digits, LF line endings."""
    if isinstance(curves, TradeoffCurve):
        curves = [curves]
    lines = [CSV_HEADER]
    for curve in curves:
        for point in curve.points:
            cells = [_fmt(curve.model.q), curve.policy_kind, _fmt(point.rate), _fmt(point.aoi)]
            items = _point_param_items(point)
            for i in range(3):
                if i < len(items):
                    cells.extend([items[i][0], _fmt(items[i][1])])
                else:
                    cells.extend(["", ""])
            lines.append(",".join(cells))
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def parse_csv(path):
    """Rebuild curves from an emitted CSV (inverse of emit_csv)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    except OSError as exc:
        raise OSError(f"cannot read CSV from {path}: {exc}") from exc
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"unrecognized CSV header in {path}")
    grouped: dict = {}
    for ln in lines[1:]:
        cells = ln.split(",")
        q, kind = float(cells[0]), cells[1]
        rate, aoi = float(cells[2]), float(cells[3])
        items = []
        for i in range(3):
            name, val = cells[4 + 2 * i], cells[5 + 2 * i]
            if name:
                items.append((name, float(val)))
        named = dict(items)
        if kind == "zero-wait":
            params = ZeroWait(named["p"])
        elif kind == "threshold":
            params = Threshold(int(named["tau0"]), named["p"])
        elif kind == "simplified":
            params = SimplifiedEtatp(int(named["c"]), named["p_low"], named["p_high"])
        else:
            params = named
        grouped.setdefault((q, kind), []).append(TradeoffPoint(rate, aoi, params))
    return [
        TradeoffCurve(ArrivalModel(q), kind, pts, {"source": str(path)})
        for (q, kind), pts in grouped.items()
    ]


_SVG_COLORS = {
    "etatp": "#1b6ca8",
    "simplified": "#c23b22",
    "threshold": "#2e8540",
    "zero-wait": "#6f42c1",
}
_W, _H = 640, 480
_ML, _MR, _MT, _MB = 70, 20, 20, 50


def _ticks(lo, hi, n=6):
    return np.linspace(lo, hi, n)


def emit_svg(curves, path, style: dict | None = None) -> None:
    """Deterministic static line chart: rate on x, AoI on y, legend per policy."""
    if isinstance(curves, TradeoffCurve):
        curves = [curves]
    if not any(c.points for c in curves):
        raise ValueError("no points to plot")
    style = style or {}
    rates = [p.rate for c in curves for p in c.points]
    aois = [p.aoi for c in curves for p in c.points]
    x0, x1 = min(rates), max(rates)
    y0, y1 = min(aois), max(aois)
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def sx(x):
        return _ML + (x - x0) / (x1 - x0) * (_W - _ML - _MR)

    def sy(y):
        return _H - _MB - (y - y0) / (y1 - y0) * (_H - _MT - _MB)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>',
    ]
    for xv in _ticks(x0, x1):
        px = sx(xv)
        out.append(
            f'<line x1="{px:.2f}" y1="{_H - _MB}" x2="{px:.2f}" y2="{_H - _MB + 5}" stroke="black"/>'
        )
        out.append(
            f'<text x="{px:.2f}" y="{_H - _MB + 18}" font-size="11" text-anchor="middle">{xv:.3g}</text>'
        )
    for yv in _ticks(y0, y1):
        py = sy(yv)
        out.append(f'<line x1="{_ML - 5}" y1="{py:.2f}" x2="{_ML}" y2="{py:.2f}" stroke="black"/>')
        out.append(
            f'<text x="{_ML - 8}" y="{py + 4:.2f}" font-size="11" text-anchor="end">{yv:.4g}</text>'
        )
    out.append(
        f'<text x="{(_ML + _W - _MR) // 2}" y="{_H - 12}" font-size="13" '
        f'text-anchor="middle">rate (bits/slot)</text>'
    )
    out.append(
        f'<text x="16" y="{(_MT + _H - _MB) // 2}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 16 {(_MT + _H - _MB) // 2})">AoI (slots)</text>'
    )
    legend_y = _MT + 10
    for curve in curves:
        color = _SVG_COLORS.get(curve.policy_kind, "#444444")
        pts = " ".join(f"{sx(p.rate):.2f},{sy(p.aoi):.2f}" for p in curve.points)
        if pts:
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(
            f'<line x1="{_W - 180}" y1="{legend_y}" x2="{_W - 150}" y2="{legend_y}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        out.append(
            f'<text x="{_W - 144}" y="{legend_y + 4}" font-size="12">{curve.policy_kind}'
            f" (q={curve.model.q:g})</text>"
        )
        legend_y += 18
    out.append("</svg>")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(out) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write SVG to {path}: {exc}") from exc
