"""Parameter optimization for the closed-form policies.

Continuous parameters are handled by coarse grids followed by golden-section
(or shrinking local-grid) refinement; integer parameters are scanned
exhaustively up to the point where the geometric tail weight drops below
1e-10.  Constrained AoI minimization restricts the search to the feasible
parameter set obtained by root-bracketing the (continuous) rate function.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from .stochastics import ArrivalModel, GeomDelay, tau_moments, v_moments
from .policies import (
    SimplifiedEtatp,
    TradeoffPoint,
    simplified_point,
    threshold_moments,
    threshold_point,
    zero_wait_point,
)

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_P_FLOOR = 1e-9
_TAIL_MASS = 1e-10


class InfeasibleRateError(ValueError):
    """The requested rate floor exceeds the class maximum rate."""


def golden_section(f, lo: float, hi: float, tol: float = 1e-10):
    """Minimize f on [lo, hi]; returns (x_star, f_star).

    Callers are expected to pre-bracket via a coarse grid, so a local
    minimizer inside the bracket is acceptable.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _geom_tail_cap(q: float) -> int:
    """Largest integer parameter worth scanning: (1-q)^cap < tail mass."""
    if q >= 1.0:
        return 1
    return max(1, math.ceil(math.log(_TAIL_MASS) / math.log(1.0 - q)))


def _separable_rate(p: float, mean_w: float) -> float:
    # rate of T = W + V, V ~ Geom(p): (H2(p)/p) / ((1-p)/p + E[W])
    _, _, hv = v_moments(GeomDelay(p))
    ev = (1.0 - p) / p
    return hv / (ev + mean_w)


def _max_separable_rate(mean_w: float) -> tuple[float, float]:
    """(r_star, p_star) of p -> rate for a separable policy with E[W]=mean_w."""
    grid = np.linspace(_P_FLOOR, 1.0, 256)
    vals = [_separable_rate(p, mean_w) for p in grid]
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    p_star, neg = golden_section(lambda p: -_separable_rate(p, mean_w), lo, hi, 1e-12)
    return -neg, p_star


def max_rate_zero_wait(model: ArrivalModel) -> tuple[float, float]:
    """Maximum zero-wait rate r* and its maximizing p."""
    et, _ = tau_moments(model)
    return _max_separable_rate(et)


def _feasible_p_interval(mean_w: float, r: float, r_star: float, p_star: float):
    """[p_lo, p_hi] on which the separable rate is >= r (rate is unimodal)."""
    if r <= 0.0:
        return _P_FLOOR, 1.0
    if r >= r_star:
        return p_star, p_star
    g = lambda p: _separable_rate(p, mean_w) - r
    p_lo = brentq(g, _P_FLOOR, p_star, xtol=1e-14) if g(_P_FLOOR) < 0 else _P_FLOOR
    p_hi = brentq(g, p_star, 1.0, xtol=1e-14) if g(1.0) < 0 else 1.0
    return p_lo, p_hi


def _min_aoi_separable(model, mean_w, second_w, r, make_point):
    """Minimize AoI over p on the feasible set {rate >= r}."""
    r_star, p_star = _max_separable_rate(mean_w)
    if r > r_star + 1e-12:
        return None
    p_lo, p_hi = _feasible_p_interval(mean_w, r, r_star, p_star)
    if p_hi <= p_lo:
        return make_point(p_star)
    aoi = lambda p: make_point(p).aoi
    grid = np.linspace(p_lo, p_hi, 256)
    vals = [aoi(p) for p in grid]
    i = int(np.argmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    if hi > lo:
        p_ref, _ = golden_section(aoi, lo, hi, 1e-12)
        candidates = [grid[i], p_ref, p_hi]
    else:
        candidates = [grid[i], p_hi]
    best = min((make_point(p) for p in candidates), key=lambda t: (t.aoi, -t.rate, -t.params.p))
    return best


def optimize_zero_wait(model: ArrivalModel, r: float) -> TradeoffPoint:
    """Minimize AoI over p subject to the zero-wait rate being at least r."""
    if r <= 0.0:
        return zero_wait_point(model, 1.0)
    et, et2 = tau_moments(model)
    best = _min_aoi_separable(model, et, et2, r, lambda p: zero_wait_point(model, p))
    if best is None:
        raise InfeasibleRateError(f"rate floor {r} exceeds zero-wait maximum")
    return best


def optimize_threshold(model: ArrivalModel, r: float) -> TradeoffPoint:
    """Minimize AoI over (tau0, p) subject to rate >= r."""
    best = None
    for tau0 in range(0, _geom_tail_cap(model.q) + 1):
        ez, ez2 = threshold_moments(model, tau0)
        if r <= 0.0:
            cand = threshold_point(model, tau0, 1.0)
        else:
            cand = _min_aoi_separable(
                model, ez, ez2, r, lambda p, t0=tau0: threshold_point(model, t0, p)
            )
        if cand is None:
            continue
        key = (cand.aoi, -cand.rate, cand.params.tau0, -cand.params.p)
        if best is None or key < best[0]:
            best = (key, cand)
    if best is None:
        raise InfeasibleRateError(f"rate floor {r} exceeds threshold-class maximum")
    return best[1]


def _simplified_eval_grid(model, c, pl, ph):
    """Vectorized (rate, aoi) of the simplified policy over outer grids pl x ph."""
    q = model.q
    et, et2 = tau_moments(model)
    s = (1.0 - q) ** c
    w_low, w_high = 1.0 - s, s
    et_low = (1.0 - s * (1.0 + c * q)) / q
    et_high = et - et_low

    def vm(p):
        ev = (1.0 - p) / p
        ev2 = (2.0 - 3.0 * p + p * p) / (p * p)
        with np.errstate(divide="ignore", invalid="ignore"):
            h2 = -p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p)
        h2 = np.where((p == 1.0) | (p == 0.0), 0.0, h2)
        return ev, ev2, h2 / p

    evl, ev2l, hvl = vm(pl[:, None])
    evh, ev2h, hvh = vm(ph[None, :])
    ev = w_low * evl + w_high * evh
    ev2 = w_low * ev2l + w_high * ev2h
    h = w_low * hvl + w_high * hvh
    etv = evl * et_low + evh * et_high
    rate = h / (et + ev)
    aoi = (et2 + ev2 + 2.0 * etv) / (2.0 * (et + ev))
    return rate, aoi


def _optimize_simplified_at_c(model, c, r, refine_tol=1e-12):
    """Best (p_low, p_high) for a fixed regime split c; None if r infeasible."""
    pl = np.linspace(_P_FLOOR, 1.0, 48)
    ph = pl.copy()
    best = None
    radius = float(pl[1] - pl[0])
    center = None
    for _ in range(24):
        rate, aoi = _simplified_eval_grid(model, c, pl, ph)
        feas = rate >= r
        if feas.any():
            masked = np.where(feas, aoi, np.inf)
            i, j = np.unravel_index(int(np.argmin(masked)), masked.shape)
            cand = (float(aoi[i, j]), -float(rate[i, j]), float(pl[i]), float(ph[j]))
            if best is None or cand[:2] < best[:2]:
                best = cand
            center = (float(pl[i]), float(ph[j]))
        if center is None or radius < refine_tol:
            break
        radius *= 0.35
        pl = np.clip(np.linspace(center[0] - radius, center[0] + radius, 9), _P_FLOOR, 1.0)
        ph = np.clip(np.linspace(center[1] - radius, center[1] + radius, 9), _P_FLOOR, 1.0)
    if best is None:
        return None
    return simplified_point(model, c, best[2], best[3])


def optimize_simplified(model: ArrivalModel, r: float) -> TradeoffPoint:
    """Minimize AoI over (c, p_low, p_high) subject to rate >= r.

    The zero-wait solution (p_low = p_high) is always included as a candidate,
    so the result can never be worse than the zero-wait optimum.
    """
    candidates = []
    try:
        zw = optimize_zero_wait(model, r)
        candidates.append(
            TradeoffPoint(zw.rate, zw.aoi, SimplifiedEtatp(0, zw.params.p, zw.params.p))
        )
    except InfeasibleRateError:
        pass
    for c in range(0, _geom_tail_cap(model.q) + 1):
        cand = _optimize_simplified_at_c(model, c, r)
        if cand is not None:
            candidates.append(cand)
    feasible = [t for t in candidates if t.rate >= r - 1e-9]
    if not feasible:
        raise InfeasibleRateError(f"rate floor {r} exceeds simplified-class maximum")
    return min(
        feasible, key=lambda t: (t.aoi, -t.rate, t.params.c, -t.params.p_low, -t.params.p_high)
    )
