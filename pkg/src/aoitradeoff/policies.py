"""Closed-form (rate, AoI) evaluation for the named renewal policies.

The three closed-form families share the cycle structure T = W + V where W is
the waiting rule (tau for zero-wait, max(tau, tau0) for threshold) and V is a
geometric information delay.  The simplified two-regime policy switches the
delay parameter on whether tau arrived within c slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .stochastics import ArrivalModel, GeomDelay, tau_moments, v_moments


@dataclass(frozen=True)
class ZeroWait:
    """Update immediately on energy arrival; V ~ Geom(p) carries the message."""

    p: float

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must be in (0, 1], got {self.p}")


@dataclass(frozen=True)
class Threshold:
    """Wait until max(tau, tau0), then add V ~ Geom(p)."""

    tau0: int
    p: float

    def __post_init__(self):
        if self.tau0 < 0 or int(self.tau0) != self.tau0:
            raise ValueError(f"tau0 must be a nonnegative integer, got {self.tau0}")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must be in (0, 1], got {self.p}")


@dataclass(frozen=True)
class SimplifiedEtatp:
    """Two-regime delay: Geom(p_low) when tau <= c, Geom(p_high) when tau > c."""

    c: int
    p_low: float
    p_high: float

    def __post_init__(self):
        if self.c < 0 or int(self.c) != self.c:
            raise ValueError(f"c must be a nonnegative integer, got {self.c}")
        for name in ("p_low", "p_high"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {v}")


@dataclass(frozen=True)
class TradeoffPoint:
    """An achievable (rate, AoI) pair together with the policy that attains it."""

    rate: float  # bits per slot
    aoi: float  # slots
    params: object


@dataclass
class TradeoffCurve:
    """A sweep of achievable points for one policy family at one q."""

    model: ArrivalModel
    policy_kind: str
    points: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


def _separable_point(mean_w: float, second_w: float, p: float, params) -> TradeoffPoint:
    # shared evaluator for T = W + V with V ~ Geom(p) independent of W
    ev, ev2, hv = v_moments(GeomDelay(p))
    rate = hv / (ev + mean_w)
    aoi = (second_w + ev2 + 2.0 * mean_w * ev) / (2.0 * (mean_w + ev))
    return TradeoffPoint(rate, aoi, params)


def zero_wait_point(model: ArrivalModel, p: float) -> TradeoffPoint:
    et, et2 = tau_moments(model)
    return _separable_point(et, et2, p, ZeroWait(p))


def threshold_moments(model: ArrivalModel, tau0: int) -> tuple[float, float]:
    """(E[Z], E[Z^2]) for Z = max(tau, tau0)."""
    if tau0 < 0:
        raise ValueError(f"tau0 must be nonnegative, got {tau0}")
    q = model.q
    s = (1.0 - q) ** tau0
    if tau0 == 0:
        return tau_moments(model)
    ez = tau0 + s / q
    ez2 = tau0 * tau0 + s * ((2.0 - q) / (q * q) + 2.0 * tau0 / q)
    return ez, ez2


def threshold_point(model: ArrivalModel, tau0: int, p: float) -> TradeoffPoint:
    ez, ez2 = threshold_moments(model, tau0)
    return _separable_point(ez, ez2, p, Threshold(tau0, p))


def _partial_tau_mean(model: ArrivalModel, c: int) -> float:
    """E[tau * 1{tau <= c}] for the geometric inter-arrival time."""
    q = model.q
    return (1.0 - (1.0 - q) ** c * (1.0 + c * q)) / q


def simplified_point(
    model: ArrivalModel, c: int, p_low: float, p_high: float
) -> TradeoffPoint:
    q = model.q
    et, et2 = tau_moments(model)
    s = (1.0 - q) ** c
    w_low, w_high = 1.0 - s, s
    evl, ev2l, hvl = v_moments(GeomDelay(p_low))
    evh, ev2h, hvh = v_moments(GeomDelay(p_high))
    ev = w_low * evl + w_high * evh
    ev2 = w_low * ev2l + w_high * ev2h
    h = w_low * hvl + w_high * hvh
    et_low = _partial_tau_mean(model, c)
    et_high = et - et_low
    etv = evl * et_low + evh * et_high
    rate = h / (et + ev)
    aoi = (et2 + ev2 + 2.0 * etv) / (2.0 * (et + ev))
    return TradeoffPoint(rate, aoi, SimplifiedEtatp(c, p_low, p_high))
