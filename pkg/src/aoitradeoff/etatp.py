"""Solver for the fully timing-adaptive policy family.

The inner program maximizes the conditional entropy H(V|tau) over truncated
conditional pmfs p(v|tau) subject to E[tau+V] = m and E[(tau+V)^2] <= 2*alpha*m.
Its KKT conditions give rows of the exponential-tilt form

    p(v|t) proportional to 2^(-lam*(t+v) - mu*(t+v)^2),   mu >= 0

so the solve reduces to matching the two dual multipliers: lam pins the mean
exactly and mu activates the second-moment cap when it binds.  The multiplier
match runs a damped two-dimensional Newton iteration (the Jacobian entries
are tilted covariances, available from the same pass that evaluates the
moments), with nested bracketed root-finding as a fallback.

The same tilt family solves the rate-floor inversion (minimize E[T^2] at
fixed mean subject to H(V|tau) >= r*m), which build_region uses to put the
adaptive policy on a shared rate grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .stochastics import ArrivalModel
from .policies import TradeoffPoint, threshold_moments
from .search import golden_section, max_rate_zero_wait, optimize_zero_wait

_TAIL_MASS = 1e-10
_ROW_TOL = 1e-10
_MU_CAP = 1e5
_LN2 = math.log(2.0)
_MEAN_TOL = 1e-11


class EtatpInfeasibleError(ValueError):
    """The (m, alpha) or (m, r) combination admits no truncated pmf."""


class EtatpConvergenceError(RuntimeError):
    """Dual matching failed to certify the requested optimality gap."""


@dataclass(frozen=True)
class ConditionalPmf:
    """Truncated conditional law p(v|tau) with renormalized tau weights."""

    tau_max: int
    v_max: int
    rows: np.ndarray  # shape (tau_max, v_max+1)
    tau_weights: np.ndarray  # shape (tau_max,)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        w = np.asarray(self.tau_weights, dtype=float)
        if rows.shape != (self.tau_max, self.v_max + 1):
            raise ValueError(f"rows shape {rows.shape} does not match truncation")
        if (rows < 0.0).any() or (w < 0.0).any():
            raise ValueError("probabilities must be nonnegative")
        if np.abs(rows.sum(axis=1) - 1.0).max() > _ROW_TOL:
            raise ValueError("each row must sum to 1 within 1e-10")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("tau weights must sum to 1 within 1e-12")

    def moments(self) -> tuple[float, float, float]:
        """(E[T], E[T^2], H(V|tau) in bits) under the truncated law."""
        t = np.arange(1, self.tau_max + 1, dtype=float)[:, None]
        v = np.arange(0, self.v_max + 1, dtype=float)[None, :]
        s = t + v
        mean = float(self.tau_weights @ (self.rows * s).sum(axis=1))
        second = float(self.tau_weights @ (self.rows * s * s).sum(axis=1))
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(self.rows > 0.0, self.rows * np.log2(self.rows), 0.0)
        entropy = float(self.tau_weights @ (-plogp.sum(axis=1)))
        return mean, second, entropy


@dataclass(frozen=True)
class GeneralEtatp:
    """Policy given directly by a truncated conditional pmf."""

    pmf: ConditionalPmf


@dataclass(frozen=True)
class InnerSolution:
    pmf: ConditionalPmf
    entropy_bits: float
    m: float
    objective: float  # entropy_bits / m
    kkt_residual: float
    duality_gap_bound: float


def truncated_tau_weights(model: ArrivalModel, tau_max: int) -> tuple[np.ndarray, float]:
    """Renormalized geometric weights on {1..tau_max} and the discarded mass."""
    k = np.arange(1, tau_max + 1, dtype=float)
    w = model.q * (1.0 - model.q) ** (k - 1.0)
    total = float(w.sum())
    return w / total, max(1.0 - total, 0.0)


def default_truncation(model: ArrivalModel) -> tuple[int, int]:
    """(tau_max, v_max) leaving below 1e-10 of tail mass in either direction."""
    q = model.q
    if q >= 1.0:
        tau_max = 1
    else:
        tau_max = max(1, math.ceil(math.log(_TAIL_MASS) / math.log(1.0 - q)))
    _, p_star = max_rate_zero_wait(model)
    # half the rate-maximizing success parameter covers every policy the
    # sweeps visit with comfortable margin
    p_tail = max(min(p_star / 2.0, 1.0 - 1e-12), 1e-3)
    v_max = max(8, math.ceil(math.log(_TAIL_MASS) / math.log(1.0 - p_tail)))
    return tau_max, v_max


class _Tilt:
    """One evaluation of the tilt family: moments, entropy, and the tilted
    covariances that form the Newton Jacobian."""

    __slots__ = ("mean", "second", "entropy", "var", "cov", "var2", "probs")

    def __init__(self, kern, lam, mu, keep_rows=False):
        e = -lam * kern.S - mu * kern.S2
        e -= e.max(axis=1, keepdims=True)
        u = np.exp2(e)
        z = u.sum(axis=1)
        p = u / z[:, None]
        m1 = (p * kern.S).sum(axis=1)
        m2 = (p * kern.S2).sum(axis=1)
        m3 = (p * kern.S3).sum(axis=1)
        m4 = (p * kern.S4).sum(axis=1)
        h_t = np.log2(z) - (p * e).sum(axis=1)
        w = kern.w
        self.mean = float(w @ m1)
        self.second = float(w @ m2)
        self.entropy = float(w @ h_t)
        self.var = float(w @ (m2 - m1 * m1))
        self.cov = float(w @ (m3 - m1 * m2))
        self.var2 = float(w @ (m4 - m2 * m2))
        self.probs = p if keep_rows else None


class _TiltKernel:
    """Shared geometry of the truncated tilt family for one (trunc, weights)."""

    def __init__(self, tau_weights: np.ndarray, tau_max: int, v_max: int):
        self.w = np.asarray(tau_weights, dtype=float)
        self.tau_max = tau_max
        self.v_max = v_max
        t = np.arange(1, tau_max + 1, dtype=float)[:, None]
        v = np.arange(0, v_max + 1, dtype=float)[None, :]
        self.S = t + v
        self.S2 = self.S * self.S
        self.S3 = self.S2 * self.S
        self.S4 = self.S2 * self.S2
        self.m_min = float(self.w @ np.arange(1, tau_max + 1, dtype=float))
        self.m_max = self.m_min + v_max

    def tilt(self, lam: float, mu: float, keep_rows: bool = False) -> _Tilt:
        return _Tilt(self, lam, mu, keep_rows)

    def match_mean(self, mu: float, m: float, lam0: float = 0.0) -> float:
        """Find lam so the tilted mean equals m, by safeguarded Newton."""
        lam = lam0
        lo, hi = -math.inf, math.inf  # bracket: mean decreasing in lam
        step = 1.0
        for _ in range(200):
            cur = self.tilt(lam, mu)
            err = cur.mean - m
            if abs(err) <= _MEAN_TOL * max(1.0, m):
                return lam
            if err > 0.0:
                lo = max(lo, lam)
            else:
                hi = min(hi, lam)
            if cur.var > 1e-300:
                nxt = lam + err / (_LN2 * cur.var)
            else:
                nxt = math.nan
            if not (lo < nxt < hi) or not math.isfinite(nxt):
                if math.isinf(lo):
                    nxt = hi - step if math.isfinite(hi) else lam - step
                    step *= 2.0
                elif math.isinf(hi):
                    nxt = lo + step
                    step *= 2.0
                else:
                    nxt = 0.5 * (lo + hi)
            if nxt == lam:
                return lam
            lam = nxt
        raise EtatpInfeasibleError(
            f"mean {m} not attainable within truncation [{self.m_min}, {self.m_max}]"
        )

    def _match_pair(self, m: float, residual, jac_row, lam0: float, mu0: float, tol: float):
        """Damped Newton on (mean - m, residual) over (lam, mu >= 0).

        ``residual`` takes a _Tilt and gives the second equation;
        ``jac_row(tilt, lam, mu)`` its (d/dlam, d/dmu) row.  Returns
        (lam, mu, tilt) or None on stall.
        """
        lam, mu = lam0, max(mu0, 0.0)
        cur = self.tilt(lam, mu)
        for _ in range(80):
            f1 = cur.mean - m
            f2 = residual(cur)
            if abs(f1) <= _MEAN_TOL * max(1.0, m) and abs(f2) <= tol:
                return lam, mu, cur
            j11 = -_LN2 * cur.var
            j12 = -_LN2 * cur.cov
            j21, j22 = jac_row(cur, lam, mu)
            det = j11 * j22 - j12 * j21
            if not math.isfinite(det) or abs(det) < 1e-300:
                return None
            dlam = -(f1 * j22 - f2 * j12) / det
            dmu = -(j11 * f2 - j21 * f1) / det
            norm0 = abs(f1) + abs(f2)
            alpha = 1.0
            for _ in range(30):
                lam_n = lam + alpha * dlam
                mu_n = max(mu + alpha * dmu, 0.0)
                trial = self.tilt(lam_n, mu_n)
                if abs(trial.mean - m) + abs(residual(trial)) < norm0:
                    lam, mu, cur = lam_n, mu_n, trial
                    break
                alpha *= 0.5
            else:
                return None
        return None


def solve_inner(
    model: ArrivalModel,
    alpha: float,
    m: float,
    trunc: tuple[int, int] | None = None,
    eps: float = 1e-8,
) -> InnerSolution:
    """Maximize H(V|tau) at fixed mean m with E[T^2] capped at 2*alpha*m."""
    tau_max, v_max = trunc if trunc is not None else default_truncation(model)
    w, _ = truncated_tau_weights(model, tau_max)
    kern = _TiltKernel(w, tau_max, v_max)
    return _solve_inner_kernel(kern, alpha, m, eps)


def _solve_inner_kernel(kern: _TiltKernel, alpha: float, m: float, eps: float) -> InnerSolution:
    if not kern.m_min < m < kern.m_max:
        raise EtatpInfeasibleError(
            f"mean {m} outside attainable range ({kern.m_min}, {kern.m_max})"
        )
    cap = 2.0 * alpha * m
    lam = kern.match_mean(0.0, m)
    cur = kern.tilt(lam, mu := 0.0)
    if cur.second > cap:
        tol = 1e-9 * max(1.0, cap)
        got = kern._match_pair(
            m,
            residual=lambda t: t.second - cap,
            jac_row=lambda t, lam_, mu_: (-_LN2 * t.cov, -_LN2 * t.var2),
            lam0=lam,
            mu0=1e-3,
            tol=tol,
        )
        if got is None:
            got = _fallback_mu_root(
                kern, m, lam, lambda t: t.second - cap, increase_hits_zero=True
            )
        if got is None:
            raise EtatpInfeasibleError(
                f"E[T^2] cannot be brought below 2*alpha*m = {cap} at mean {m}"
            )
        lam, mu, cur = got
    slack = mu * (cap - cur.second) if mu > 0.0 else 0.0
    gap = max(lam * (m - cur.mean) + slack, 0.0)
    kkt = max(abs(cur.mean - m), abs(slack), max(cur.second - cap, 0.0))
    if gap > eps:
        raise EtatpConvergenceError(f"certified gap {gap} exceeds eps {eps}")
    rows = kern.tilt(lam, mu, keep_rows=True).probs
    pmf = ConditionalPmf(kern.tau_max, kern.v_max, rows, kern.w)
    return InnerSolution(pmf, cur.entropy, m, cur.entropy / m, kkt, gap)


def _fallback_mu_root(kern, m, lam0, residual, increase_hits_zero):
    """Bracketed root in mu of the mean-matched residual (slow, robust path).

    The residual is decreasing in mu.  Returns (lam, mu, tilt), or None when
    the residual stays positive at the mu cap (for ``increase_hits_zero``)."""
    warm = [lam0]

    def g(mu):
        warm[0] = kern.match_mean(mu, m, warm[0])
        return residual(kern.tilt(warm[0], mu))

    mu_lo, mu_hi = 0.0, 1.0
    g_hi = g(mu_hi)
    while g_hi > 0.0 and mu_hi < _MU_CAP:
        mu_lo, mu_hi = mu_hi, mu_hi * 8.0
        g_hi = g(mu_hi)
    if g_hi > 0.0:
        if increase_hits_zero:
            return None
        mu = mu_hi  # residual stays positive: accept the cap point
    else:
        mu = brentq(g, mu_lo, mu_hi, xtol=1e-13, rtol=8.9e-16, maxiter=200)
    lam = kern.match_mean(mu, m, warm[0])
    return lam, mu, kern.tilt(lam, mu)


def solve_outer(
    model: ArrivalModel,
    alpha: float,
    trunc: tuple[int, int] | None = None,
    eps: float = 1e-8,
    m_grid: int = 64,
    pure_grid: bool = False,
) -> TradeoffPoint:
    """R(alpha): line search over m of the inner objective."""
    tau_max, v_max = trunc if trunc is not None else default_truncation(model)
    w, _ = truncated_tau_weights(model, tau_max)
    kern = _TiltKernel(w, tau_max, v_max)
    pad = 1e-9 * (1.0 + kern.m_min)
    m_lo = kern.m_min + pad
    m_hi = min(2.0 * alpha, kern.m_max - pad)
    if m_hi <= m_lo:
        raise EtatpInfeasibleError(f"no attainable mean below 2*alpha = {2 * alpha}")

    best: dict = {}

    def objective(m):
        try:
            sol = _solve_inner_kernel(kern, alpha, m, eps)
        except EtatpInfeasibleError:
            return -math.inf
        if not best or sol.objective > best["sol"].objective:
            best["sol"] = sol
        return sol.objective

    grid = np.linspace(m_lo, m_hi, m_grid)
    vals = [objective(m) for m in grid]
    i = int(np.argmax(vals))
    if not math.isfinite(vals[i]):
        raise EtatpInfeasibleError(
            f"no feasible mean in [{m_lo}, {m_hi}] for alpha = {alpha}"
        )
    if not pure_grid:
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, m_grid - 1)]
        if hi > lo:
            golden_section(lambda m: -objective(m), lo, hi, 1e-9 * (1.0 + hi))
    sol = best["sol"]
    mean, second, _ = sol.pmf.moments()
    return TradeoffPoint(sol.objective, second / (2.0 * mean), GeneralEtatp(sol.pmf))


def min_aoi_at_rate(
    model: ArrivalModel,
    r: float,
    trunc: tuple[int, int] | None = None,
    m_grid: int = 64,
) -> TradeoffPoint:
    """AoI(r) for the adaptive family: minimal AoI with rate at least r.

    For each candidate mean m the tilt family minimizes E[T^2] subject to
    H(V|tau) >= r*m (the entropy floor picked up by the quadratic tilt
    weight), then the outer search minimizes E[T^2]/(2m) over m.
    """
    tau_max, v_max = trunc if trunc is not None else default_truncation(model)
    if r <= 0.0:
        # entropy unconstrained: the deterministic threshold rule is in the
        # family via v = max(tau0 - tau, 0) and minimizes AoI
        best = None
        for tau0 in range(0, tau_max + 1):
            ez, ez2 = threshold_moments(model, tau0)
            aoi = ez2 / (2.0 * ez)
            if best is None or aoi < best[0]:
                best = (aoi, tau0)
        aoi, tau0 = best
        t = np.arange(1, tau_max + 1)
        rows = np.zeros((tau_max, v_max + 1))
        rows[np.arange(tau_max), np.minimum(np.maximum(tau0 - t, 0), v_max)] = 1.0
        w, _ = truncated_tau_weights(model, tau_max)
        return TradeoffPoint(0.0, aoi, GeneralEtatp(ConditionalPmf(tau_max, v_max, rows, w)))

    w, _ = truncated_tau_weights(model, tau_max)
    kern = _TiltKernel(w, tau_max, v_max)
    pad = 1e-9 * (1.0 + kern.m_min)

    def solve_at_m(m):
        """(aoi, rate, lam, mu) minimizing E[T^2] at mean m, or None."""
        try:
            lam0 = kern.match_mean(0.0, m)
        except EtatpInfeasibleError:
            return None
        free = kern.tilt(lam0, 0.0)
        need = r * m
        if free.entropy < need:
            return None  # even the max-entropy law misses the rate floor
        tol = 1e-11 * max(1.0, need)
        got = kern._match_pair(
            m,
            residual=lambda t: t.entropy - need,
            jac_row=lambda t, lam_, mu_: (
                -_LN2 * (lam_ * t.var + mu_ * t.cov),
                -_LN2 * (lam_ * t.cov + mu_ * t.var2),
            ),
            lam0=lam0,
            mu0=1e-3,
            tol=tol,
        )
        if got is None:
            got = _fallback_mu_root(
                kern, m, lam0, lambda t: t.entropy - need, increase_hits_zero=False
            )
        if got is None:
            return None
        lam, mu, cur = got
        return cur.second / (2.0 * cur.mean), cur.entropy / cur.mean, lam, mu

    r_star, _ = max_rate_zero_wait(model)
    if r > r_star + 1e-6:
        raise EtatpInfeasibleError(f"rate floor {r} exceeds the class maximum")
    aoi_ub = optimize_zero_wait(model, min(r, r_star)).aoi
    m_lo = kern.m_min + pad
    m_hi = min(kern.m_max - pad, 2.0 * aoi_ub + 1.0)

    best: dict = {}

    def objective(m):
        out = solve_at_m(m)
        if out is None:
            return math.inf
        if not best or out[0] < best["val"][0]:
            best["val"] = out
        return out[0]

    grid = np.linspace(m_lo, m_hi, m_grid)
    vals = [objective(m) for m in grid]
    i = int(np.argmin(vals))
    if not math.isfinite(vals[i]):
        raise EtatpInfeasibleError(f"no feasible mean for rate floor {r}")
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, m_grid - 1)]
    if hi > lo:
        golden_section(objective, lo, hi, 1e-9 * (1.0 + hi))
    aoi, rate, lam, mu = best["val"]
    rows = kern.tilt(lam, mu, keep_rows=True).probs
    pmf = ConditionalPmf(tau_max, v_max, rows, w)
    return TradeoffPoint(rate, aoi, GeneralEtatp(pmf))


def etatp_curve(
    model: ArrivalModel,
    alpha_grid,
    trunc: tuple[int, int] | None = None,
    eps: float = 1e-8,
):
    """One R(alpha) point per alpha; failures recorded, curve still emitted."""
    from .policies import TradeoffCurve

    alphas = list(alpha_grid)
    if any(b < a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alpha grid must be sorted ascending")
    points, errors = [], []
    for alpha in alphas:
        try:
            points.append(solve_outer(model, alpha, trunc, eps))
        except (EtatpInfeasibleError, EtatpConvergenceError) as exc:
            errors.append((alpha, str(exc)))
    return TradeoffCurve(
        model,
        "etatp",
        points,
        {"alpha_grid": alphas, "trunc": trunc, "eps": eps, "errors": errors},
    )
