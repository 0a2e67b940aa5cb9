"""Shared oracle helpers for the test suite.

Everything here recomputes quantities by independent means (series summation,
dense grid enumeration) so the closed forms and solvers under test are checked
against something they do not share code with.
"""

import math

import numpy as np

from aoitradeoff import (
    ArrivalModel,
    GeomDelay,
    SimplifiedEtatp,
    Threshold,
    ZeroWait,
    series_oracle,
)

TOL = 1e-12


def _neg_log_pmf(p):
    """f(k) = -log2(p(1-p)^k) in linear form, safe where the pmf underflows."""
    a = -math.log2(p)
    b = -math.log2(1.0 - p) if p < 1.0 else 0.0
    return lambda k: a + b * np.asarray(k, dtype=float)


def oracle_zero_wait(q, p, tol=1e-13):
    """(rate, aoi) for the zero-wait policy from series sums only."""
    model, delay = ArrivalModel(q), GeomDelay(p)
    et = series_oracle(model.tau_pmf, lambda k: k, tol, start=1)
    et2 = series_oracle(model.tau_pmf, lambda k: k * k, tol, start=1)
    ev = series_oracle(delay.pmf, lambda k: k, tol)
    ev2 = series_oracle(delay.pmf, lambda k: k * k, tol)
    if p >= 1.0:
        h = 0.0
    else:
        h = series_oracle(delay.pmf, _neg_log_pmf(p), tol)
    rate = h / (ev + et)
    aoi = (et2 + ev2 + 2.0 * et * ev) / (2.0 * (et + ev))
    return rate, aoi


def oracle_threshold(q, tau0, p, tol=1e-13):
    """(rate, aoi) for the threshold policy from series sums only."""
    model, delay = ArrivalModel(q), GeomDelay(p)
    ez = series_oracle(model.tau_pmf, lambda k: np.maximum(k, tau0), tol, start=1)
    ez2 = series_oracle(model.tau_pmf, lambda k: np.maximum(k, tau0) ** 2, tol, start=1)
    ev = series_oracle(delay.pmf, lambda k: k, tol)
    ev2 = series_oracle(delay.pmf, lambda k: k * k, tol)
    if p >= 1.0:
        h = 0.0
    else:
        h = series_oracle(delay.pmf, _neg_log_pmf(p), tol)
    rate = h / (ev + ez)
    aoi = (ez2 + ev2 + 2.0 * ez * ev) / (2.0 * (ez + ev))
    return rate, aoi


def oracle_simplified(q, c, p_low, p_high, tol=1e-13):
    """(rate, aoi) for the two-regime policy from series sums only."""
    model = ArrivalModel(q)
    low, high = GeomDelay(p_low), GeomDelay(p_high)
    et = series_oracle(model.tau_pmf, lambda k: k, tol, start=1)
    et2 = series_oracle(model.tau_pmf, lambda k: k * k, tol, start=1)
    w_low = series_oracle(model.tau_pmf, lambda k: 1.0 * (k <= c), tol, start=1)
    w_high = 1.0 - w_low
    et_low = series_oracle(model.tau_pmf, lambda k: k * (k <= c), tol, start=1)
    et_high = et - et_low

    def stats(delay, p):
        ev = series_oracle(delay.pmf, lambda k: k, tol)
        ev2 = series_oracle(delay.pmf, lambda k: k * k, tol)
        h = 0.0 if p >= 1.0 else series_oracle(delay.pmf, _neg_log_pmf(p), tol)
        return ev, ev2, h

    ev_l, ev2_l, h_l = stats(low, p_low)
    ev_h, ev2_h, h_h = stats(high, p_high)
    ev = w_low * ev_l + w_high * ev_h
    ev2 = w_low * ev2_l + w_high * ev2_h
    etv = ev_l * et_low + ev_h * et_high
    rate = (w_low * h_l + w_high * h_h) / (et + ev)
    aoi = (et2 + ev2 + 2.0 * etv) / (2.0 * (et + ev))
    return rate, aoi


def analytic_cycle_moments(policy, model):
    """dict of analytic E[T], E[T^2], E[V], E[tau*V], E[Z] for any policy."""
    from aoitradeoff import GeneralEtatp, tau_moments, v_moments

    et, et2 = tau_moments(model)
    if isinstance(policy, ZeroWait):
        ev, ev2, _ = v_moments(GeomDelay(policy.p))
        return {
            "mean_T": et + ev,
            "second_T": et2 + ev2 + 2.0 * et * ev,
            "mean_V": ev,
            "cross_tauV": et * ev,
            "mean_Z": et,
        }
    if isinstance(policy, Threshold):
        from aoitradeoff import threshold_moments

        ez, ez2 = threshold_moments(model, policy.tau0)
        ev, ev2, _ = v_moments(GeomDelay(policy.p))
        return {
            "mean_T": ez + ev,
            "second_T": ez2 + ev2 + 2.0 * ez * ev,
            "mean_V": ev,
            "cross_tauV": et * ev,
            "mean_Z": ez,
        }
    if isinstance(policy, SimplifiedEtatp):
        q, c = model.q, policy.c
        w_low = 1.0 - (1.0 - q) ** c
        w_high = (1.0 - q) ** c
        et_low = (1.0 - (1.0 - q) ** c * (1.0 + c * q)) / q
        et_high = et - et_low
        ev_l, ev2_l, _ = v_moments(GeomDelay(policy.p_low))
        ev_h, ev2_h, _ = v_moments(GeomDelay(policy.p_high))
        ev = w_low * ev_l + w_high * ev_h
        ev2 = w_low * ev2_l + w_high * ev2_h
        etv = ev_l * et_low + ev_h * et_high
        return {
            "mean_T": et + ev,
            "second_T": et2 + ev2 + 2.0 * etv,
            "mean_V": ev,
            "cross_tauV": etv,
            "mean_Z": et,
        }
    if isinstance(policy, GeneralEtatp):
        pmf = policy.pmf
        t = np.arange(1, pmf.tau_max + 1, dtype=float)[:, None]
        v = np.arange(0, pmf.v_max + 1, dtype=float)[None, :]
        w = pmf.tau_weights
        ev_rows = (pmf.rows * v).sum(axis=1)
        mean_t, second_t, _ = pmf.moments()
        return {
            "mean_T": mean_t,
            "second_T": second_t,
            "mean_V": float(w @ ev_rows),
            "cross_tauV": float(w @ (t[:, 0] * ev_rows)),
            "mean_Z": float(w @ t[:, 0]),
        }
    raise TypeError(type(policy).__name__)


def simplex_grid(n_cells, n_parts):
    """All compositions of n_cells into n_parts, as pmfs (rows sum to 1)."""
    out = []

    def rec(prefix, remaining, parts_left):
        if parts_left == 1:
            out.append(prefix + [remaining])
            return
        for k in range(remaining + 1):
            rec(prefix + [k], remaining - k, parts_left - 1)

    rec([], n_cells, n_parts)
    return np.asarray(out, dtype=float) / n_cells


def entropy_rows(rows):
    """Row-wise Shannon entropy in bits, 0*log0 = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(rows > 0.0, rows * np.log2(rows), 0.0)
    return -plogp.sum(axis=-1)


def brute_ratio_tau1(q_weightless, v_max, alpha, n_cells=100, refine_rounds=6):
    """Brute-force max of H(row)/E[1+V] s.t. E[(1+V)^2] <= 2*alpha*E[1+V]
    for a single-row pmf (tau identically 1), by grid plus local refinement.

    Independent oracle for the inner/outer solver at tau_max = 1.
    """
    s = np.arange(1, v_max + 2, dtype=float)  # s = 1 + v

    def evaluate(rows):
        mean = rows @ s
        second = rows @ (s * s)
        h = entropy_rows(rows)
        feas = second <= 2.0 * alpha * mean + 1e-12
        ratio = np.where(feas, h / mean, -np.inf)
        return ratio

    rows = simplex_grid(n_cells, v_max + 1)
    ratio = evaluate(rows)
    best = rows[int(np.argmax(ratio))]
    step = 1.0 / n_cells
    for _ in range(refine_rounds):
        step *= 0.2
        deltas = np.array(
            np.meshgrid(*[np.linspace(-2 * step, 2 * step, 9)] * (v_max + 1))
        ).reshape(v_max + 1, -1).T
        cand = best[None, :] + deltas
        cand = cand[(cand >= 0.0).all(axis=1)]
        cand = cand / cand.sum(axis=1, keepdims=True)
        ratio = evaluate(cand)
        best = cand[int(np.argmax(ratio))]
    return float(evaluate(best[None, :])[0]), best


def boundary_scan_tau1_v3(alpha, n=2000):
    """Exact scan of the active-constraint surface for tau = 1, v_max = 3.

    With the second-moment cap tight, fixing (p2, p3) leaves a 2x2 linear
    system for (p1, p4); scanning a fine (p2, p3) grid covers the boundary
    optimum that box refinement tracks poorly.
    """
    s = np.array([1.0, 2.0, 3.0, 4.0])
    g = np.linspace(0.0, 1.0, n + 1)
    p2, p3 = np.meshgrid(g, g, indexing="ij")
    p2, p3 = p2.ravel(), p3.ravel()
    # p1 + p4 = 1 - p2 - p3 ; (s1^2-2a*s1) p1 + (s4^2-2a*s4) p4 = rhs
    a1 = s[0] * s[0] - 2.0 * alpha * s[0]
    a4 = s[3] * s[3] - 2.0 * alpha * s[3]
    rhs = -(s[1] * s[1] - 2.0 * alpha * s[1]) * p2 \
        - (s[2] * s[2] - 2.0 * alpha * s[2]) * p3
    rem = 1.0 - p2 - p3
    p4 = (rhs - a1 * rem) / (a4 - a1)
    p1 = rem - p4
    ok = (p1 >= 0.0) & (p4 >= 0.0) & (rem >= 0.0)
    if not ok.any():
        return -math.inf  # cap boundary misses the simplex (slack constraint)
    rows = np.stack([p1[ok], p2[ok], p3[ok], p4[ok]], axis=1)
    mean = rows @ s
    ratio = entropy_rows(rows) / mean
    return float(ratio.max())


def brute_ratio_tau2(w, v_max, alpha, n_cells=25, refine_rounds=6):
    """Brute-force max of sum_t w_t H_t / E[T] s.t. E[T^2] <= 2*alpha*E[T]
    over a product of two simplices (tau in {1, 2} with weights w).

    Independent oracle for the solver at tau_max = 2.
    """
    s1 = np.arange(1, v_max + 2, dtype=float)
    s2 = np.arange(2, v_max + 3, dtype=float)

    def row_stats(rows, s):
        return rows @ s, rows @ (s * s), entropy_rows(rows)

    def best_pair(rows_a, rows_b):
        m1, q1, h1 = row_stats(rows_a, s1)
        m2, q2, h2 = row_stats(rows_b, s2)
        mean = w[0] * m1[:, None] + w[1] * m2[None, :]
        second = w[0] * q1[:, None] + w[1] * q2[None, :]
        h = w[0] * h1[:, None] + w[1] * h2[None, :]
        ratio = np.where(second <= 2.0 * alpha * mean + 1e-12, h / mean, -np.inf)
        i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
        return float(ratio[i, j]), rows_a[i], rows_b[j]

    grid = simplex_grid(n_cells, v_max + 1)
    val, ra, rb = best_pair(grid, grid)
    step = 1.0 / n_cells
    for _ in range(refine_rounds):
        step *= 0.2

        def perturb(base):
            deltas = np.array(
                np.meshgrid(*[np.linspace(-2 * step, 2 * step, 7)] * (v_max + 1))
            ).reshape(v_max + 1, -1).T
            cand = base[None, :] + deltas
            cand = cand[(cand >= 0.0).all(axis=1)]
            return cand / cand.sum(axis=1, keepdims=True)

        val, ra, rb = best_pair(perturb(ra), perturb(rb))
    return val, ra, rb
