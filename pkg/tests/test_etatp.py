"""Unit tests for the adaptive-policy solver (inner program, outer search,
rate-floor inversion, and the alpha sweep)."""

import numpy as np
import pytest

from aoitradeoff import (
    ArrivalModel,
    ConditionalPmf,
    EtatpInfeasibleError,
    GeneralEtatp,
    default_truncation,
    etatp_curve,
    max_rate_zero_wait,
    min_aoi_at_rate,
    optimize_simplified,
    optimize_threshold,
    optimize_zero_wait,
    solve_inner,
    solve_outer,
    threshold_moments,
    threshold_point,
    truncated_tau_weights,
)
from helpers import (
    boundary_scan_tau1_v3,
    brute_ratio_tau1,
    brute_ratio_tau2,
    entropy_rows,
)

EPS = 1e-8


def _random_pmf(rng, tau_max, v_max, model):
    rows = rng.dirichlet(np.ones(v_max + 1), size=tau_max)
    w, _ = truncated_tau_weights(model, tau_max)
    return ConditionalPmf(tau_max, v_max, rows, w)


def test_conditional_pmf_validation():
    w = np.array([1.0])
    with pytest.raises(ValueError):
        ConditionalPmf(1, 1, np.array([[0.6, 0.6]]), w)  # row sums to 1.2
    with pytest.raises(ValueError):
        ConditionalPmf(1, 1, np.array([[1.2, -0.2]]), w)  # negative mass
    with pytest.raises(ValueError):
        ConditionalPmf(1, 2, np.array([[0.5, 0.5]]), w)  # shape mismatch
    with pytest.raises(ValueError):
        ConditionalPmf(1, 1, np.array([[0.5, 0.5]]), np.array([0.9]))


def test_conditional_pmf_moments_deterministic():
    # v identically 2 given tau = 1: T = 3 surely
    pmf = ConditionalPmf(1, 3, np.array([[0.0, 0.0, 1.0, 0.0]]), np.array([1.0]))
    mean, second, entropy = pmf.moments()
    assert (mean, second, entropy) == (3.0, 9.0, 0.0)


def test_truncated_tau_weights():
    w, discarded = truncated_tau_weights(ArrivalModel(0.5), 20)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert 0.0 <= discarded < 1e-5
    assert w[0] > w[1] > w[2]


def test_default_truncation_tail_mass():
    for q in (0.2, 0.5, 0.7, 1.0):
        model = ArrivalModel(q)
        tau_max, v_max = default_truncation(model)
        _, discarded = truncated_tau_weights(model, tau_max)
        assert discarded <= 1e-10
        assert v_max >= 8


def test_solve_inner_trivial_instance():
    # q=1, v_max=1, m=1.5: the mean constraint forces Bernoulli(0.5)
    sol = solve_inner(ArrivalModel(1.0), 100.0, 1.5, trunc=(1, 1))
    assert sol.entropy_bits == pytest.approx(1.0, abs=1e-9)
    assert sol.objective == pytest.approx(2.0 / 3.0, abs=1e-9)
    np.testing.assert_allclose(sol.pmf.rows, [[0.5, 0.5]], atol=1e-9)
    assert sol.objective == pytest.approx(sol.entropy_bits / sol.m, abs=1e-12)
    assert sol.duality_gap_bound >= 0.0
    assert sol.duality_gap_bound <= EPS


def test_solve_inner_mean_constraint_enforced():
    sol = solve_inner(ArrivalModel(0.5), 3.0, 4.0, trunc=(30, 40))
    mean, second, entropy = sol.pmf.moments()
    assert abs(mean - 4.0) <= 1e-10 * 4.0
    assert second <= 2.0 * 3.0 * 4.0 + 1e-7
    assert entropy == pytest.approx(sol.entropy_bits, abs=1e-9)


def test_solve_inner_infeasible_mean():
    with pytest.raises(EtatpInfeasibleError):
        solve_inner(ArrivalModel(0.5), 10.0, 1.0, trunc=(30, 40))  # m < E[tau]
    with pytest.raises(EtatpInfeasibleError):
        solve_inner(ArrivalModel(0.5), 10.0, 100.0, trunc=(30, 40))  # m > max


def test_entropy_objective_concave():
    # the inner objective at fixed m is conditional entropy, concave in the pmf
    rng = np.random.default_rng(5)
    model = ArrivalModel(0.4)
    for _ in range(50):
        a = _random_pmf(rng, 6, 5, model)
        b = _random_pmf(rng, 6, 5, model)
        lam = float(rng.uniform(0.0, 1.0))
        mix = ConditionalPmf(6, 5, lam * a.rows + (1 - lam) * b.rows, a.tau_weights)
        h = lambda pmf: pmf.moments()[2]
        assert h(mix) >= lam * h(a) + (1 - lam) * h(b) - 1e-9


def test_solver_matches_brute_force_tau1():
    # q=1 collapses the weights onto tau=1; dense grid + refinement oracle
    model = ArrivalModel(1.0)
    for alpha in (0.9, 1.2, 3.0):
        pt = solve_outer(model, alpha, trunc=(1, 3))
        # interior optima come out of the box-refined grid; the cap-binding
        # case needs the exact boundary scan as well
        brute, _ = brute_ratio_tau1(None, 3, alpha)
        brute = max(brute, boundary_scan_tau1_v3(alpha))
        assert pt.rate == pytest.approx(brute, abs=max(2.0 * EPS, 5e-5))


def test_solver_matches_brute_force_tau2():
    model = ArrivalModel(0.6)
    w, _ = truncated_tau_weights(model, 2)
    for alpha in (1.5, 2.5):
        pt = solve_outer(model, alpha, trunc=(2, 2))
        brute, _, _ = brute_ratio_tau2(w, 2, alpha)
        assert pt.rate == pytest.approx(brute, abs=max(2.0 * EPS, 5e-5))


def test_scan_oracle_instance():
    # q=1, v_max=1, alpha=0.9: scan of H2(theta)/(1+theta) under theta <= 2/3
    theta = np.linspace(1e-6, 2.0 / 3.0, 2_000_001)
    h = -(theta * np.log2(theta) + (1 - theta) * np.log2(1 - theta))
    scan = (h / (1.0 + theta)).max()
    pt = solve_outer(ArrivalModel(1.0), 0.9, trunc=(1, 1))
    assert pt.rate == pytest.approx(0.6942, abs=1e-3)
    assert pt.rate == pytest.approx(scan, abs=1e-6)


def test_outer_alpha_infinity_matches_class_maximum():
    model = ArrivalModel(0.5)
    pt = solve_outer(model, 1e9)
    r_star, _ = max_rate_zero_wait(model)
    assert pt.rate == pytest.approx(r_star, abs=1e-7)
    assert pt.aoi <= 1e9


def test_outer_boundary_alpha_reported():
    # alpha = 1/(2q): only the degenerate policy remains in the limit
    with pytest.raises(EtatpInfeasibleError):
        solve_outer(ArrivalModel(0.5), 1.0, trunc=(30, 40))


def test_outer_dominates_threshold_at_equal_alpha():
    model = ArrivalModel(0.5)
    alpha = 2.5
    pt = solve_outer(model, alpha, trunc=(40, 60))
    assert pt.aoi <= alpha + 1e-6
    best = 0.0
    for tau0 in range(10):
        for p in np.linspace(0.01, 1.0, 400):
            cand = threshold_point(model, tau0, float(p))
            if cand.aoi <= alpha:
                best = max(best, cand.rate)
    assert pt.rate >= best - 1e-6


def test_etatp_curve_monotone_and_errors():
    model = ArrivalModel(0.5)
    curve = etatp_curve(model, [0.8, 1.5, 2.5, 5.0, 50.0], trunc=(30, 40))
    rates = [p.rate for p in curve.points]
    assert all(b >= a - 1e-9 for a, b in zip(rates, rates[1:]))
    assert any(alpha == 0.8 for alpha, _ in curve.metadata["errors"])
    with pytest.raises(ValueError):
        etatp_curve(model, [2.0, 1.0])
    single = etatp_curve(model, [2.5], trunc=(30, 40))
    ref = solve_outer(model, 2.5, trunc=(30, 40))
    assert single.points[0].rate == pytest.approx(ref.rate, abs=1e-9)


def test_rate_increases_with_truncation():
    model = ArrivalModel(0.5)
    # truncation tails below 1e-8 mass; renormalization effects on the rate
    # stay well under the test tolerance
    small = solve_outer(model, 2.5, trunc=(28, 40)).rate
    big = solve_outer(model, 2.5, trunc=(45, 80)).rate
    assert big >= small - 1e-6


def test_min_aoi_at_rate_zero_floor():
    model = ArrivalModel(0.5)
    pt = min_aoi_at_rate(model, 0.0)
    brute = min(
        threshold_moments(model, tau0)[1] / (2.0 * threshold_moments(model, tau0)[0])
        for tau0 in range(51)
    )
    assert pt.rate == 0.0
    assert pt.aoi == pytest.approx(brute, abs=1e-9)
    assert isinstance(pt.params, GeneralEtatp)


def test_min_aoi_at_rate_dominates_other_classes():
    model = ArrivalModel(0.5)
    r = 0.4
    pt = min_aoi_at_rate(model, r)
    assert pt.rate >= r - 1e-9
    for other in (
        optimize_zero_wait(model, r),
        optimize_threshold(model, r),
        optimize_simplified(model, r),
    ):
        assert pt.aoi <= other.aoi + 1e-6


def test_min_aoi_at_rate_infeasible_floor():
    model = ArrivalModel(0.5)
    with pytest.raises(EtatpInfeasibleError):
        min_aoi_at_rate(model, 0.9)


def test_min_aoi_solution_entropy_supports_rate():
    # the returned pmf really achieves the reported rate: H(V|tau)/E[T] >= r
    model = ArrivalModel(0.5)
    pt = min_aoi_at_rate(model, 0.5)
    mean, second, entropy = pt.params.pmf.moments()
    assert entropy / mean >= 0.5 - 1e-8
    assert second / (2.0 * mean) == pytest.approx(pt.aoi, abs=1e-9)
