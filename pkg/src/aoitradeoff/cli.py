"""Command-line interface.

Subcommands: point, curve, compare, simulate, validate, figures.
Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .stochastics import ArrivalModel, GeomDelay, SeriesConvergenceError, series_oracle
from .policies import (
    SimplifiedEtatp,
    Threshold,
    ZeroWait,
    simplified_point,
    threshold_point,
    zero_wait_point,
)
from .search import InfeasibleRateError
from .etatp import EtatpConvergenceError, EtatpInfeasibleError
from .simulator import empirical_rate, simulate
from .curves import (
    POLICY_KINDS,
    build_region,
    default_rate_grid,
    dominance_report,
    emit_csv,
    emit_svg,
)
from .config import RunConfig

_NUMERICAL_ERRORS = (
    InfeasibleRateError,
    EtatpInfeasibleError,
    EtatpConvergenceError,
    SeriesConvergenceError,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _policy_from_args(args) -> object:
    kind = args.policy
    if kind == "zero-wait":
        if args.p is None:
            raise _UsageError("--p is required for the zero-wait policy")
        return ZeroWait(args.p)
    if kind == "threshold":
        if args.tau0 is None or args.p is None:
            raise _UsageError("--tau0 and --p are required for the threshold policy")
        return Threshold(args.tau0, args.p)
    if kind == "simplified":
        if args.c is None or args.p_low is None or args.p_high is None:
            raise _UsageError("--c, --p-low and --p-high are required for simplified")
        return SimplifiedEtatp(args.c, args.p_low, args.p_high)
    raise _UsageError(f"policy {kind!r} is not supported here")


def _point_from_args(args):
    model = ArrivalModel(args.q)
    policy = _policy_from_args(args)
    if isinstance(policy, ZeroWait):
        return zero_wait_point(model, policy.p)
    if isinstance(policy, Threshold):
        return threshold_point(model, policy.tau0, policy.p)
    return simplified_point(model, policy.c, policy.p_low, policy.p_high)


def _add_policy_flags(sub, kinds):
    sub.add_argument("--policy", required=True, choices=kinds)
    sub.add_argument("--q", type=float, required=True)
    sub.add_argument("--p", type=float, default=None)
    sub.add_argument("--tau0", type=int, default=None)
    sub.add_argument("--c", type=int, default=None)
    sub.add_argument("--p-low", dest="p_low", type=float, default=None)
    sub.add_argument("--p-high", dest="p_high", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aoitradeoff", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_point = sub.add_parser("point", help="evaluate one closed-form policy")
    _add_policy_flags(p_point, ("zero-wait", "threshold", "simplified"))

    p_curve = sub.add_parser("curve", help="sweep one policy family over rate floors")
    p_curve.add_argument("--policy", required=True, choices=POLICY_KINDS)
    p_curve.add_argument("--q", type=float, required=True)
    p_curve.add_argument("--points", type=int, default=40)
    p_curve.add_argument("--rate-max-frac", type=float, default=0.98)
    p_curve.add_argument("--tau-max", type=int, default=None)
    p_curve.add_argument("--v-max", type=int, default=None)
    p_curve.add_argument("--m-grid", type=int, default=64)
    p_curve.add_argument("--csv", default=None)
    p_curve.add_argument("--svg", default=None)

    p_cmp = sub.add_parser("compare", help="dominance report across policies")
    p_cmp.add_argument("--q", type=float, required=True)
    p_cmp.add_argument("--policies", default=",".join(POLICY_KINDS))
    p_cmp.add_argument("--points", type=int, default=40)
    p_cmp.add_argument("--rate-max-frac", type=float, default=0.98)
    p_cmp.add_argument("--tau-max", type=int, default=None)
    p_cmp.add_argument("--v-max", type=int, default=None)
    p_cmp.add_argument("--m-grid", type=int, default=64)

    p_sim = sub.add_parser("simulate", help="Monte Carlo validation run")
    _add_policy_flags(p_sim, ("zero-wait", "threshold", "simplified"))
    p_sim.add_argument("--cycles", type=int, default=1_000_000)
    p_sim.add_argument("--seed", type=int, default=0)

    p_val = sub.add_parser("validate", help="analytic vs oracle vs simulation suite")
    p_val.add_argument("--draws", type=int, default=200)
    p_val.add_argument("--cycles", type=int, default=200_000)
    p_val.add_argument("--seed", type=int, default=0)

    p_fig = sub.add_parser("figures", help="reproduce the three-figure experiment")
    p_fig.add_argument("--config", default=None)
    p_fig.add_argument("--q", default=None, help="comma-separated q values")
    p_fig.add_argument("--outdir", default=None)
    p_fig.add_argument("--points", type=int, default=None)
    p_fig.add_argument("--seed", type=int, default=None)
    return parser


def _trunc_from_args(args):
    if args.tau_max is None and args.v_max is None:
        return None
    if args.tau_max is None or args.v_max is None:
        raise _UsageError("--tau-max and --v-max must be given together")
    return (args.tau_max, args.v_max)


def _cmd_point(args) -> int:
    point = _point_from_args(args)
    print(f"rate_bits_per_slot = {point.rate:.12g}")
    print(f"aoi_slots = {point.aoi:.12g}")
    return 0


def _cmd_curve(args) -> int:
    model = ArrivalModel(args.q)
    grid = default_rate_grid(model, args.points, args.rate_max_frac)
    curve = build_region(model, args.policy, grid, _trunc_from_args(args), args.m_grid)
    for point in curve.points:
        print(f"{point.rate:.12g}\t{point.aoi:.12g}")
    if curve.metadata["errors"]:
        for r, msg in curve.metadata["errors"]:
            print(f"# failed at rate floor {r:.6g}: {msg}", file=sys.stderr)
    if args.csv:
        emit_csv(curve, args.csv)
    if args.svg:
        emit_svg(curve, args.svg)
    return 0


def _cmd_compare(args) -> int:
    model = ArrivalModel(args.q)
    kinds = [k.strip() for k in args.policies.split(",") if k.strip()]
    for k in kinds:
        if k not in POLICY_KINDS:
            raise _UsageError(f"unknown policy {k!r}")
    grid = default_rate_grid(model, args.points, args.rate_max_frac)
    trunc = _trunc_from_args(args)
    curves = [build_region(model, k, grid, trunc, args.m_grid) for k in kinds]
    print(dominance_report(curves).render())
    return 0


def _cmd_simulate(args) -> int:
    model = ArrivalModel(args.q)
    policy = _policy_from_args(args)
    report = simulate(policy, model, args.cycles, args.seed)
    print(f"n_cycles = {report.n_cycles}")
    print(f"seed = {report.seed}")
    print(f"rng_algorithm = {report.rng_algorithm}")
    for name in ("aoi_hat", "mean_T_hat", "second_T_hat", "mean_V_hat",
                 "cross_tauV_hat", "mean_Z_hat"):
        print(f"{name} = {getattr(report, name):.12g}")
    for name, se in report.stderr.items():
        print(f"stderr[{name}] = {se:.6g}")
    print(f"empirical_rate = {empirical_rate(report, policy):.12g}")
    return 0


def _cmd_validate(args) -> int:
    rng = np.random.default_rng(args.seed)
    failures = 0

    def check(label, ok):
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {label}")
        if not ok:
            failures += 1

    worst = 0.0
    for _ in range(args.draws):
        q = float(rng.uniform(0.05, 0.95))
        p = float(rng.uniform(0.05, 0.95))
        model = ArrivalModel(q)
        pt = zero_wait_point(model, p)
        et = series_oracle(model.tau_pmf, lambda k: k, 1e-13, start=1)
        et2 = series_oracle(model.tau_pmf, lambda k: k * k, 1e-13, start=1)
        delay = GeomDelay(p)
        ev = series_oracle(delay.pmf, lambda k: k, 1e-13)
        ev2 = series_oracle(delay.pmf, lambda k: k * k, 1e-13)
        aoi = (et2 + ev2 + 2 * et * ev) / (2 * (et + ev))
        worst = max(worst, abs(aoi - pt.aoi) / aoi)
    check(f"zero-wait AoI vs series oracle over {args.draws} draws "
          f"(max rel err {worst:.2e})", worst < 1e-9)

    p = 0.37
    model = ArrivalModel(0.42)
    a = zero_wait_point(model, p)
    b = threshold_point(model, 1, p)
    c = simplified_point(model, 3, p, p)
    ident = max(abs(a.rate - b.rate), abs(a.aoi - b.aoi),
                abs(a.rate - c.rate), abs(a.aoi - c.aoi))
    check(f"reduction identities (max dev {ident:.2e})", ident < 1e-12)

    model = ArrivalModel(0.5)
    rep = simulate(ZeroWait(0.5), model, args.cycles, args.seed)
    expect = zero_wait_point(model, 0.5)
    dev = abs(rep.aoi_hat - expect.aoi) / max(rep.stderr["aoi"], 1e-12)
    check(f"simulated zero-wait AoI within 5 SE of analytic (dev {dev:.2f} SE)", dev < 5.0)
    rdev = abs(empirical_rate(rep, ZeroWait(0.5)) - expect.rate) / expect.rate
    check(f"empirical rate within 2% of analytic (rel dev {rdev:.2%})", rdev < 0.02)

    return 2 if failures else 0


def _cmd_figures(args) -> int:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {}
    if args.q:
        overrides["q_values"] = tuple(float(x) for x in args.q.split(","))
    if args.outdir is not None:
        overrides["outdir"] = args.outdir
    if args.points is not None:
        overrides["n_rate_points"] = args.points
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = cfg.override(**overrides)
    outdir = cfg.resolved_outdir()
    os.makedirs(outdir, exist_ok=True)
    for q in cfg.q_values:
        model = ArrivalModel(q)
        grid = default_rate_grid(model, cfg.n_rate_points, cfg.rate_max_frac)
        curves = [
            build_region(model, kind, grid, cfg.trunc(), cfg.m_grid)
            for kind in cfg.policies
        ]
        tag = f"{q:g}".replace(".", "p")
        if "csv" in cfg.formats:
            path = os.path.join(outdir, f"tradeoff_q{tag}.csv")
            emit_csv(curves, path)
            print(f"wrote {path}")
        if "svg" in cfg.formats:
            path = os.path.join(outdir, f"tradeoff_q{tag}.svg")
            emit_svg(curves, path)
            print(f"wrote {path}")
        if len(curves) > 1:
            print(dominance_report(curves).render())
    return 0


_COMMANDS = {
    "point": _cmd_point,
    "curve": _cmd_curve,
    "compare": _cmd_compare,
    "simulate": _cmd_simulate,
    "validate": _cmd_validate,
    "figures": _cmd_figures,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
