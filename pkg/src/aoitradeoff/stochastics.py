"""Geometric distributions, entropy, exact moments, and a truncated-series oracle.

Conventions used throughout the package:

* energy inter-arrival time tau lives on {1, 2, ...} with P[tau=k] = q(1-q)^(k-1)
* information delay V lives on {0, 1, ...} with P[V=v] = p(1-p)^v
* entropies in bits, times in slots, rates in bits per slot
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_CHUNK = 4096
_MAX_TERMS = 10_000_000


class SeriesConvergenceError(RuntimeError):
    """The tail of a series could not be certified below tolerance."""


@dataclass(frozen=True)
class ArrivalModel:
    """Bernoulli energy arrivals with per-slot probability q."""

    q: float

    def __post_init__(self):
        if not 0.0 < self.q <= 1.0:
            raise ValueError(f"arrival probability must be in (0, 1], got {self.q}")

    def tau_pmf(self, k):
        """pmf of the geometric inter-arrival time, vectorized over k."""
        k = np.asarray(k, dtype=float)
        return np.where(k >= 1, self.q * (1.0 - self.q) ** (k - 1), 0.0)


@dataclass(frozen=True)
class GeomDelay:
    """Information delay V, geometric on {0, 1, ...} with success parameter p."""

    p: float

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"delay parameter must be in (0, 1], got {self.p}")

    def pmf(self, v):
        v = np.asarray(v, dtype=float)
        return np.where(v >= 0, self.p * (1.0 - self.p) ** v, 0.0)


def binary_entropy(p: float) -> float:
    """Entropy in bits of a Bernoulli(p) variable, with 0*log(0) = 0."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must be in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def tau_moments(model: ArrivalModel) -> tuple[float, float]:
    """(mean, second moment) of the geometric inter-arrival time."""
    q = model.q
    return 1.0 / q, (2.0 - q) / (q * q)


def v_moments(delay: GeomDelay) -> tuple[float, float, float]:
    """(mean, second moment, entropy in bits) of the information delay.

    The entropy of a geometric(p) variable on {0, 1, ...} is H2(p)/p.
    """
    p = delay.p
    mean = (1.0 - p) / p
    second = (2.0 - 3.0 * p + p * p) / (p * p)
    entropy = binary_entropy(p) / p
    return mean, second, entropy


def series_oracle(pmf, f, tol: float = 1e-12, start: int = 0) -> float:
    """Sum f(k)*pmf(k) over k >= start, truncated with a certified tail bound.

    ``pmf`` and ``f`` must accept integer numpy arrays.  The tail is bounded by
    a geometric envelope fitted to the trailing term ratios; this is valid for
    pmfs with (eventually) geometric tails and polynomially bounded f, which
    covers every expectation this package needs ground truth for.

    Raises SeriesConvergenceError if the bound cannot be certified within the
    term cap.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    total = 0.0
    k0 = start
    while k0 < start + _MAX_TERMS:
        k = np.arange(k0, k0 + _CHUNK, dtype=np.int64)
        terms = np.asarray(f(k), dtype=float) * np.asarray(pmf(k), dtype=float)
        total += float(terms.sum())
        tail = np.abs(terms[-64:])
        last = tail[-1]
        if last == 0.0 and not tail.any():
            # integrand vanished for a full trailing window; geometric tail of
            # the pmf keeps it there for the f's this oracle supports
            return total
        nz = tail[:-1] > 0.0
        if last > 0.0 and nz.all():
            ratios = tail[1:] / tail[:-1]
            rho = float(ratios.max())
            if rho < 1.0:
                bound = last * rho / (1.0 - rho)
                if bound < tol:
                    return total
        k0 += _CHUNK
    raise SeriesConvergenceError(
        f"tail bound not certified below {tol} within {_MAX_TERMS} terms"
    )
