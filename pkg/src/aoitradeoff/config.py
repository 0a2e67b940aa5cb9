"""Run configuration for curve sweeps: flat key = value files with # comments.

Every field has a default; unknown keys are rejected.  CLI flags override
config keys.  The default output directory can also come from the
AOITRADEOFF_OUTDIR environment variable.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace

OUTDIR_ENV = "AOITRADEOFF_OUTDIR"


def _float_tuple(s):
    return tuple(float(x) for x in str(s).split(",") if x.strip())


def _str_tuple(s):
    return tuple(x.strip() for x in str(s).split(",") if x.strip())


def _opt_int(s):
    s = str(s).strip()
    return None if s.lower() in ("", "none") else int(s)


_PARSERS = {
    "q_values": _float_tuple,
    "policies": _str_tuple,
    "n_rate_points": int,
    "rate_max_frac": float,
    "tau_max": _opt_int,
    "v_max": _opt_int,
    "eps": float,
    "m_grid": int,
    "seed": int,
    "outdir": str,
    "formats": _str_tuple,
}


@dataclass(frozen=True)
class RunConfig:
    q_values: tuple = (0.2, 0.5, 0.7)
    policies: tuple = ("zero-wait", "threshold", "simplified", "etatp")
    n_rate_points: int = 40
    rate_max_frac: float = 0.98
    tau_max: int | None = None
    v_max: int | None = None
    eps: float = 1e-8
    m_grid: int = 64
    seed: int = 0
    outdir: str | None = None
    formats: tuple = ("csv", "svg")

    def __post_init__(self):
        if not self.q_values:
            raise ValueError("q_values must be nonempty")
        for q in self.q_values:
            if not 0.0 < q <= 1.0:
                raise ValueError(f"q must be in (0, 1], got {q}")
        from .curves import POLICY_KINDS

        for p in self.policies:
            if p not in POLICY_KINDS:
                raise ValueError(f"unknown policy {p!r}")
        for f in self.formats:
            if f not in ("csv", "svg"):
                raise ValueError(f"unknown output format {f!r}")
        if self.n_rate_points < 0:
            raise ValueError("n_rate_points must be nonnegative")
        if not 0.0 < self.rate_max_frac < 1.0:
            raise ValueError("rate_max_frac must be in (0, 1)")

    def resolved_outdir(self) -> str:
        if self.outdir:
            return self.outdir
        return os.environ.get(OUTDIR_ENV, ".")

    def trunc(self):
        if self.tau_max is None and self.v_max is None:
            return None
        if self.tau_max is None or self.v_max is None:
            raise ValueError("tau_max and v_max must be overridden together")
        return (self.tau_max, self.v_max)

    @classmethod
    def from_mapping(cls, mapping) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in mapping.items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _PARSERS[key](value)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        mapping = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected 'key = value'")
                key, value = (part.strip() for part in line.split("=", 1))
                mapping[key] = value
        return cls.from_mapping(mapping)

    def override(self, **kwargs) -> "RunConfig":
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **kwargs) if kwargs else self
