"""Rate vs. age-of-information tradeoff curves for an energy-harvesting
transmitter that encodes a message in the timings of its status updates."""

__version__ = "0.1.0"

from .stochastics import (
    ArrivalModel,
    GeomDelay,
    SeriesConvergenceError,
    binary_entropy,
    series_oracle,
    tau_moments,
    v_moments,
)
from .policies import (
    SimplifiedEtatp,
    Threshold,
    TradeoffCurve,
    TradeoffPoint,
    ZeroWait,
    simplified_point,
    threshold_moments,
    threshold_point,
    zero_wait_point,
)
from .search import (
    InfeasibleRateError,
    golden_section,
    max_rate_zero_wait,
    optimize_simplified,
    optimize_threshold,
    optimize_zero_wait,
)
from .etatp import (
    ConditionalPmf,
    EtatpConvergenceError,
    EtatpInfeasibleError,
    GeneralEtatp,
    InnerSolution,
    default_truncation,
    etatp_curve,
    min_aoi_at_rate,
    solve_inner,
    solve_outer,
    truncated_tau_weights,
)
from .simulator import SimReport, empirical_rate, simulate
from .curves import (
    DominanceReport,
    PLOT_TOLERANCE,
    build_region,
    default_rate_grid,
    dominance_report,
    emit_csv,
    emit_svg,
    parse_csv,
)
from .config import RunConfig

PolicyParams = ZeroWait | Threshold | SimplifiedEtatp | GeneralEtatp
