"""Massive-MIMO multipair relaying with pilots overlaid on data.

Closed-form achievable rates, an instantaneous-channel Monte-Carlo chain,
high/low-power limits, SCA power allocation and a sweep runner.
"""

__version__ = "0.1.0"

from .asymptotics import AsymptoticReport, asymptotic_sinrs, corollary_check, limit_consistency, sinr_limits
from .channels import ChannelSet, draw_channels, draw_signals, make_pilots, parse_seed, rng_for
from .config import (
    ConfigError,
    FadingProfile,
    FrameAccounting,
    SystemConfig,
    db2lin,
    frame_accounting,
    lin2db,
    make_config,
)
from .estimation import (
    EstimatorStats,
    detect_phaseB_data,
    estimate_destination,
    estimate_source_first,
    estimate_source_steady,
    estimator_stats,
)
from .montecarlo import TrialResult, detection_error_vs_M, moment_oracles, simulate_chain
from .power import PowerSolution, SCAPowerAllocator, rate_gradient, sca_optimize, solve_lp_subproblem
from .rates import RateBreakdown, conventional_rates, rate_downlink, rate_e2e, rate_uplink, system_rate

__all__ = [
    "AsymptoticReport", "ChannelSet", "ConfigError", "EstimatorStats", "FadingProfile", "FrameAccounting",
    "PowerSolution", "RateBreakdown", "SCAPowerAllocator", "SystemConfig", "TrialResult",
    "asymptotic_sinrs", "conventional_rates", "corollary_check", "db2lin", "detect_phaseB_data",
    "detection_error_vs_M", "draw_channels", "draw_signals", "estimate_destination", "estimate_source_first",
    "estimate_source_steady", "estimator_stats", "frame_accounting", "limit_consistency", "lin2db",
    "make_config", "make_pilots", "moment_oracles", "parse_seed", "rate_downlink", "rate_e2e", "rate_gradient",
    "rate_uplink", "rng_for", "sca_optimize", "simulate_chain", "sinr_limits", "solve_lp_subproblem",
    "system_rate",
]
