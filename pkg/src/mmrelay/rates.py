"""Closed-form ergodic achievable-rate lower bounds.

SINRs are the use-and-forget effective SINRs of MRC uplink / MRT downlink
with MMSE estimates; per-pair decode-and-forward rates take the minimum of
the two hops and the system rate is normalized per slot over ``L``
coherence intervals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import FadingProfile, FrameAccounting, SystemConfig, check_fading, frame_accounting, loop_power
from .estimation import EstimatorStats, estimator_stats

LN2 = np.log(2.0)


def log2_1p(x):
    """``log2(1 + x)`` through log1p so tiny SINRs keep full precision."""
    return np.log1p(x) / LN2


def _pick(values, k):
    return values if k is None else values[k]


def sinr_downlink(stats: EstimatorStats, cfg: SystemConfig, fading: FadingProfile, k=None):
    """MRT downlink SINR ``M sigma_dk^4 / ((beta_dk + 1/rho_d) sum_i sigma_di^2)``."""
    total = stats.sigma2_d.sum()
    if cfg.rho_d <= 0 or total <= 0:
        return _pick(np.zeros(cfg.K), k)
    gamma = cfg.M * stats.sigma2_d**2 / ((fading.beta_d + 1.0 / cfg.rho_d) * total)
    return _pick(gamma, k)


def sinr_uplink_B(stats: EstimatorStats, cfg: SystemConfig, fading: FadingProfile, k=None):
    """Phase-B uplink SINR; the destination pilots act as extra noise."""
    if cfg.rho_s <= 0:
        return _pick(np.zeros(cfg.K), k)
    noise = (cfg.rho_p * fading.beta_d.sum() + 1.0) / cfg.rho_s
    return _pick(cfg.M * stats.sigma2_s / (fading.beta_s.sum() + noise), k)


def sinr_uplink_C(stats: EstimatorStats, cfg: SystemConfig, fading: FadingProfile, k=None, duplex=None):
    """Phase-C uplink SINR, with residual loop interference in full duplex."""
    duplex = cfg.duplex if duplex is None else duplex
    if cfg.rho_s <= 0:
        return _pick(np.zeros(cfg.K), k)
    li = loop_power(cfg.replace(duplex=duplex), fading)
    noise = (li + 1.0) / cfg.rho_s
    return _pick(cfg.M * stats.sigma2_s / (fading.beta_s.sum() + noise), k)


def interval_kind(cfg: SystemConfig, interval: int) -> str:
    if interval < 1:
        raise ValueError("interval index starts at 1")
    if cfg.is_fd and cfg.scheme == "overlay" and interval > 1:
        return "steady"
    return "first"


def _uplink(cfg, fading, kind, fa):
    stats = estimator_stats(cfg, fading, kind)
    gamma_C = sinr_uplink_C(stats, cfg, fading)
    if cfg.scheme == "overlay":
        gamma_B = sinr_uplink_B(stats, cfg, fading)
    else:
        gamma_B = np.zeros(cfg.K)
    rate = fa.T_B * log2_1p(gamma_B) + fa.T_C * log2_1p(gamma_C)
    return gamma_B, gamma_C, rate


def _downlink(cfg, fading, kind, fa):
    gamma = sinr_downlink(estimator_stats(cfg, fading, kind), cfg, fading)
    return gamma, fa.T_d * log2_1p(gamma)


def rate_uplink(cfg: SystemConfig, fading: FadingProfile, interval: int = 1) -> np.ndarray:
    """Per-pair uplink rate (bits per interval) in coherence interval ``interval``."""
    check_fading(cfg, fading)
    return _uplink(cfg, fading, interval_kind(cfg, interval), frame_accounting(cfg))[2]


def rate_downlink(cfg: SystemConfig, fading: FadingProfile, interval: int = 1) -> np.ndarray:
    check_fading(cfg, fading)
    return _downlink(cfg, fading, interval_kind(cfg, interval), frame_accounting(cfg))[1]


@dataclass(frozen=True)
class RateBreakdown:
    """Per-interval SINRs and rates; every array is shaped ``(L, K)``.

    Rates are in bits per interval, ``R_system`` in bits/s/Hz.
    """

    gamma_B: np.ndarray
    gamma_C: np.ndarray
    gamma_DL: np.ndarray
    R_UL: np.ndarray
    R_DL: np.ndarray
    R_pair: np.ndarray
    R_system: float
    frame: FrameAccounting

    @property
    def per_interval(self):
        return [
            {"gamma_B": b, "gamma_C": c, "gamma_DL": d, "R_UL": u, "R_DL": w, "R_pair": p}
            for b, c, d, u, w, p in zip(self.gamma_B, self.gamma_C, self.gamma_DL, self.R_UL, self.R_DL, self.R_pair)
        ]

    @property
    def total_bits(self) -> float:
        return float(self.R_pair.sum())


def _assemble(cfg, fading):
    fa = frame_accounting(cfg)
    kinds = [interval_kind(cfg, i) for i in range(1, cfg.L + 1)]
    cache = {}
    for kind in set(kinds):
        gB, gC, ul = _uplink(cfg, fading, kind, fa)
        gDL, dl = _downlink(cfg, fading, kind, fa)
        cache[kind] = (gB, gC, gDL, ul, dl)
    rows = [cache[kind] for kind in kinds]
    gB, gC, gDL, ul, dl = (np.array(col) for col in zip(*rows))
    pair = np.minimum(ul, dl)
    system = pair.sum() / (cfg.L * cfg.T_c)
    return RateBreakdown(gB, gC, gDL, ul, dl, pair, float(system), fa)


def rate_e2e(cfg: SystemConfig, fading: FadingProfile) -> RateBreakdown:
    """End-to-end decode-and-forward rates for any scheme and duplex mode.

    In full-duplex overlay the first interval uses uncontaminated-pilot
    statistics and intervals ``2..L`` the loop-contaminated ones.
    """
    check_fading(cfg, fading)
    return _assemble(cfg, fading)


def conventional_rates(cfg: SystemConfig, fading: FadingProfile) -> RateBreakdown:
    """Rates of the separate pilot/data design (``2K`` pilot slots).

    A frame with no room left for data yields zero rates rather than an error.
    """
    check_fading(cfg, fading)
    return _assemble(cfg.replace(scheme="conventional"), fading)


def system_rate(cfg: SystemConfig, fading: FadingProfile) -> float:
    return rate_e2e(cfg, fading).R_system
