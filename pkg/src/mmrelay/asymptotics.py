"""Limiting SINRs at very high and very low common transmit power.

All powers are tied to one value ``rho`` (pilots, source data and relay
data). High-power limits are the SINRs themselves; low-power limits vanish,
so they are reported as the coefficient of ``rho**2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import FadingProfile, SystemConfig, frame_accounting
from .estimation import estimator_stats
from .rates import sinr_downlink, sinr_uplink_B, sinr_uplink_C

REGIMES = ("high", "low")


@dataclass(frozen=True)
class AsymptoticReport:
    """Per-pair limiting SINRs of one regime.

    ``sinr_limits`` maps ``gamma_B``, ``gamma_C``, ``gamma_DL`` (overlay) or
    ``gamma_UL``, ``gamma_DL`` (conventional) to arrays of length ``K``.
    ``dominance[k]`` compares the limiting per-link rates of the overlay and
    conventional frames and ``margin`` is the uplink slack
    ``(sum beta_s)^2 + M beta_sk sum beta_s - (sum beta_d)^2``.
    """

    regime: str
    scheme: str
    sinr_limits: dict
    dominance: np.ndarray
    margin: np.ndarray


def _as_profile(fading, K):
    if fading.K != K:
        raise ValueError(f"fading profile has {fading.K} pairs, expected K={K}")
    return np.asarray(fading.beta_s), np.asarray(fading.beta_d)


def uplink_margin(fading: FadingProfile, M: int) -> np.ndarray:
    bs, bd = np.asarray(fading.beta_s), np.asarray(fading.beta_d)
    return bs.sum() ** 2 + M * bs * bs.sum() - bd.sum() ** 2


def sinr_limits(fading: FadingProfile, M: int, K: int, regime: str, scheme: str = "overlay") -> dict:
    """Limiting SINRs (high) or their ``rho**2`` coefficients (low)."""
    if regime not in REGIMES:
        raise ValueError(f"regime must be one of {REGIMES}")
    bs, bd = _as_profile(fading, K)
    if regime == "high":
        ul = M * bs / bs.sum()
        dl = M * bd / bd.sum()
        if scheme == "overlay":
            return {"gamma_B": M * bs / (bs.sum() + bd.sum()), "gamma_C": ul, "gamma_DL": dl}
        return {"gamma_UL": ul, "gamma_DL": dl}
    ul = M * K * bs**2
    dl = M * K * bd**4 / np.sum(bd**2)
    if scheme == "overlay":
        return {"gamma_B": ul, "gamma_C": ul.copy(), "gamma_DL": dl}
    return {"gamma_UL": ul, "gamma_DL": dl}


def _limit_link_rates(limits, fa, regime, scheme):
    # low regime: rates are linear in the SINR coefficient, log2(1+x) ~ x/ln2
    f = np.log2 if regime == "high" else (lambda x: x)
    g = (lambda x: 1.0 + x) if regime == "high" else (lambda x: x)
    if scheme == "overlay":
        ul = fa.T_B * f(g(limits["gamma_B"])) + fa.T_C * f(g(limits["gamma_C"]))
    else:
        ul = fa.T_d * f(g(limits["gamma_UL"]))
    return ul, fa.T_d * f(g(limits["gamma_DL"]))


def asymptotic_sinrs(fading: FadingProfile, M: int, K: int, regime: str, scheme: str = "overlay",
                     T_c: int = 40, duplex: str = "HD") -> AsymptoticReport:
    """Limiting SINRs plus a per-pair dominance flag of overlay over conventional.

    ``T_c`` and ``duplex`` only enter through the frame durations used for
    the dominance comparison.
    """
    limits = sinr_limits(fading, M, K, regime, scheme)
    base = SystemConfig(M=M, K=K, T_c=T_c, duplex=duplex)
    fa_o = frame_accounting(base.replace(scheme="overlay"))
    fa_c = frame_accounting(base.replace(scheme="conventional"))
    ul_o, dl_o = _limit_link_rates(sinr_limits(fading, M, K, regime, "overlay"), fa_o, regime, "overlay")
    ul_c, dl_c = _limit_link_rates(sinr_limits(fading, M, K, regime, "conventional"), fa_c, regime, "conventional")
    dominance = (ul_o >= ul_c) & (dl_o >= dl_c)
    return AsymptoticReport(regime, scheme, limits, dominance, uplink_margin(fading, M))


def corollary_check(fading: FadingProfile, M: int, K: int, T_c: int, duplex: str = "HD"):
    """Overlay-over-conventional dominance test for every pair.

    Returns ``(ok, margin)``: ``ok[k]`` requires a strictly longer overlay
    data period plus, in HD, a non-negative uplink margin. FD has no closed
    inequality, so there the limiting high-power link rates are compared
    directly.
    """
    if M < 1 or K < 1:
        raise ValueError("M and K must be positive")
    _as_profile(fading, K)
    margin = uplink_margin(fading, M)
    base = SystemConfig(M=M, K=K, T_c=T_c, duplex=duplex)
    longer = frame_accounting(base.replace(scheme="overlay")).T_d > frame_accounting(
        base.replace(scheme="conventional")).T_d
    if duplex == "FD":
        ok = asymptotic_sinrs(fading, M, K, "high", T_c=T_c, duplex="FD").dominance
    else:
        ok = margin >= 0
    return ok & bool(longer), margin


def _closed_form_sinrs(cfg, fading, kind):
    st = estimator_stats(cfg, fading, kind)
    if cfg.scheme == "overlay":
        return {"gamma_B": sinr_uplink_B(st, cfg, fading), "gamma_C": sinr_uplink_C(st, cfg, fading),
                "gamma_DL": sinr_downlink(st, cfg, fading)}
    return {"gamma_UL": sinr_uplink_C(st, cfg, fading), "gamma_DL": sinr_downlink(st, cfg, fading)}


def limit_consistency(cfg: SystemConfig, fading: FadingProfile, rho_high: float = 1e4, rho_low: float = 1e-3) -> dict:
    """Relative deviation of closed-form SINRs from their limits.

    The high-power point keeps the loop-interference power fixed and the
    low-power point keeps the loop gain fixed, so that the residual loop
    interference vanishes relative to the signal in both limits. Every
    interval kind of the scheme is evaluated and the worst deviation per SINR
    is reported.
    """
    out = {}
    kinds = ("first", "steady") if (cfg.is_fd and cfg.scheme == "overlay") else ("first",)
    for regime, rho in (("high", rho_high), ("low", rho_low)):
        li_model = "fixed_rho" if regime == "high" else "fixed_beta"
        c = cfg.replace(rho_p=rho, rho_s=rho, rho_d=rho, li_model=li_model)
        limits = sinr_limits(fading, cfg.M, cfg.K, regime, cfg.scheme)
        scale = 1.0 if regime == "high" else rho**2
        dev = {}
        for kind in kinds:
            for name, value in _closed_form_sinrs(c, fading, kind).items():
                rel = np.max(np.abs(value / scale - limits[name]) / limits[name])
                dev[name] = max(dev.get(name, 0.0), float(rel))
        out[regime] = {"rho": rho, "deviation": dev, "max_deviation": max(dev.values())}
    return out
