"""MMSE channel estimation, MRC phase-B detection and estimator statistics.

The array functions accept leading batch dimensions (``(..., M, K)``) so the
Monte-Carlo engine can push several trials through at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import FadingProfile, SystemConfig, check_fading, loop_power

INTERVAL_KINDS = ("first", "steady")


@dataclass(frozen=True)
class EstimatorStats:
    """Closed-form second-order statistics of the source/destination estimates.

    ``sigma2_*`` is the per-entry variance of an estimated column, ``eps2_*``
    that of its error, and ``alpha`` the MRT power normalization.
    """

    sigma2_s: np.ndarray
    eps2_s: np.ndarray
    sigma2_d: np.ndarray
    eps2_d: np.ndarray
    alpha: float
    interval_kind: str


def _mmse_variance(energy, beta, contamination):
    return energy * beta**2 / (contamination + 1.0 + energy * beta)


def estimator_stats(cfg: SystemConfig, fading: FadingProfile, interval_kind: str = "first") -> EstimatorStats:
    """Estimate/error variances for one interval kind.

    ``"first"`` covers interval 1 and every half-duplex interval; ``"steady"``
    is a full-duplex interval whose source pilots overlap the previous
    interval's forwarded data. The conventional scheme has uncontaminated
    pilots on both sides regardless of ``interval_kind``.
    """
    if interval_kind not in INTERVAL_KINDS:
        raise ValueError(f"interval_kind must be one of {INTERVAL_KINDS}")
    check_fading(cfg, fading)
    energy = cfg.K * cfg.rho_p
    li = loop_power(cfg, fading) if (interval_kind == "steady" and cfg.scheme == "overlay") else 0.0
    sigma2_s = _mmse_variance(energy, fading.beta_s, li)
    eps2_s = fading.beta_s - sigma2_s
    data_leak = cfg.rho_s * eps2_s.sum() if cfg.scheme == "overlay" else 0.0
    sigma2_d = _mmse_variance(energy, fading.beta_d, data_leak)
    eps2_d = fading.beta_d - sigma2_d
    total = cfg.M * sigma2_d.sum()
    alpha = np.sqrt(1.0 / total) if total > 0 else 0.0
    return EstimatorStats(sigma2_s, eps2_s, sigma2_d, eps2_d, float(alpha), interval_kind)


@dataclass(frozen=True)
class ChannelEstimate:
    G_hat: np.ndarray
    stats: EstimatorStats
    side: str


def _shrinkage(energy, beta, contamination, noise_var):
    """Diagonal of ``(I + (c + n)/(K rho_p) D^{-1})^{-1}``."""
    if not energy > 0:
        raise ValueError("pilot power rho_p must be > 0 to estimate a channel")
    return beta / (beta + (contamination + noise_var) / energy)


def _check_received(R, M, K, name):
    if R.shape[-2:] != (M, K):
        raise ValueError(f"{name} must have trailing shape ({M}, {K}), got {R.shape}")


def _project(R, pilots, energy):
    return (R @ pilots.conj().T) / np.sqrt(energy)


def estimate_source_first(R_A, Phi, cfg: SystemConfig, fading: FadingProfile, noise_var: float = 1.0) -> ChannelEstimate:
    """Source-channel MMSE estimate from uncontaminated phase-A pilots.

    ``noise_var = 0`` turns the shrinkage off, which gives the exact channel
    for noiseless input.
    """
    check_fading(cfg, fading)
    _check_received(R_A, cfg.M, cfg.K, "R_A")
    energy = cfg.K * cfg.rho_p
    d = _shrinkage(energy, fading.beta_s, 0.0, noise_var)
    G_hat = _project(R_A, Phi, energy) * d
    return ChannelEstimate(G_hat, estimator_stats(cfg, fading, "first"), "source")


def estimate_source_steady(R_A, Phi, cfg: SystemConfig, fading: FadingProfile, noise_var: float = 1.0) -> ChannelEstimate:
    """Source-channel estimate when phase A is hit by the relay's own leakage."""
    if not cfg.is_fd:
        raise ValueError("half-duplex intervals never have loop-contaminated pilots")
    check_fading(cfg, fading)
    _check_received(R_A, cfg.M, cfg.K, "R_A")
    energy = cfg.K * cfg.rho_p
    d = _shrinkage(energy, fading.beta_s, loop_power(cfg, fading), noise_var)
    G_hat = _project(R_A, Phi, energy) * d
    return ChannelEstimate(G_hat, estimator_stats(cfg, fading, "steady"), "source")


@dataclass(frozen=True)
class Detection:
    soft: np.ndarray
    hard: np.ndarray | None = None


def qpsk_slice(s):
    return (np.sign(s.real) + 1j * np.sign(s.imag)) / np.sqrt(2.0)


def detect_phaseB_data(R_B, source_estimate: ChannelEstimate, rho_s: float, symbols: str = "gaussian") -> Detection:
    """MRC detection of the phase-B source data.

    Row ``k`` of ``G_hat^H R_B`` is divided by ``sqrt(rho_s) * ||g_hat_k||^2``.
    """
    G_hat = source_estimate.G_hat
    norms = np.sum(np.abs(G_hat) ** 2, axis=-2)
    if np.any(norms <= 0) or not rho_s > 0:
        raise FloatingPointError("zero-norm source estimate or zero source power; detection undefined")
    combined = np.swapaxes(G_hat.conj(), -1, -2) @ R_B
    soft = combined / (np.sqrt(rho_s) * norms[..., :, None])
    hard = qpsk_slice(soft) if symbols == "qpsk" else None
    return Detection(soft, hard)


def estimate_destination(R_B, source_estimate: ChannelEstimate, S_B, Psi, cfg: SystemConfig, fading: FadingProfile,
                         noise_var: float = 1.0) -> ChannelEstimate:
    """Destination-channel estimate after cancelling the phase-B source data.

    ``S_B`` may be the transmitted symbols (known-data cancellation) or the
    detector output.
    """
    check_fading(cfg, fading)
    _check_received(R_B, cfg.M, cfg.K, "R_B")
    stats = source_estimate.stats
    energy = cfg.K * cfg.rho_p
    cleaned = R_B - np.sqrt(cfg.rho_s) * (source_estimate.G_hat @ S_B)
    d = _shrinkage(energy, fading.beta_d, cfg.rho_s * stats.eps2_s.sum(), noise_var)
    G_hat = _project(cleaned, Psi, energy) * d
    return ChannelEstimate(G_hat, stats, "destination")
