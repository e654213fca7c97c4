"""Random generation of channels, pilots, data symbols and noise.

Every draw comes from its own generator keyed by
``(seed, trial, interval_index, purpose)``, so any component can be
regenerated in isolation and trials can be split across workers without
changing a single bit of the result.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .config import FadingProfile, SystemConfig, check_fading, frame_accounting, loop_power

SEED_MASK = (1 << 64) - 1


class Purpose(IntEnum):
    G_S = 1
    G_D = 2
    G_LI = 3
    G_LI_PILOT = 4
    S_B = 10
    S_C = 11
    X = 12
    N_A = 20
    N_B = 21
    N_C = 22
    Z = 23
    N_D = 24  # conventional scheme: separate destination-pilot slots


def parse_seed(value) -> int:
    """Accept an int, a decimal string or a ``0x``-prefixed hex string."""
    if isinstance(value, str):
        value = int(value.strip(), 0)
    value = int(value)
    if not 0 <= value <= SEED_MASK:
        raise ValueError(f"seed must be a 64-bit unsigned value, got {value}")
    return value


def rng_for(seed: int, interval_index: int, purpose: Purpose, trial: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(parse_seed(seed), spawn_key=(int(trial), int(interval_index), int(purpose)))
    return np.random.Generator(np.random.PCG64(ss))


def crandn(rng: np.random.Generator, shape, var=1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with variance ``var``."""
    scale = np.sqrt(np.asarray(var, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def qpsk(rng: np.random.Generator, shape) -> np.ndarray:
    bits = rng.integers(0, 2, size=(2,) + tuple(shape))
    return ((1 - 2 * bits[0]) + 1j * (1 - 2 * bits[1])) / np.sqrt(2.0)


def draw_symbols(rng, shape, kind="gaussian"):
    if kind == "qpsk":
        return qpsk(rng, shape)
    return crandn(rng, shape)


# ---------------------------------------------------------------------------
# channels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChannelSet:
    """One block-fading realization.

    ``G_LI`` is the loop channel during the relay's own receive/transmit
    overlap in phase C; ``G_LI_pilot`` is an independent loop realization
    seen by the source pilots that overlap the previous interval's phase D.
    Both are ``None`` in half duplex.
    """

    G_s: np.ndarray
    G_d: np.ndarray
    G_LI: np.ndarray | None = None
    G_LI_pilot: np.ndarray | None = None


def draw_channels(cfg: SystemConfig, fading: FadingProfile, seed, interval_index: int, trial: int = 0) -> ChannelSet:
    """Draw ``G_s = H_s D_s^{1/2}``, ``G_d = H_d D_d^{1/2}`` and, in FD, the loop channels."""
    if interval_index < 1:
        raise ValueError("interval_index starts at 1")
    check_fading(cfg, fading)
    M, K = cfg.M, cfg.K
    G_s = crandn(rng_for(seed, interval_index, Purpose.G_S, trial), (M, K)) * np.sqrt(fading.beta_s)
    G_d = crandn(rng_for(seed, interval_index, Purpose.G_D, trial), (M, K)) * np.sqrt(fading.beta_d)
    if not cfg.is_fd:
        return ChannelSet(G_s, G_d)
    beta_LI = loop_gain(cfg, fading)
    G_LI = crandn(rng_for(seed, interval_index, Purpose.G_LI, trial), (M, M), beta_LI)
    G_LI_pilot = crandn(rng_for(seed, interval_index, Purpose.G_LI_PILOT, trial), (M, M), beta_LI)
    return ChannelSet(G_s, G_d, G_LI, G_LI_pilot)


def loop_gain(cfg: SystemConfig, fading: FadingProfile) -> float:
    """Per-entry variance of the loop channel at the configured ``rho_d``."""
    if cfg.rho_d > 0:
        return loop_power(cfg, fading) / cfg.rho_d
    return fading.beta_LI


# ---------------------------------------------------------------------------
# pilots and data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PilotBook:
    Phi: np.ndarray
    Psi: np.ndarray


def dft_pilots(K: int) -> np.ndarray:
    n = np.arange(K)
    return np.exp(-2j * np.pi * np.outer(n, n) / K) / np.sqrt(K)


def make_pilots(K: int) -> PilotBook:
    """Row-orthonormal DFT pilots; sources and destinations share the book."""
    if K < 1:
        raise ValueError("K must be >= 1")
    Phi = dft_pilots(K)
    return PilotBook(Phi, Phi.copy())


@dataclass(frozen=True)
class SignalBlock:
    """Data symbols and noise of one coherence interval.

    Fractional data lengths (HD with odd ``T_c - K``) are truncated to whole
    slots. ``X`` holds the relay's forwarded data; in FD overlay its last
    ``K`` columns form phase D, which overlaps the next interval's pilots.
    """

    S_B: np.ndarray
    S_C: np.ndarray
    X: np.ndarray
    N_A: np.ndarray
    N_B: np.ndarray
    N_C: np.ndarray
    z: np.ndarray

    @property
    def X_D(self) -> np.ndarray:
        K = self.S_B.shape[0]
        return self.X[:, -K:]


def signal_component(cfg: SystemConfig, seed, interval_index: int, purpose: Purpose, trial: int = 0) -> np.ndarray:
    """Draw one named component of :class:`SignalBlock` on its own."""
    fa = frame_accounting(cfg)
    M, K = cfg.M, cfg.K
    T_C = int(np.floor(fa.T_C))
    T_d = int(np.floor(fa.T_d))
    rng = rng_for(seed, interval_index, purpose, trial)
    if purpose == Purpose.S_B:
        return draw_symbols(rng, (K, K), cfg.symbols)
    if purpose == Purpose.S_C:
        return draw_symbols(rng, (K, T_C), cfg.symbols)
    if purpose == Purpose.X:
        return draw_symbols(rng, (K, max(T_d, K)), cfg.symbols)
    if purpose in (Purpose.N_A, Purpose.N_B, Purpose.N_D):
        return crandn(rng, (M, K))
    if purpose == Purpose.N_C:
        return crandn(rng, (M, T_C))
    if purpose == Purpose.Z:
        return crandn(rng, (K, T_d))
    raise ValueError(f"{purpose!r} is not a signal component")


def draw_signals(cfg: SystemConfig, seed, interval_index: int, trial: int = 0) -> SignalBlock:
    if interval_index < 1:
        raise ValueError("interval_index starts at 1")
    parts = {
        name: signal_component(cfg, seed, interval_index, purpose, trial)
        for name, purpose in (("S_B", Purpose.S_B), ("S_C", Purpose.S_C), ("X", Purpose.X),
                              ("N_A", Purpose.N_A), ("N_B", Purpose.N_B), ("N_C", Purpose.N_C), ("z", Purpose.Z))
    }
    return SignalBlock(**parts)
