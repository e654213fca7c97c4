"""Scenario configuration, large-scale fading profile and frame accounting.

All powers are linear and normalized to a unit noise floor.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

DUPLEX_MODES = ("HD", "FD")
SCHEMES = ("overlay", "conventional")
SYMBOL_KINDS = ("gaussian", "qpsk")
LI_MODELS = ("fixed_rho", "fixed_beta")


class ConfigError(ValueError):
    """Raised for a missing, malformed or out-of-domain configuration value.

    The offending field is kept on ``self.field`` so callers (the CLI in
    particular) can report it.
    """

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class SystemConfig:
    """All scalar parameters of one relaying scenario.

    Parameters
    ----------
    M : int
        Relay antenna count.
    K : int
        Number of source/destination user pairs.
    T_c : int
        Coherence interval length in symbol slots.
    L : int
        Number of consecutive coherence intervals in a transmission.
    rho_p, rho_s, rho_d : float
        Pilot, source-data and relay-data transmit powers.
    rho_LI : float
        Average residual loop-interference power ``rho_d * beta_LI``.
    duplex : {"HD", "FD"}
    scheme : {"overlay", "conventional"}
    fd_proc_delay : int
        Relay processing delay (slots) charged to conventional FD frames.
    E_d : float or None
        Total data energy budget, only used by power allocation.
    epsilon : float
        Relative stopping tolerance of the SCA power allocation.
    symbols : {"gaussian", "qpsk"}
        Data constellation for the Monte-Carlo chain.
    li_model : {"fixed_rho", "fixed_beta"}
        Which loop-interference quantity is held constant when ``rho_d``
        moves (power allocation): the power ``rho_LI`` or the gain
        ``beta_LI``.
    """

    M: int = 128
    K: int = 10
    T_c: int = 40
    L: int = 10
    rho_p: float = 100.0
    rho_s: float = 100.0
    rho_d: float = 100.0
    rho_LI: float = 2.0
    duplex: str = "FD"
    scheme: str = "overlay"
    fd_proc_delay: int = 1
    E_d: float | None = None
    epsilon: float = 1e-5
    symbols: str = "gaussian"
    li_model: str = "fixed_rho"

    def __post_init__(self):
        for name in ("M", "K", "L"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.T_c < 1:
            raise ConfigError("T_c", "must be >= 1")
        if self.fd_proc_delay < 0:
            raise ConfigError("fd_proc_delay", "must be >= 0")
        for name in ("rho_p", "rho_s", "rho_d", "rho_LI"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConfigError(name, f"power must be finite and >= 0, got {value}")
        if self.E_d is not None and not self.E_d > 0:
            raise ConfigError("E_d", "energy budget must be > 0")
        if not self.epsilon > 0:
            raise ConfigError("epsilon", "must be > 0")
        _check_choice("duplex", self.duplex, DUPLEX_MODES)
        _check_choice("scheme", self.scheme, SCHEMES)
        _check_choice("symbols", self.symbols, SYMBOL_KINDS)
        _check_choice("li_model", self.li_model, LI_MODELS)

    def replace(self, **changes) -> "SystemConfig":
        """Copy with fields changed (domain checks only, no frame checks)."""
        return dataclasses.replace(self, **changes)

    @property
    def is_fd(self) -> bool:
        return self.duplex == "FD"


def _check_choice(name, value, choices):
    if value not in choices:
        raise ConfigError(name, f"expected one of {choices}, got {value!r}")


@dataclass(frozen=True)
class FadingProfile:
    """Large-scale gains of the source and destination links and the loop."""

    beta_s: np.ndarray
    beta_d: np.ndarray
    beta_LI: float

    def __post_init__(self):
        beta_s = np.atleast_1d(np.asarray(self.beta_s, dtype=float))
        beta_d = np.atleast_1d(np.asarray(self.beta_d, dtype=float))
        if beta_s.ndim != 1 or beta_s.shape != beta_d.shape:
            raise ConfigError("beta_d", "beta_s and beta_d must be vectors of equal length")
        if np.any(~(beta_s > 0)) or np.any(~(beta_d > 0)):
            raise ConfigError("beta_s", "large-scale gains must be strictly positive")
        if not (np.isfinite(self.beta_LI) and self.beta_LI >= 0):
            raise ConfigError("beta_LI", "loop gain must be finite and >= 0")
        beta_s.setflags(write=False)
        beta_d.setflags(write=False)
        object.__setattr__(self, "beta_s", beta_s)
        object.__setattr__(self, "beta_d", beta_d)
        object.__setattr__(self, "beta_LI", float(self.beta_LI))

    @property
    def K(self) -> int:
        return self.beta_s.size

    @classmethod
    def uniform(cls, cfg: SystemConfig, beta_s=1.0, beta_d=1.0) -> "FadingProfile":
        """Profile with scalar (or per-pair) gains broadcast to ``cfg.K`` pairs."""
        return cls(
            np.broadcast_to(np.asarray(beta_s, dtype=float), (cfg.K,)).copy(),
            np.broadcast_to(np.asarray(beta_d, dtype=float), (cfg.K,)).copy(),
            derived_beta_LI(cfg),
        )


def derived_beta_LI(cfg: SystemConfig) -> float:
    """beta_LI = rho_LI / rho_d.

    With no forwarding power the loop gain is unobservable and ``rho_LI``
    itself is returned.
    """
    if cfg.rho_d > 0:
        return cfg.rho_LI / cfg.rho_d
    return cfg.rho_LI


def loop_power(cfg: SystemConfig, fading: FadingProfile) -> float:
    """Effective loop-interference power ``rho_d * beta_LI`` seen at the relay."""
    if not cfg.is_fd:
        return 0.0
    if cfg.li_model == "fixed_rho":
        return cfg.rho_LI
    return cfg.rho_d * fading.beta_LI


def check_fading(cfg: SystemConfig, fading: FadingProfile) -> FadingProfile:
    if fading.K != cfg.K:
        raise ConfigError("K", f"fading profile has {fading.K} pairs, config has {cfg.K}")
    return fading


# ---------------------------------------------------------------------------
# frame accounting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrameAccounting:
    """Pilot and data durations of one coherence interval.

    ``T_B`` and ``T_C`` split the uplink data of the overlay scheme into the
    part sent under the destination pilots and the remainder; for the
    conventional scheme ``T_B`` is 0 and ``T_C == T_d``.
    """

    T_p: int
    T_d: float
    T_B: float
    T_C: float
    eta_p: float
    data_fraction: float


def frame_accounting(cfg: SystemConfig) -> FrameAccounting:
    K, T_c = cfg.K, cfg.T_c
    if cfg.scheme == "overlay":
        T_p = K
        if T_c < 2 * K:
            T_d = 0.0
        elif cfg.is_fd:
            T_d = float(T_c - K)
        elif T_c >= 3 * K:
            T_d = (T_c - K) / 2
        else:
            # phase B alone carries all uplink data; relay forwards in what is left
            T_d = float(T_c - 2 * K)
        T_B = min(float(K), T_d)
        T_C = max(T_d - K, 0.0)
    else:
        T_p = 2 * K
        if cfg.is_fd:
            T_d = float(max(T_c - 2 * K - cfg.fd_proc_delay, 0))
        else:
            T_d = max(T_c - 2 * K, 0) / 2
        T_B, T_C = 0.0, T_d
    return FrameAccounting(T_p, T_d, T_B, T_C, T_p / T_c, T_d / T_c)


# ---------------------------------------------------------------------------
# construction from raw key/value maps
# ---------------------------------------------------------------------------

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(SystemConfig)}
_INT_FIELDS = {"M", "K", "T_c", "L", "fd_proc_delay"}
_STR_FIELDS = {"duplex", "scheme", "symbols", "li_model"}


def coerce_field(name: str, value: Any):
    """Convert a raw (usually string) value to the type of ``SystemConfig.name``."""
    if name not in _FIELD_TYPES:
        raise ConfigError(name, "unknown configuration key")
    if name in _STR_FIELDS:
        return str(value).strip()
    if name == "E_d" and (value is None or str(value).strip().lower() in ("", "none")):
        return None
    try:
        if name in _INT_FIELDS:
            if isinstance(value, str):
                return int(value.strip(), 0)
            if float(value) != int(value):
                raise ValueError(value)
            return int(value)
        return float(value)
    except (TypeError, ValueError):
        kind = "integer" if name in _INT_FIELDS else "number"
        raise ConfigError(name, f"expected {kind}, got {value!r}") from None


def check_frame(cfg: SystemConfig) -> SystemConfig:
    """Reject configurations whose frame leaves no room for data."""
    if cfg.scheme == "conventional":
        extra = cfg.fd_proc_delay if cfg.is_fd else 0
        if cfg.T_c <= 2 * cfg.K + extra:
            raise ConfigError("T_c", f"conventional frame needs T_c > 2K (+delay), got T_c={cfg.T_c}, K={cfg.K}")
    elif cfg.T_c < 2 * cfg.K:
        raise ConfigError("T_c", f"overlay frame needs T_c >= 2K, got T_c={cfg.T_c}, K={cfg.K}")
    return cfg


def make_config(raw: Mapping[str, Any] | None = None, **overrides) -> SystemConfig:
    """Build a validated :class:`SystemConfig` from a key/value map.

    Missing keys take their defaults (128 antennas, 10 pairs, ``T_c = 40``,
    20 dB powers, 3 dB loop interference). Unknown keys are rejected.
    """
    values = dict(raw or {})
    values.update(overrides)
    kwargs = {name: coerce_field(name, value) for name, value in values.items()}
    return check_frame(SystemConfig(**kwargs))


def db2lin(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def lin2db(x):
    return 10.0 * np.log10(x)
