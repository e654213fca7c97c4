"""Instantaneous-channel simulation of the relaying chain.

Each trial plays ``L`` consecutive coherence intervals through pilot
reception, MMSE estimation, phase-B detection/cancellation and the data
phases. Per-link rates use the realized SINR of every interval (combining
and precoding with the estimates, receivers aware of the realized effective
gain), the reference the closed-form lower bounds are checked against.

Trials are independent; ``n_jobs > 1`` farms contiguous trial blocks out to
worker processes and reassembles them in trial order, so the result does not
depend on the worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from .channels import Purpose, crandn, draw_channels, make_pilots, rng_for, signal_component
from .config import FadingProfile, SystemConfig, check_fading, frame_accounting, loop_power
from .estimation import (
    ChannelEstimate,
    _shrinkage,
    detect_phaseB_data,
    estimate_destination,
    estimate_source_first,
    estimate_source_steady,
    estimator_stats,
)
from .rates import log2_1p

logger = logging.getLogger(__name__)

DEFAULT_WORK_BUDGET = 5e9
# known_data: relay subtracts sqrt(rho_s) G_s_hat S_B with the true S_B (analysis model)
# detected:   same, with the MRC-detected S_B (end-to-end)
# perfect:    the whole source contribution is removed; idealized benchmark only
CANCELLATION_MODES = ("known_data", "detected", "perfect")


class ResourceLimitError(RuntimeError):
    pass


def _zeros_like_noise(cfg, shape):
    return np.zeros(shape, dtype=complex)


def _noise(cfg, seed, iota, purpose, trial, noiseless):
    if noiseless:
        return _zeros_like_noise(cfg, (cfg.M, cfg.K))
    return signal_component(cfg, seed, iota, purpose, trial)


def _overlay_interval(cfg, fading, pilots, seed, trial, iota, prev, cancellation, noiseless=False):
    """Phases A and B of one overlay interval; returns the realized quantities."""
    energy = cfg.K * cfg.rho_p
    noise_var = 0.0 if noiseless else 1.0
    ch = draw_channels(cfg, fading, seed, iota, trial)
    R_A = np.sqrt(energy) * ch.G_s @ pilots.Phi + _noise(cfg, seed, iota, Purpose.N_A, trial, noiseless)
    steady = cfg.is_fd and prev is not None
    if steady:
        # previous interval's phase D leaks into this interval's source pilots
        R_A = R_A + np.sqrt(cfg.rho_d) * prev.alpha * ch.G_LI_pilot @ (prev.G_hat_d @ prev.X_D)
        src = estimate_source_steady(R_A, pilots.Phi, cfg, fading, noise_var)
    else:
        src = estimate_source_first(R_A, pilots.Phi, cfg, fading, noise_var)

    S_B = signal_component(cfg, seed, iota, Purpose.S_B, trial)
    R_B = (np.sqrt(cfg.rho_s) * ch.G_s @ S_B + np.sqrt(energy) * ch.G_d @ pilots.Psi
           + _noise(cfg, seed, iota, Purpose.N_B, trial, noiseless))
    alpha = src.stats.alpha
    if cancellation == "perfect":
        cleaned = R_B - np.sqrt(cfg.rho_s) * ch.G_s @ S_B
        d = _shrinkage(energy, fading.beta_d, 0.0, noise_var)
        G_hat_d = (cleaned @ pilots.Psi.conj().T) / np.sqrt(energy) * d
        clean = estimator_stats(cfg.replace(rho_s=0.0), fading, src.stats.interval_kind)
        alpha = clean.alpha
        dst = ChannelEstimate(G_hat_d, clean, "destination")
    else:
        S_cancel = S_B
        if cancellation == "detected" and cfg.rho_s > 0:
            det = detect_phaseB_data(R_B, src, cfg.rho_s, cfg.symbols)
            S_cancel = det.hard if det.hard is not None else det.soft
        dst = estimate_destination(R_B, src, S_cancel, pilots.Psi, cfg, fading, noise_var)
    X_D = signal_component(cfg, seed, iota, Purpose.X, trial)[:, -cfg.K:]
    return SimpleNamespace(ch=ch, src=src, dst=dst, stats=src.stats, alpha=alpha,
                           G_hat_d=dst.G_hat, X_D=X_D, S_B=S_B, R_B=R_B)


def _conventional_interval(cfg, fading, pilots, seed, trial, iota):
    energy = cfg.K * cfg.rho_p
    ch = draw_channels(cfg, fading, seed, iota, trial)
    R_A = np.sqrt(energy) * ch.G_s @ pilots.Phi + signal_component(cfg, seed, iota, Purpose.N_A, trial)
    src = estimate_source_first(R_A, pilots.Phi, cfg, fading)
    R_D = np.sqrt(energy) * ch.G_d @ pilots.Psi + signal_component(cfg, seed, iota, Purpose.N_D, trial)
    d = _shrinkage(energy, fading.beta_d, 0.0, 1.0)
    G_hat_d = (R_D @ pilots.Psi.conj().T) / np.sqrt(energy) * d
    stats = estimator_stats(cfg, fading, "first")
    dst = ChannelEstimate(G_hat_d, stats, "destination")
    return SimpleNamespace(ch=ch, src=src, dst=dst, stats=stats, alpha=stats.alpha, G_hat_d=G_hat_d)


def _offdiag_power(A):
    P = np.abs(A) ** 2
    return P.sum(axis=1) - np.diag(P)


def instantaneous_terms(cfg: SystemConfig, real) -> dict:
    """Realized signal / interference powers per pair for one interval."""
    Gs_hat, Gd_hat = real.src.G_hat, real.G_hat_d
    A = Gs_hat.conj().T @ real.ch.G_s
    B = real.ch.G_d.conj().T @ Gd_hat
    a2 = real.alpha**2
    terms = {
        "signal_UL": cfg.rho_s * np.abs(np.diag(A)) ** 2,
        "MI_UL": cfg.rho_s * _offdiag_power(A),
        "PI_UL": cfg.rho_p * np.sum(np.abs(Gs_hat.conj().T @ real.ch.G_d) ** 2, axis=1),
        "AN_UL": np.sum(np.abs(Gs_hat) ** 2, axis=0),
        "gain_DL": np.diag(B),
        "signal_DL": cfg.rho_d * a2 * np.abs(np.diag(B)) ** 2,
        "MI_DL": cfg.rho_d * a2 * _offdiag_power(B),
    }
    if cfg.is_fd:
        Q = (Gs_hat.conj().T @ real.ch.G_LI) @ Gd_hat
        terms["LI_UL"] = cfg.rho_d * a2 * np.sum(np.abs(Q) ** 2, axis=1)
    else:
        terms["LI_UL"] = np.zeros(cfg.K)
    return terms


def _ratio(num, den):
    out = np.zeros_like(num, dtype=float)
    np.divide(num, den, out=out, where=den > 0)
    return out


def instantaneous_sinrs(cfg: SystemConfig, real):
    t = instantaneous_terms(cfg, real)
    gamma_B = _ratio(t["signal_UL"], t["MI_UL"] + t["PI_UL"] + t["AN_UL"])
    gamma_C = _ratio(t["signal_UL"], t["MI_UL"] + t["LI_UL"] + t["AN_UL"])
    gamma_DL = t["signal_DL"] / (t["MI_DL"] + 1.0)
    return gamma_B, gamma_C, gamma_DL


def _run_trial(cfg, fading, pilots, seed, trial, cancellation):
    fa = frame_accounting(cfg)
    ul = np.zeros((cfg.L, cfg.K))
    dl = np.zeros((cfg.L, cfg.K))
    prev = None
    for i in range(cfg.L):
        iota = i + 1
        if cfg.scheme == "overlay":
            real = _overlay_interval(cfg, fading, pilots, seed, trial, iota, prev, cancellation)
        else:
            real = _conventional_interval(cfg, fading, pilots, seed, trial, iota)
        gB, gC, gDL = instantaneous_sinrs(cfg, real)
        ul[i] = fa.T_B * log2_1p(gB) + fa.T_C * log2_1p(gC)
        dl[i] = fa.T_d * log2_1p(gDL)
        prev = real
    return ul, dl


def _run_block(args):
    cfg, fading, seed, trials, cancellation = args
    pilots = make_pilots(cfg.K)
    out = [_run_trial(cfg, fading, pilots, seed, t, cancellation) for t in trials]
    return np.array([o[0] for o in out]), np.array([o[1] for o in out])


def _map_trials(cfg, fading, seed, trials, cancellation, n_jobs):
    if n_jobs <= 1 or trials < 2:
        return _run_block((cfg, fading, seed, range(trials), cancellation))
    blocks = np.array_split(np.arange(trials), min(n_jobs * 4, trials))
    jobs = [(cfg, fading, seed, [int(t) for t in b], cancellation) for b in blocks]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        parts = list(pool.map(_run_block, jobs))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


@dataclass(frozen=True)
class TrialResult:
    """Empirical ergodic rates of a Monte-Carlo run.

    ``R_UL`` / ``R_DL`` are trial means shaped ``(L, K)`` (bits per interval);
    the pair rate takes the minimum of the two ergodic link rates.
    """

    empirical_R_system: float
    stderr: float
    R_UL: np.ndarray
    R_DL: np.ndarray
    R_pair: np.ndarray
    trials: int
    seed: int
    moment_estimates: dict = field(default_factory=dict)


def simulate_chain(cfg: SystemConfig, fading: FadingProfile, trials: int = 1000, seed=0,
                   cancellation: str = "known_data", n_jobs: int = 1,
                   work_budget: float = DEFAULT_WORK_BUDGET) -> TrialResult:
    """Monte-Carlo ergodic rates of ``cfg`` averaged over ``trials`` transmissions."""
    check_fading(cfg, fading)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if cancellation not in CANCELLATION_MODES:
        raise ValueError(f"cancellation must be one of {CANCELLATION_MODES}")
    if not cfg.rho_p > 0:
        raise ValueError("Monte-Carlo chain needs rho_p > 0")
    work = cfg.M * cfg.K * trials * cfg.L * (cfg.M if cfg.is_fd else 1)
    if work > work_budget:
        raise ResourceLimitError(f"requested work {work:.3g} exceeds budget {work_budget:.3g}")
    fa = frame_accounting(cfg)
    if fa.T_d <= 0:
        zeros = np.zeros((cfg.L, cfg.K))
        return TrialResult(0.0, 0.0, zeros, zeros, zeros, trials, int(seed))

    ul, dl = _map_trials(cfg, fading, seed, trials, cancellation, n_jobs)
    R_UL, R_DL = ul.mean(axis=0), dl.mean(axis=0)
    R_pair = np.minimum(R_UL, R_DL)
    norm = cfg.L * cfg.T_c
    # per-trial contribution of whichever link binds each pair
    binding = np.where(R_UL <= R_DL, ul, dl).sum(axis=(1, 2)) / norm
    stderr = binding.std(ddof=1) / np.sqrt(trials) if trials > 1 else float("inf")
    logger.debug("simulate_chain %s/%s: %.4f +- %.4f", cfg.scheme, cfg.duplex, R_pair.sum() / norm, stderr)
    return TrialResult(float(R_pair.sum() / norm), float(stderr), R_UL, R_DL, R_pair, trials, int(seed))


# ---------------------------------------------------------------------------
# moment oracles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Moment:
    estimate: float
    stderr: float
    target: float

    @property
    def rel_error(self) -> float:
        return abs(self.estimate - self.target) / abs(self.target)

    @property
    def z(self) -> float:
        return abs(self.estimate - self.target) / self.stderr if self.stderr > 0 else float("inf")


MOMENT_NAMES = ("E_gg", "Var_gg", "MI_DL", "MI_UL", "PI_UL", "LI_UL", "AN_UL")


def moment_targets(cfg: SystemConfig, fading: FadingProfile, interval_kind: str = "steady") -> dict:
    """Closed-form values of the expectations behind the SINR expressions (per pair)."""
    st = estimator_stats(cfg, fading, interval_kind)
    M = cfg.M
    li = loop_power(cfg, fading)
    beta_LI = li / cfg.rho_d if cfg.rho_d > 0 else 0.0
    return {
        "E_gg": M * st.sigma2_d,
        "Var_gg": M * fading.beta_d * st.sigma2_d,
        "MI_DL": M * cfg.rho_d * st.alpha**2 * fading.beta_d * (st.sigma2_d.sum() - st.sigma2_d),
        "MI_UL": cfg.rho_s * M * st.sigma2_s * (fading.beta_s.sum() - fading.beta_s),
        "PI_UL": M * cfg.rho_p * st.sigma2_s * fading.beta_d.sum(),
        "LI_UL": M * cfg.rho_d * beta_LI * st.sigma2_s,
        "LI_UL_squared_gain": M * cfg.rho_d * beta_LI**2 * st.sigma2_s,
        "AN_UL": M * st.sigma2_s,
    }


def _moment_trial(cfg, fading, pilots, seed, trial):
    prev = _overlay_interval(cfg, fading, pilots, seed, trial, 1, None, "known_data")
    real = _overlay_interval(cfg, fading, pilots, seed, trial, 2, prev, "known_data")
    t = instantaneous_terms(cfg, real)
    return t["gain_DL"], np.array([t["MI_DL"], t["MI_UL"], t["PI_UL"], t["LI_UL"], t["AN_UL"]])


def moment_oracles(cfg: SystemConfig, fading: FadingProfile, trials: int = 10_000, seed=0) -> dict:
    """Sample the seven expectations at a loop-contaminated (FD, interval 2) interval.

    Samples are averaged over pairs within each trial first, so the standard
    errors come from independent per-trial values.
    """
    cfg = cfg.replace(duplex="FD", scheme="overlay", L=max(cfg.L, 2))
    check_fading(cfg, fading)
    if trials < 2:
        raise ValueError("trials must be >= 2")
    pilots = make_pilots(cfg.K)
    gains = np.empty((trials, cfg.K), dtype=complex)
    powers = np.empty((trials, 5, cfg.K))
    for t in range(trials):
        gains[t], powers[t] = _moment_trial(cfg, fading, pilots, seed, t)

    targets = moment_targets(cfg, fading, "steady")
    sqrt_n = np.sqrt(trials)

    def summarize(per_trial, target):
        return Moment(float(per_trial.mean()), float(per_trial.std(ddof=1) / sqrt_n), float(np.mean(target)))

    out = {"E_gg": summarize(gains.real.mean(axis=1), targets["E_gg"])}
    centered = np.abs(gains - gains.mean(axis=0)) ** 2 * trials / (trials - 1)
    out["Var_gg"] = summarize(centered.mean(axis=1), targets["Var_gg"])
    for j, name in enumerate(("MI_DL", "MI_UL", "PI_UL", "LI_UL", "AN_UL")):
        out[name] = summarize(powers[:, j].mean(axis=1), targets[name])
    out["LI_UL_squared_gain"] = Moment(out["LI_UL"].estimate, out["LI_UL"].stderr,
                                       float(np.mean(targets["LI_UL_squared_gain"])))
    return out


def lemma_checks(M: int = 64, trials: int = 10_000, seed=0, sigma2_p=1.0, sigma2_q=1.0) -> dict:
    """Sample checks of the two vector lemmas the bounds rely on.

    Returns the normalized inner product ``|p^H q| / M`` for one draw of
    length ``M`` and the sample fourth moment ``E|x^H x|^2`` against
    ``(M^2 + M) sigma^4``.
    """
    rng = rng_for(seed, 1, Purpose.G_S, 0)
    p = crandn(rng, M, sigma2_p)
    q = crandn(rng, M, sigma2_q)
    x = crandn(rng, (trials, M), sigma2_p)
    fourth = np.sum(np.abs(x) ** 2, axis=1) ** 2
    return {
        "inner_product": float(abs(np.vdot(p, q)) / M),
        "self_product": float(np.vdot(p, p).real / M),
        "fourth_moment": Moment(float(fourth.mean()), float(fourth.std(ddof=1) / np.sqrt(trials)),
                                float((M**2 + M) * sigma2_p**2)),
    }


# ---------------------------------------------------------------------------
# phase-B detection versus antenna count
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DetectionRow:
    M: int
    rel_error: float
    stderr: float
    symbol_error_rate: float | None
    dest_mse_known_data: float
    dest_mse_detected: float


def detection_error_vs_M(cfg: SystemConfig, fading: FadingProfile, M_list, trials: int = 200, seed=0,
                         noiseless: bool = False, dest_pilots: bool = True) -> list[DetectionRow]:
    """Mean relative phase-B detection error ``||s_hat_k - s_k|| / ||s_k||`` per antenna count.

    ``noiseless`` removes every noise term (and the estimator shrinkage);
    ``dest_pilots=False`` silences the destination pilots in phase B.
    Destination-channel MSE is reported for known-data and detected cancellation.
    """
    M_list = [int(m) for m in M_list]
    if M_list != sorted(M_list):
        raise ValueError("M_list must be sorted ascending")
    base = cfg.replace(duplex="HD", scheme="overlay")
    rows = []
    for M in M_list:
        c = base.replace(M=M)
        pilots = make_pilots(c.K)
        if not dest_pilots:
            pilots = type(pilots)(pilots.Phi, np.zeros_like(pilots.Psi))
        errs = np.empty(trials)
        ser = np.empty(trials)
        mse = np.empty((trials, 2))
        for t in range(trials):
            real = _overlay_interval(c, fading, pilots, seed, t, 1, None, "known_data", noiseless)
            det = detect_phaseB_data(real.R_B, real.src, c.rho_s, c.symbols)
            S = real.S_B
            errs[t] = np.mean(np.linalg.norm(det.soft - S, axis=1) / np.linalg.norm(S, axis=1))
            ser[t] = np.mean(det.hard != S) if det.hard is not None else np.nan
            cancel = det.hard if det.hard is not None else det.soft
            noise_var = 0.0 if noiseless else 1.0
            dst_det = estimate_destination(real.R_B, real.src, cancel, pilots.Psi, c, fading, noise_var)
            for j, G_hat in enumerate((real.G_hat_d, dst_det.G_hat)):
                mse[t, j] = np.mean(np.abs(real.ch.G_d - G_hat) ** 2)
        rows.append(DetectionRow(
            M=M,
            rel_error=float(errs.mean()),
            stderr=float(errs.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0,
            symbol_error_rate=float(ser.mean()) if c.symbols == "qpsk" else None,
            dest_mse_known_data=float(mse[:, 0].mean()),
            dest_mse_detected=float(mse[:, 1].mean()),
        ))
    return rows
