"""Source/relay data-power balancing by successive convex approximation.

The total data energy ``E_d = L * T_d * (K rho_s + rho_d)`` is fixed, so the
per-slot budget ``P = K rho_s + rho_d`` is fixed and ``rho_s`` is the only
free variable. Each iteration linearizes every per-pair uplink and downlink
rate at the current point and maximizes the resulting piecewise-linear
concave sum of minima exactly over ``rho_s in [0, P/K]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .config import FadingProfile, SystemConfig, check_fading, frame_accounting, make_config
from .rates import LN2, interval_kind

logger = logging.getLogger(__name__)

MAX_ITER = 100
# keep iterates strictly inside the simplex so gradients stay defined
EDGE = 1e-9


@dataclass(frozen=True)
class RateJacobian:
    """Per-pair link rates and their partial derivatives for one interval kind.

    ``d*_ds`` / ``d*_dd`` are derivatives with respect to ``rho_s`` / ``rho_d``.
    """

    kind: str
    weight: int
    R_UL: np.ndarray
    R_DL: np.ndarray
    dUL_ds: np.ndarray
    dUL_dd: np.ndarray
    dDL_ds: np.ndarray
    dDL_dd: np.ndarray


def _interval_weights(cfg):
    kinds = [interval_kind(cfg, i) for i in range(1, cfg.L + 1)]
    return {k: kinds.count(k) for k in ("first", "steady") if kinds.count(k)}


def _loop(cfg, fading):
    """Loop-interference power and its derivative in ``rho_d``."""
    if not cfg.is_fd:
        return 0.0, 0.0
    if cfg.li_model == "fixed_rho":
        return cfg.rho_LI, 0.0
    return cfg.rho_d * fading.beta_LI, fading.beta_LI


def _kind_jacobian(cfg, fading, kind, weight, fa):
    M = cfg.M
    rs, rd, rp = cfg.rho_s, cfg.rho_d, cfg.rho_p
    bs, bd = fading.beta_s, fading.beta_d
    E = cfg.K * rp
    li, dli = _loop(cfg, fading)
    overlay = cfg.scheme == "overlay"

    # source estimate; pilots see the loop only in steady overlay intervals
    c, dc = (li, dli) if (kind == "steady" and overlay) else (0.0, 0.0)
    den_s = c + 1.0 + E * bs
    s2 = E * bs**2 / den_s
    ds2_dd = -E * bs**2 / den_s**2 * dc
    eps_sum = np.sum(bs - s2)
    deps_dd = -np.sum(ds2_dd)

    # destination estimate, contaminated by leaked phase-B source data
    if overlay:
        S, dS_ds, dS_dd = rs * eps_sum, eps_sum, rs * deps_dd
    else:
        S = dS_ds = dS_dd = 0.0
    den_d = S + 1.0 + E * bd
    d2 = E * bd**2 / den_d
    dd2_dS = -E * bd**2 / den_d**2
    dd2_ds, dd2_dd = dd2_dS * dS_ds, dd2_dS * dS_dd

    # uplink: gamma = M s2 rs / (rs sum(bs) + n), n = rho_p sum(bd) + 1 (B) or li + 1 (C)
    def uplink(n, dn_dd):
        den = rs * bs.sum() + n
        g = M * s2 * rs / den
        dg_ds = M * s2 * n / den**2
        dg_dd = M * ds2_dd * rs / den - M * s2 * rs * dn_dd / den**2
        return g, dg_ds, dg_dd

    gC, gC_s, gC_d = uplink(li + 1.0, dli)
    if overlay:
        gB, gB_s, gB_d = uplink(rp * bd.sum() + 1.0, 0.0)
    else:
        gB = gB_s = gB_d = np.zeros(cfg.K)
    R_UL = fa.T_B * np.log1p(gB) / LN2 + fa.T_C * np.log1p(gC) / LN2
    dUL_ds = (fa.T_B * gB_s / (1 + gB) + fa.T_C * gC_s / (1 + gC)) / LN2
    dUL_dd = (fa.T_B * gB_d / (1 + gB) + fa.T_C * gC_d / (1 + gC)) / LN2

    # downlink: gamma = M d2^2 rd / ((rd bd + 1) sum(d2))
    tot = d2.sum()
    a = rd * bd + 1.0
    gD = M * d2**2 * rd / (a * tot)

    def dlog_gD(dd2, drd):
        # derivative of log(gamma_DL) for perturbations (dd2, drd)
        return 2 * dd2 / d2 - dd2.sum() / tot + drd / rd - drd * bd / a

    gD_s = gD * dlog_gD(dd2_ds, 0.0)
    gD_d = gD * dlog_gD(dd2_dd, 1.0)
    R_DL = fa.T_d * np.log1p(gD) / LN2
    dDL_ds = fa.T_d * gD_s / (1 + gD) / LN2
    dDL_dd = fa.T_d * gD_d / (1 + gD) / LN2
    return RateJacobian(kind, weight, R_UL, R_DL, dUL_ds, dUL_dd, dDL_ds, dDL_dd)


def rate_gradient(rho, cfg: SystemConfig, fading: FadingProfile) -> list[RateJacobian]:
    """Link rates and their gradients at ``rho = (rho_s, rho_d)``.

    One :class:`RateJacobian` per interval kind present in the transmission,
    with ``weight`` the number of intervals of that kind. The chain covers the
    loop coupling of the source estimate (``li_model="fixed_beta"``), the
    leakage of source-estimate error into the destination estimate and the
    MRT normalization.
    """
    rho_s, rho_d = (float(x) for x in rho)
    if not (rho_s > 0 and rho_d > 0):
        raise ValueError(f"rate_gradient needs rho_s, rho_d > 0, got ({rho_s}, {rho_d})")
    check_fading(cfg, fading)
    c = cfg.replace(rho_s=rho_s, rho_d=rho_d)
    fa = frame_accounting(c)
    return [_kind_jacobian(c, fading, kind, w, fa) for kind, w in _interval_weights(c).items()]


def sum_rate_objective(rho, cfg: SystemConfig, fading: FadingProfile) -> float:
    """``sum_iota sum_k min(R_UL, R_DL)`` in bits over the whole transmission."""
    return float(sum(j.weight * np.minimum(j.R_UL, j.R_DL).sum() for j in rate_gradient(rho, cfg, fading)))


def slot_budget(cfg: SystemConfig, E_d: float) -> float:
    """Per-slot data power ``K rho_s + rho_d`` implied by an energy budget."""
    if not E_d > 0:
        raise ValueError("energy budget E_d must be > 0")
    T_d = frame_accounting(cfg).T_d
    if T_d <= 0:
        raise ValueError("frame leaves no data slots; the energy constraint is infeasible")
    return E_d / (cfg.L * T_d)


def energy_for_budget(cfg: SystemConfig, P: float) -> float:
    return cfg.L * frame_accounting(cfg).T_d * P


def equal_allocation(cfg: SystemConfig, E_d: float):
    """Split the budget evenly between all sources and the relay (``rho_d = K rho_s``)."""
    P = slot_budget(cfg, E_d)
    return np.array([P / (2 * cfg.K), P / 2])


def _clip_rho_s(x, P, K):
    hi = P / K
    return float(np.clip(x, EDGE * hi, (1 - EDGE) * hi))


def solve_lp_subproblem(rho_i, cfg: SystemConfig, fading: FadingProfile, E_d: float | None = None) -> np.ndarray:
    """Maximize the linearized sum of per-pair minima on the budget line.

    With ``rho_d = P - K rho_s`` every linearized rate is affine in
    ``rho_s``, and the objective is a weighted sum of minima of two affine
    functions, hence concave piecewise linear. Its maximum lies at an end of
    the interval or where one pair's two lines cross; all of them are
    evaluated. Ties go to the candidate closest to ``rho_i``.
    """
    rho_i = np.asarray(rho_i, dtype=float)
    P = slot_budget(cfg, E_d) if E_d is not None else rho_i[0] * cfg.K + rho_i[1]
    if not P > 0:
        raise ValueError("energy budget E_d must be > 0")
    K = cfg.K
    x0 = rho_i[0]
    lines = []
    for j in rate_gradient(rho_i, cfg, fading):
        slope_u = j.dUL_ds - K * j.dUL_dd
        slope_d = j.dDL_ds - K * j.dDL_dd
        lines.append((j.weight, j.R_UL, slope_u, j.R_DL, slope_d))

    def objective(x):
        return sum(w * np.minimum(u + su * (x - x0), d + sd * (x - x0)).sum() for w, u, su, d, sd in lines)

    hi = P / K
    cands = [0.0, hi]
    for _, u, su, d, sd in lines:
        with np.errstate(divide="ignore", invalid="ignore"):
            cross = x0 + (d - u) / (su - sd)
        cands.extend(cross[np.isfinite(cross) & (cross > 0) & (cross < hi)])
    cands = np.unique(np.array([_clip_rho_s(c, P, K) for c in cands]))
    values = np.array([objective(c) for c in cands])
    best = values.max()
    tol = 1e-12 * max(abs(best), 1.0)
    pick = cands[values >= best - tol]
    x = float(pick[np.argmin(np.abs(pick - x0))])
    return np.array([x, P - K * x])


@dataclass(frozen=True)
class PowerSolution:
    """Result of :func:`sca_optimize`.

    ``objective`` is in bits over the whole transmission and ``system_rate``
    the same normalized per slot (bits/s/Hz). ``trajectory`` holds
    ``(rho, objective)`` for the start point and every accepted iterate.
    """

    rho_star: np.ndarray
    objective: float
    system_rate: float
    iterations: int
    trajectory: list = field(default_factory=list)
    converged: bool = False
    backtracks: int = 0


STOP_RULES = ("componentwise", "joint")


def relative_change(new, old, rule="componentwise") -> float:
    """Distance between successive power vectors used by the stopping test.

    ``"joint"`` is ``||new - old|| / ||old||``. ``"componentwise"`` takes the
    largest per-entry relative change, which still resolves ``rho_s`` when
    ``rho_d`` is orders of magnitude larger.
    """
    new, old = np.asarray(new, dtype=float), np.asarray(old, dtype=float)
    if rule == "joint":
        return float(np.linalg.norm(new - old) / np.linalg.norm(old))
    if rule == "componentwise":
        return float(np.max(np.abs(new - old) / np.abs(old)))
    raise ValueError(f"stop rule must be one of {STOP_RULES}")


def sca_optimize(cfg: SystemConfig, fading: FadingProfile, E_d: float, epsilon: float | None = None,
                 rho0=None, max_iter: int = MAX_ITER, stop: str = "componentwise") -> PowerSolution:
    """Run the SCA iteration from ``rho0`` (default: equal allocation).

    Stops when the LP solution moves less than ``epsilon`` away from the
    current point, measured by :func:`relative_change` with rule ``stop``;
    ``iterations`` counts LP solves. If an LP step does not increase the true objective the
    step is halved along the segment towards the LP solution (at most 30
    times), which keeps the ascent monotone.
    """
    epsilon = cfg.epsilon if epsilon is None else epsilon
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    P = slot_budget(cfg, E_d)
    rho = equal_allocation(cfg, E_d) if rho0 is None else np.asarray(rho0, dtype=float)
    rho = _project(rho, P, cfg.K)
    obj = sum_rate_objective(rho, cfg, fading)
    trajectory = [(rho.copy(), obj)]
    converged, backtracks, it = False, 0, 0
    while it < max_iter:
        it += 1
        target = solve_lp_subproblem(rho, cfg, fading, E_d)
        if relative_change(target, rho, stop) < epsilon:
            converged = True
            break
        nxt, t = target, 1.0
        new_obj = sum_rate_objective(nxt, cfg, fading)
        for _ in range(30):
            if new_obj >= obj:
                break
            t /= 2
            backtracks += 1
            nxt = _project(rho + t * (target - rho), P, cfg.K)
            new_obj = sum_rate_objective(nxt, cfg, fading)
        if new_obj < obj:
            converged = True  # no ascent left along the budget line
            break
        rho, obj = nxt, new_obj
        trajectory.append((rho.copy(), obj))
    if not converged:
        logger.warning("SCA hit the iteration cap (%d) without converging", max_iter)
    return PowerSolution(rho, obj, obj / (cfg.L * cfg.T_c), it, trajectory, converged, backtracks)


def _project(rho, P, K):
    """Snap ``rho`` back onto the budget line ``K rho_s + rho_d = P``."""
    x = _clip_rho_s(rho[0], P, K)
    return np.array([x, P - K * x])


def _as_budgets(budgets):
    arr = check_array(np.atleast_1d(np.asarray(budgets, dtype=float)).reshape(-1, 1), ensure_2d=True)
    if np.any(arr <= 0):
        raise ValueError("per-slot data power budgets must be > 0")
    return arr.ravel()


class SCAPowerAllocator(BaseEstimator):
    """Estimator-style wrapper around :func:`sca_optimize`.

    ``fit`` takes per-slot data power budgets ``P = K rho_s + rho_d`` (linear),
    solves one allocation per budget and stores them; ``predict`` solves for
    new budgets with the same scenario. Only scalar large-scale gains are
    accepted here, per-pair profiles go through :func:`sca_optimize`.

    Attributes
    ----------
    rho_star_ : ndarray of shape (n_budgets, 2)
    system_rate_ : ndarray of shape (n_budgets,)
    equal_rate_ : ndarray of shape (n_budgets,)
        System rate of the equal split at the same budgets.
    n_iter_ : ndarray of shape (n_budgets,)
    converged_ : ndarray of shape (n_budgets,)
    """

    def __init__(self, M=128, K=10, T_c=40, L=10, rho_p=10.0, rho_LI=2.0, duplex="FD", li_model="fixed_rho",
                 beta_s=1.0, beta_d=1.0, epsilon=1e-5, max_iter=MAX_ITER, stop="componentwise"):
        self.M = M
        self.K = K
        self.T_c = T_c
        self.L = L
        self.rho_p = rho_p
        self.rho_LI = rho_LI
        self.duplex = duplex
        self.li_model = li_model
        self.beta_s = beta_s
        self.beta_d = beta_d
        self.epsilon = epsilon
        self.max_iter = max_iter
        self.stop = stop

    def _scenario(self):
        if self.stop not in STOP_RULES:
            raise ValueError(f"stop must be one of {STOP_RULES}")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be >= 1")
        cfg = make_config(M=self.M, K=self.K, T_c=self.T_c, L=self.L, rho_p=self.rho_p,
                                      rho_LI=self.rho_LI, duplex=self.duplex, li_model=self.li_model,
                                      epsilon=self.epsilon)
        return cfg, FadingProfile.uniform(cfg, self.beta_s, self.beta_d)

    def _solve(self, budgets):
        out = []
        for P in budgets:
            E_d = energy_for_budget(self.cfg_, P)
            out.append(sca_optimize(self.cfg_, self.fading_, E_d, self.epsilon, max_iter=int(self.max_iter),
                                    stop=self.stop))
        return out

    def fit(self, X, y=None):
        budgets = _as_budgets(X)
        self.cfg_, self.fading_ = self._scenario()
        sols = self._solve(budgets)
        norm = self.cfg_.L * self.cfg_.T_c
        self.budgets_ = budgets
        self.solutions_ = sols
        self.rho_star_ = np.array([s.rho_star for s in sols])
        self.system_rate_ = np.array([s.system_rate for s in sols])
        self.equal_rate_ = np.array([
            sum_rate_objective(equal_allocation(self.cfg_, energy_for_budget(self.cfg_, P)), self.cfg_, self.fading_)
            / norm for P in budgets])
        self.n_iter_ = np.array([s.iterations for s in sols])
        self.converged_ = np.array([s.converged for s in sols])
        return self

    def predict(self, X):
        """Optimized ``(rho_s, rho_d)`` for each budget in ``X``."""
        check_is_fitted(self, "cfg_")
        return np.array([s.rho_star for s in self._solve(_as_budgets(X))])
