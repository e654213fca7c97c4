"""Independent high-precision reference for the closed-form rates.

Written straight from the scalar formulas with mpmath, sharing no code with
the package, so it can serve as the oracle for frozen values and for
finite-difference gradient checks free of float64 round-off.
"""

import mpmath as mp

mp.mp.dps = 50


def frame(scheme, duplex, K, T_c, delay=1):
    K, T_c = mp.mpf(K), mp.mpf(T_c)
    if scheme == "overlay":
        if T_c < 2 * K:
            T_d = mp.mpf(0)
        elif duplex == "FD":
            T_d = T_c - K
        elif T_c >= 3 * K:
            T_d = (T_c - K) / 2
        else:
            T_d = T_c - 2 * K
        return T_d, min(K, T_d), max(T_d - K, 0)
    if duplex == "FD":
        T_d = max(T_c - 2 * K - delay, 0)
    else:
        T_d = max(T_c - 2 * K, 0) / 2
    return T_d, mp.mpf(0), T_d


def pair_rates(M, bs, bd, rho_p, rho_s, rho_d, rho_LI, scheme, duplex, T_c, steady, beta_LI=None):
    """Per-pair (UL, DL) bits per interval for one interval kind.

    ``beta_LI`` given means the loop gain is held and the loop power is
    ``rho_d * beta_LI``; otherwise ``rho_LI`` is the loop power.
    """
    mpf = mp.mpf
    bs = [mpf(b) for b in bs]
    bd = [mpf(b) for b in bd]
    K = len(bs)
    M, rho_p, rho_s, rho_d = mpf(M), mpf(rho_p), mpf(rho_s), mpf(rho_d)
    E = K * rho_p
    if duplex == "FD":
        li = rho_d * mpf(beta_LI) if beta_LI is not None else mpf(rho_LI)
    else:
        li = mpf(0)
    c = li if (steady and scheme == "overlay") else mpf(0)
    s2 = [E * b**2 / (c + 1 + E * b) for b in bs]
    leak = rho_s * sum(b - s for b, s in zip(bs, s2)) if scheme == "overlay" else mpf(0)
    d2 = [E * b**2 / (leak + 1 + E * b) for b in bd]
    T_d, T_B, T_C = frame(scheme, duplex, K, T_c)
    out = []
    for k in range(K):
        gC = M * s2[k] / (sum(bs) + (li + 1) / rho_s)
        gB = M * s2[k] / (sum(bs) + (rho_p * sum(bd) + 1) / rho_s) if scheme == "overlay" else mpf(0)
        gD = M * d2[k] ** 2 / ((bd[k] + 1 / rho_d) * sum(d2))
        ul = T_B * mp.log(1 + gB, 2) + T_C * mp.log(1 + gC, 2)
        dl = T_d * mp.log(1 + gD, 2)
        out.append((ul, dl))
    return out


def system_rate(M, K, T_c, L, rho_p, rho_s, rho_d, rho_LI, scheme, duplex, beta=1.0):
    bs = bd = [beta] * K
    first = pair_rates(M, bs, bd, rho_p, rho_s, rho_d, rho_LI, scheme, duplex, T_c, False)
    total = sum(min(u, d) for u, d in first)
    if duplex == "FD" and scheme == "overlay":
        steady = pair_rates(M, bs, bd, rho_p, rho_s, rho_d, rho_LI, scheme, duplex, T_c, True)
        total += (L - 1) * sum(min(u, d) for u, d in steady)
    else:
        total *= L
    return total / (L * T_c)


def rate_partials(cfg, fading, rho, kind, beta_LI=None, rel_step="1e-6"):
    """Central differences of per-pair (UL, DL) rates in ``rho = (rho_s, rho_d)``.

    Returns a dict ``dUL_ds, dUL_dd, dDL_ds, dDL_dd`` of float lists.
    """
    steady = kind == "steady"

    def rates(rs, rd):
        return pair_rates(cfg.M, fading.beta_s, fading.beta_d, cfg.rho_p, rs, rd, cfg.rho_LI,
                          cfg.scheme, cfg.duplex, cfg.T_c, steady, beta_LI)

    rs, rd = mp.mpf(rho[0]), mp.mpf(rho[1])
    out = {}
    for name, h in (("s", rs * mp.mpf(rel_step)), ("d", rd * mp.mpf(rel_step))):
        if name == "s":
            up, dn = rates(rs + h, rd), rates(rs - h, rd)
        else:
            up, dn = rates(rs, rd + h), rates(rs, rd - h)
        out["dUL_d" + name] = [float((u[0] - v[0]) / (2 * h)) for u, v in zip(up, dn)]
        out["dDL_d" + name] = [float((u[1] - v[1]) / (2 * h)) for u, v in zip(up, dn)]
    return out
