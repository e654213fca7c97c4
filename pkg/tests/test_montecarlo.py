import numpy as np
import pytest

from mmrelay.config import FadingProfile, SystemConfig
from mmrelay.montecarlo import (
    ResourceLimitError,
    detection_error_vs_M,
    lemma_checks,
    moment_oracles,
    moment_targets,
    simulate_chain,
)
from mmrelay.rates import system_rate

SMALL = dict(M=32, K=4, T_c=20, L=3)


def small(**kw):
    cfg = SystemConfig(**{**SMALL, **kw})
    return cfg, FadingProfile.uniform(cfg)


def test_reproducible_and_worker_independent():
    cfg, fading = small()
    a = simulate_chain(cfg, fading, trials=12, seed=5)
    b = simulate_chain(cfg, fading, trials=12, seed=5)
    c = simulate_chain(cfg, fading, trials=12, seed=5, n_jobs=2)
    assert a.empirical_R_system == b.empirical_R_system == c.empirical_R_system
    assert np.array_equal(a.R_UL, c.R_UL) and np.array_equal(a.R_DL, c.R_DL)
    d = simulate_chain(cfg, fading, trials=12, seed=6)
    assert d.empirical_R_system != a.empirical_R_system


def test_zero_data_power_gives_zero_rates():
    cfg, fading = small(rho_s=0.0, rho_d=0.0)
    res = simulate_chain(cfg, fading, trials=5)
    assert res.empirical_R_system == 0.0
    assert not res.R_pair.any()


@pytest.mark.parametrize("scheme", ["overlay", "conventional"])
@pytest.mark.parametrize("duplex", ["HD", "FD"])
@pytest.mark.parametrize("rho", [0.1, 1.0, 100.0])
def test_bound_below_simulation(scheme, duplex, rho):
    cfg, fading = small(scheme=scheme, duplex=duplex, rho_p=rho, rho_s=rho, rho_d=rho, T_c=24)
    res = simulate_chain(cfg, fading, trials=150, seed=1)
    assert res.empirical_R_system >= system_rate(cfg, fading) - 3 * res.stderr


def test_perfect_cancellation_is_an_upper_benchmark():
    cfg, fading = small(duplex="HD", rho_p=1.0, rho_s=1.0, rho_d=1.0)
    known = simulate_chain(cfg, fading, trials=150, seed=2)
    perfect = simulate_chain(cfg, fading, trials=150, seed=2, cancellation="perfect")
    assert perfect.empirical_R_system > known.empirical_R_system


def test_shapes_and_stderr():
    cfg, fading = small()
    res = simulate_chain(cfg, fading, trials=4)
    assert res.R_UL.shape == (cfg.L, cfg.K)
    assert res.stderr > 0 and res.trials == 4
    one = simulate_chain(cfg, fading, trials=1)
    assert one.stderr == float("inf")


def test_guards():
    cfg, fading = small()
    with pytest.raises(ValueError):
        simulate_chain(cfg, fading, trials=0)
    with pytest.raises(ValueError):
        simulate_chain(cfg, fading, cancellation="magic")
    with pytest.raises(ResourceLimitError):
        simulate_chain(SystemConfig(), FadingProfile.uniform(SystemConfig()), trials=10**6)


def test_no_data_slots_short_circuits():
    cfg = SystemConfig(K=10, T_c=20, duplex="HD")
    res = simulate_chain(cfg, FadingProfile.uniform(cfg), trials=3)
    assert res.empirical_R_system == 0.0


def test_moment_oracles_small():
    cfg = SystemConfig(M=32, K=3, T_c=12)
    out = moment_oracles(cfg, FadingProfile.uniform(cfg), trials=1500, seed=3)
    for name in ("E_gg", "Var_gg", "MI_DL", "MI_UL", "PI_UL", "LI_UL", "AN_UL"):
        assert out[name].z < 4, name
    assert out["LI_UL_squared_gain"].rel_error > 1.0


def test_moment_targets_li_forms(cfg, fading):
    t = moment_targets(cfg, fading)
    beta_LI = cfg.rho_LI / cfg.rho_d
    np.testing.assert_allclose(t["LI_UL_squared_gain"] / t["LI_UL"], beta_LI)


def test_lemma_checks():
    out = lemma_checks(M=4096, trials=2000, seed=0)
    assert out["inner_product"] < 0.05
    assert out["self_product"] == pytest.approx(1.0, rel=0.05)
    small_out = lemma_checks(M=64, trials=10_000, seed=0)
    assert small_out["fourth_moment"].target == 4160
    assert small_out["fourth_moment"].rel_error < 0.02


def test_detection_exact_without_noise_or_pilots():
    cfg = SystemConfig(K=1, T_c=4)
    rows = detection_error_vs_M(cfg, FadingProfile.uniform(cfg), [16, 64], trials=3, noiseless=True,
                                dest_pilots=False)
    assert all(r.rel_error < 1e-12 for r in rows)


def test_detection_error_decreases_and_destination_quality_converges():
    cfg = SystemConfig(symbols="qpsk")
    rows = detection_error_vs_M(cfg, FadingProfile.uniform(cfg), [32, 128, 512], trials=20, seed=4)
    errs = [r.rel_error for r in rows]
    assert errs[0] > errs[1] > errs[2]
    gaps = [abs(r.dest_mse_detected - r.dest_mse_known_data) for r in rows]
    assert gaps[-1] <= gaps[0]
    assert gaps[-1] < 1e-6


def test_detection_list_must_be_sorted(cfg, fading):
    with pytest.raises(ValueError):
        detection_error_vs_M(cfg, fading, [256, 64])
