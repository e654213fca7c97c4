import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

import oracle
from mmrelay.config import FadingProfile, SystemConfig, db2lin
from mmrelay.power import (
    SCAPowerAllocator,
    energy_for_budget,
    equal_allocation,
    rate_gradient,
    relative_change,
    sca_optimize,
    slot_budget,
    solve_lp_subproblem,
    sum_rate_objective,
)

PA = SystemConfig(rho_p=10.0)


def assert_partials_match(rho, cfg, fading, rtol=1e-5):
    beta_LI = fading.beta_LI if cfg.li_model == "fixed_beta" else None
    for jac in rate_gradient(rho, cfg, fading):
        ref = oracle.rate_partials(cfg, fading, rho, jac.kind, beta_LI)
        for name, expected in ref.items():
            got, expected = getattr(jac, name), np.asarray(expected)
            scale = np.maximum(np.abs(expected), 1e-300)
            err = np.abs(got - expected) / scale
            small = np.abs(expected) < 1e-14  # both sides structurally zero
            assert np.all(err[~small] < rtol), (name, jac.kind, got, expected)
            assert np.all(np.abs(got[small]) < 1e-12), (name, got)


@pytest.mark.parametrize("li_model", ["fixed_rho", "fixed_beta"])
@pytest.mark.parametrize("duplex", ["FD", "HD"])
@pytest.mark.parametrize("scheme", ["overlay", "conventional"])
def test_partials_match_finite_differences(li_model, duplex, scheme):
    cfg = PA.replace(li_model=li_model, duplex=duplex, scheme=scheme)
    fading = FadingProfile([0.5, 1.0, 1.5, 2.0, 0.7, 1.2, 0.3, 0.9, 1.1, 1.4],
                           [1.0, 0.8, 0.4, 1.6, 1.0, 0.9, 1.3, 0.6, 2.0, 0.5], 0.02)
    rng = np.random.default_rng(0)
    for _ in range(4):
        assert_partials_match(10 ** rng.uniform(-2, 4, 2), cfg.replace(K=10), fading)


def test_downlink_falls_with_source_power():
    fading = FadingProfile.uniform(PA)
    for jac in rate_gradient([PA.rho_s, PA.rho_d], PA, fading):
        assert np.all(jac.dDL_ds <= 0)


def test_hd_uplink_ignores_relay_power():
    cfg = PA.replace(duplex="HD", li_model="fixed_beta")
    for jac in rate_gradient([5.0, 50.0], cfg, FadingProfile.uniform(cfg)):
        assert np.all(jac.dUL_dd == 0)


def test_fixed_rho_uplink_ignores_relay_power():
    for jac in rate_gradient([5.0, 50.0], PA, FadingProfile.uniform(PA)):
        assert np.all(jac.dUL_dd == 0)


def test_gradient_rejects_nonpositive():
    with pytest.raises(ValueError):
        rate_gradient([0.0, 1.0], PA, FadingProfile.uniform(PA))


def test_interval_weights():
    jacs = rate_gradient([1.0, 1.0], PA, FadingProfile.uniform(PA))
    assert {j.kind: j.weight for j in jacs} == {"first": 1, "steady": PA.L - 1}
    hd = rate_gradient([1.0, 1.0], PA.replace(duplex="HD"), FadingProfile.uniform(PA))
    assert [(j.kind, j.weight) for j in hd] == [("first", PA.L)]


def test_budget_helpers():
    E = energy_for_budget(PA, 100.0)
    assert E == PA.L * 30 * 100.0
    assert slot_budget(PA, E) == pytest.approx(100.0)
    np.testing.assert_allclose(equal_allocation(PA, E), [5.0, 50.0])
    with pytest.raises(ValueError):
        slot_budget(PA, 0.0)
    with pytest.raises(ValueError):
        slot_budget(SystemConfig(duplex="HD", K=10, T_c=20), 1.0)


def test_lp_uplink_everywhere_binding_goes_to_max_source_power():
    # a tiny frame-wide budget leaves the uplink binding everywhere in the linear model
    cfg = PA.replace(rho_p=1e4)
    fading = FadingProfile.uniform(cfg)
    P = 1e-3
    nxt = solve_lp_subproblem([P / (2 * cfg.K), P / 2], cfg, fading, energy_for_budget(cfg, P))
    jac = rate_gradient([P / (2 * cfg.K), P / 2], cfg, fading)
    slope_ul = sum(j.weight * (j.dUL_ds - cfg.K * j.dUL_dd).sum() for j in jac)
    if all(np.all(j.R_UL + (j.dUL_ds - cfg.K * j.dUL_dd) * (P / cfg.K - P / (2 * cfg.K))
                  <= j.R_DL + (j.dDL_ds - cfg.K * j.dDL_dd) * (P / cfg.K - P / (2 * cfg.K))) for j in jac):
        assert slope_ul > 0
        assert nxt[0] == pytest.approx(P / cfg.K, rel=1e-6)


def test_lp_single_pair_crossing_matches_grid():
    cfg = SystemConfig(K=1, T_c=4, L=2, rho_p=10.0)
    fading = FadingProfile.uniform(cfg)
    P = 20.0
    rho_i = np.array([P / 2, P / 2])
    E = energy_for_budget(cfg, P)
    nxt = solve_lp_subproblem(rho_i, cfg, fading, E)
    jac = rate_gradient(rho_i, cfg, fading)
    grid = np.linspace(0, P, 10_001)

    def model(x):
        return sum(j.weight * np.minimum(j.R_UL + (j.dUL_ds - j.dUL_dd) * (x - rho_i[0]),
                                         j.R_DL + (j.dDL_ds - j.dDL_dd) * (x - rho_i[0])).sum() for j in jac)

    vals = np.array([model(x) for x in grid])
    assert model(nxt[0]) >= vals.max() - 1e-9 * abs(vals.max())
    assert 0 < nxt[0] < P
    assert nxt[0] + nxt[1] == pytest.approx(P)


@settings(max_examples=30, deadline=None)
@given(P_db=st.floats(-10, 60), frac=st.floats(0.05, 0.95))
def test_lp_step_is_feasible_and_not_worse_in_model(P_db, frac):
    fading = FadingProfile.uniform(PA)
    P = float(db2lin(P_db))
    rho_i = np.array([frac * P / PA.K, (1 - frac) * P])
    nxt = solve_lp_subproblem(rho_i, PA, fading, energy_for_budget(PA, P))
    assert PA.K * nxt[0] + nxt[1] == pytest.approx(P, rel=1e-9)
    assert np.all(nxt > 0)
    jac = rate_gradient(rho_i, PA, fading)

    def model(x):
        return sum(j.weight * np.minimum(j.R_UL + (j.dUL_ds - PA.K * j.dUL_dd) * (x - rho_i[0]),
                                         j.R_DL + (j.dDL_ds - PA.K * j.dDL_dd) * (x - rho_i[0])).sum() for j in jac)

    assert model(nxt[0]) >= model(rho_i[0]) - 1e-9 * abs(model(rho_i[0]))


@pytest.mark.parametrize("P_db", [-10, 0, 20, 40, 60])
def test_sca_invariants(P_db):
    fading = FadingProfile.uniform(PA)
    P = float(db2lin(P_db))
    E = energy_for_budget(PA, P)
    sol = sca_optimize(PA, fading, E)
    assert sol.converged
    for rho, _ in sol.trajectory:
        assert PA.L * 30 * (PA.K * rho[0] + rho[1]) == pytest.approx(E, rel=1e-9)
        assert np.all(rho >= 0)
    objs = [o for _, o in sol.trajectory]
    assert np.all(np.diff(objs) >= 0)
    assert sol.objective >= sum_rate_objective(equal_allocation(PA, E), PA, fading)
    assert sol.system_rate == pytest.approx(sol.objective / (PA.L * PA.T_c))


def test_sca_matches_dense_search():
    fading = FadingProfile.uniform(PA)
    P = 100.0
    sol = sca_optimize(PA, fading, energy_for_budget(PA, P))
    xs = np.linspace(1e-4, P / PA.K - 1e-4, 4001)
    best = max(sum_rate_objective([x, P - PA.K * x], PA, fading) for x in xs)
    assert sol.objective >= best - 1e-6 * best


def test_sca_start_point_insensitive():
    fading = FadingProfile.uniform(PA)
    E = energy_for_budget(PA, 100.0)
    ref = sca_optimize(PA, fading, E)
    rng = np.random.default_rng(3)
    for _ in range(20):
        start = equal_allocation(PA, E) * (1 + rng.uniform(-0.2, 0.2))
        sol = sca_optimize(PA, fading, E, rho0=start)
        assert relative_change(sol.rho_star, ref.rho_star) < 1e-3
        assert sol.objective == pytest.approx(ref.objective, rel=1e-6)


def test_iteration_cap_reported():
    fading = FadingProfile.uniform(PA)
    sol = sca_optimize(PA, fading, energy_for_budget(PA, 100.0), max_iter=1)
    assert not sol.converged and sol.iterations == 1


def test_sca_fixed_beta_mode_runs():
    cfg = PA.replace(li_model="fixed_beta")
    sol = sca_optimize(cfg, FadingProfile.uniform(cfg), energy_for_budget(cfg, 100.0))
    assert sol.converged


def test_stop_rules():
    assert relative_change([1.0, 1e6], [2.0, 1e6], "joint") < 1e-5
    assert relative_change([1.0, 1e6], [2.0, 1e6]) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        relative_change([1, 1], [1, 1], "other")
    with pytest.raises(ValueError):
        sca_optimize(PA, FadingProfile.uniform(PA), 1.0, epsilon=0.0)


def test_estimator_facade():
    est = SCAPowerAllocator()
    with pytest.raises(NotFittedError):
        est.predict([100.0])
    est.fit([10.0, 100.0])
    assert est.rho_star_.shape == (2, 2)
    assert np.all(est.system_rate_ >= est.equal_rate_)
    np.testing.assert_allclose(est.predict(100.0), est.rho_star_[1:])
    params = est.get_params()
    assert params["rho_p"] == 10.0 and params["K"] == 10
    twin = clone(est).set_params(stop="joint")
    assert twin.get_params()["stop"] == "joint"
    with pytest.raises(ValueError):
        SCAPowerAllocator().fit([-1.0])
    with pytest.raises(ValueError):
        SCAPowerAllocator(stop="never").fit([1.0])
