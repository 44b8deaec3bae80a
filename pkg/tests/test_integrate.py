import numpy as np
import pytest

from clm.core import ConfigurationError, EnsembleState, Problem, ScheduleParams, flat_rhs
from clm.integrate import (
    CLMConfig,
    IntegrationError,
    RunFailure,
    best_member,
    dopri5,
    integrate_window,
    run_clm,
)
from clm.problems import double_well_problem, multimodal10_problem, quadratic_problem
from clm.schedule import ScheduleConfig


def test_linear_decay_matches_closed_form():
    tol = 1e-6
    y = integrate_window(np.array([1.0]), lambda t, y: -y, 1.0, tol, tol)
    assert abs(y[0] - np.exp(-1.0)) < 10 * tol


@pytest.mark.parametrize("tol", [1e-2, 1e-4, 1e-8])
def test_error_tracks_tolerance(tol):
    y0 = np.array([1.0, 0.0])
    rot = lambda t, y: np.array([y[1], -y[0]])
    y = integrate_window(y0, rot, 2.0, tol, tol)
    exact = np.array([np.cos(2.0), -np.sin(2.0)])
    assert np.max(np.abs(y - exact)) < 10 * tol


def test_zero_field_leaves_state_unchanged():
    y0 = np.array([1.5, -2.0, 3.0])
    y = integrate_window(y0, lambda t, y: np.zeros_like(y), 0.7)
    np.testing.assert_array_equal(y, y0)


def test_lands_exactly_on_window_end():
    seen = []

    def rhs(t, y):
        seen.append(t)
        return np.ones_like(y)

    y = integrate_window(np.zeros(1), rhs, 0.3, 1e-9, 1e-9)
    assert y[0] == pytest.approx(0.3, abs=1e-14)
    assert max(seen) == pytest.approx(0.3, abs=1e-15)


def test_stats_and_rejections_counted():
    res = dopri5(lambda t, y: -50 * y, np.array([1.0]), 1.0, 1e-6, 1e-6)
    assert res.steps > 0 and res.nfev >= 6 * res.steps
    assert res.y[0] == pytest.approx(np.exp(-50), abs=1e-5)


def test_underflow_raises_with_last_state():
    # finite-time blow-up: y' = y^2, y(0) = 1 explodes at t = 1
    with pytest.raises(IntegrationError) as info:
        integrate_window(np.array([1.0]), lambda t, y: y * y, 2.0, 1e-8, 1e-8)
    assert info.value.t < 1.0 + 1e-6
    assert np.all(np.isfinite(info.value.state))


def test_multiplier_sum_preserved_over_window():
    rng = np.random.default_rng(0)
    q, n = 6, 10
    p = multimodal10_problem(n)
    ens = EnsembleState(rng.uniform(-20, 20, (q, n)), rng.normal(0, 1, (q, n)))
    rhs = flat_rhs(p, ScheduleParams(rng.uniform(0.1, 1, q), 50.0), q)
    tol = 1e-2
    y = integrate_window(ens.to_flat(), rhs, 1.0, tol, tol)
    out = EnsembleState.from_flat(y, q, n)
    assert np.max(np.abs(out.lam.sum(0) - ens.lam.sum(0))) < 10 * tol


def fig1_config(windows=60):
    sc = ScheduleConfig(gamma_fixed=0.5, eta_fixed=2.0, renumber_fraction=0.0)
    return CLMConfig(q=2, delta_t=1.0, schedule=sc, max_windows=windows)


def test_double_well_pair_reaches_global_minimum():
    ens, trace = run_clm(double_well_problem(), fig1_config(), EnsembleState.from_states([[3.0], [-3.0]]))
    assert np.all(np.abs(ens.x[:, 0] + 2.90) < 0.05)
    assert len(trace) == 60


def test_quadratic_pair_synchronizes_at_minimum():
    p = quadratic_problem(3)
    sc = ScheduleConfig(gamma_lo=0.5, gamma_hi=5.0, eta_lo=1e-2, eta_hi=10.0, alpha=1.0,
                        renumber_fraction=0.0)
    cfg = CLMConfig(q=2, delta_t=0.5, schedule=sc, max_windows=400, stop_sync_tol=1e-8,
                    integrator_abs_tol=1e-10, integrator_rel_tol=1e-10)
    init = EnsembleState.from_states([[4.0, -1.0, 2.0], [-3.0, 5.0, 0.5]])
    ens, trace = run_clm(p, cfg, init)
    assert trace.records[-1].sync_residual < 1e-6
    np.testing.assert_allclose(ens.x, 0.0, atol=1e-6)
    assert trace.stop_reason == "converged"


def test_trace_records_one_per_window():
    p = multimodal10_problem(4)
    sc = ScheduleConfig(gamma_lo=0.1, gamma_hi=1.0, alpha=0.1, renumber_period=3, renumber_fraction=0.5)
    cfg = CLMConfig(q=6, delta_t=0.5, schedule=sc, max_windows=10, seed=4)
    init = EnsembleState.from_states(np.random.default_rng(0).uniform(-5, 5, (6, 4)))
    ens, trace = run_clm(p, cfg, init)
    assert [r.window for r in trace.records] == list(range(1, 11))
    assert np.all(np.diff(trace.times()) > 0)
    for r in trace.records:
        assert (r.renumbered is not None) == (r.window % 3 == 0)
        assert np.all((r.gamma == 0.1) | (r.gamma == 1.0))
        assert sc.eta_lo <= r.eta <= sc.eta_hi
        assert r.avg_cost == pytest.approx(np.mean(r.costs))


def test_run_is_deterministic():
    p = multimodal10_problem(5)
    sc = ScheduleConfig(gamma_lo=0.1, gamma_hi=1.0, alpha=0.1)
    cfg = CLMConfig(q=8, delta_t=1.0, schedule=sc, max_windows=15, seed=7)
    init = EnsembleState.from_states(np.random.default_rng(1).uniform(-20, 20, (8, 5)))
    a, ta = run_clm(p, cfg, init)
    b, tb = run_clm(p, cfg, init)
    np.testing.assert_array_equal(a.x, b.x)
    for ra, rb in zip(ta.records, tb.records):
        np.testing.assert_array_equal(ra.costs, rb.costs)
        np.testing.assert_array_equal(ra.gamma, rb.gamma)
        assert ra.eta == rb.eta


def test_run_failure_carries_partial_trace():
    calls = {"n": 0}

    def grad(x):
        return 2 * x

    def cost(x):
        calls["n"] += 1
        return float(x @ x) if calls["n"] < 20 else float("nan")

    p = Problem(dim=1, cost=cost, gradient=grad)
    sc = ScheduleConfig(renumber_fraction=0.0)
    cfg = CLMConfig(q=2, delta_t=0.1, schedule=sc, max_windows=100)
    with pytest.raises(RunFailure) as info:
        run_clm(p, cfg, EnsembleState.from_states([[1.0], [2.0]]))
    assert 0 < len(info.value.trace) < 100


def test_config_mismatch():
    cfg = CLMConfig(q=3)
    with pytest.raises(ConfigurationError):
        run_clm(quadratic_problem(1), cfg, EnsembleState.from_states([[1.0], [2.0]]))
    with pytest.raises(ConfigurationError):
        CLMConfig(delta_t=0.0)
    with pytest.raises(ConfigurationError):
        CLMConfig(max_windows=0)


def test_best_member():
    p = quadratic_problem(1, scale=1.0)
    i, x, c = best_member(EnsembleState.from_states([[1.0], [0.0]]), p)
    assert (i, c) == (1, 0.0) and x[0] == 0.0
    i, _, _ = best_member(EnsembleState.from_states([[2.0], [2.0], [2.0]]), p)
    assert i == 0
    rng = np.random.default_rng(3)
    X = rng.normal(size=(9, 4))
    pm = multimodal10_problem(4)
    i, x, c = best_member(EnsembleState.from_states(X), pm)
    scan = [pm.cost(v) for v in X]
    assert i == int(np.argmin(scan)) and c == min(scan)
