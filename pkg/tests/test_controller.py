import math

import numpy as np
import pytest

from ahmpc.controller import (
    ControllerConfig,
    ControllerState,
    check_lyapunov_window,
    controller_step,
    extend_with_terminal_feedback,
    simulate_closed_loop,
)
from ahmpc.dynamics import Model, double_integrator, double_pendulum, scalar_system
from ahmpc.errors import NumericOverflowError
from ahmpc.ocp import total_cost, OcpProblem
from ahmpc.terminal import (
    QuadLagrangian,
    TerminalPair,
    lqr_terminal_pair,
    terminal_cost,
)

PHI = (1.0 + math.sqrt(5.0)) / 2.0
KGOLD = PHI / (1.0 + PHI)

X0_PENDULUM = np.array([math.pi / 2, -math.pi / 2, 0.0, 0.0])


def _pendulum_setup():
    mdl = double_pendulum()
    lag = QuadLagrangian.isotropic(4, 2)
    tp = lqr_terminal_pair(mdl, lag, alpha_coeff=0.1)
    return mdl, lag, tp


def _scalar_setup(alpha_coeff=0.1):
    mdl = scalar_system(dt=1.0)
    lag = QuadLagrangian(Q=np.eye(1), R=np.eye(1))
    tp = TerminalPair(
        P=np.array([[PHI]]), K=np.array([[KGOLD]]), alpha_coeff=alpha_coeff
    )
    return mdl, lag, tp


# --- extension rollout -----------------------------------------------------

def test_extension_from_origin_is_zero():
    mdl, lag, tp = _pendulum_setup()
    ext = extend_with_terminal_feedback(mdl, tp, np.zeros(4), 5)
    assert ext.shape == (6, 4)
    assert np.all(ext == 0.0)


def test_extension_scalar_golden_values():
    # x+ = (1 - K) x with the golden-ratio gain: 1, 0.382..., 0.1459...
    mdl, lag, tp = _scalar_setup()
    ext = extend_with_terminal_feedback(mdl, tp, np.array([1.0]), 2)
    ratio = 1.0 - KGOLD
    assert ext[0, 0] == 1.0
    assert ext[1, 0] == pytest.approx(ratio, abs=1e-12)
    assert ext[2, 0] == pytest.approx(ratio * ratio, abs=1e-12)


def test_extension_contracts_near_origin():
    # the closed loop descends the terminal value at every step and brings
    # the state closer to the origin overall (the raw norm may transiently
    # rise while velocities build up)
    mdl, lag, tp = _pendulum_setup()
    x = np.array([0.01, -0.008, 0.002, 0.005])
    ext = extend_with_terminal_feedback(mdl, tp, x, 8)
    vals = np.array([terminal_cost(tp, e) for e in ext])
    assert np.all(np.diff(vals) < 0.0)
    assert np.linalg.norm(ext[-1]) < np.linalg.norm(ext[0])


@pytest.mark.filterwarnings("ignore:overflow")
def test_extension_divergence_becomes_nan_not_crash():
    cubic = Model(
        name="cubic",
        n=1,
        m=1,
        vector_field=lambda x, u: np.array([x[0] ** 3 + u[0]]),
        dt=1.0,
    )
    tp = TerminalPair(P=np.eye(1), K=np.zeros((1, 1)), alpha_coeff=0.1)
    ext = extend_with_terminal_feedback(cubic, tp, np.array([1e80]), 4)
    assert not np.all(np.isfinite(ext))
    rep = check_lyapunov_window(tp, ext)
    assert not rep.passed


# --- Lyapunov window -------------------------------------------------------

def test_window_all_zero_states_pass():
    mdl, lag, tp = _pendulum_setup()
    rep = check_lyapunov_window(tp, np.zeros((6, 4)))
    assert rep.passed
    assert np.all(rep.value_ok) and np.all(rep.decrease_ok)


def test_window_scalar_golden_pass():
    mdl, lag, tp = _scalar_setup()
    ext = extend_with_terminal_feedback(mdl, tp, np.array([1.0]), 2)
    rep = check_lyapunov_window(tp, ext)
    assert rep.passed
    # terminal value along the extension: 0.809 x^2
    assert rep.values[0] == pytest.approx(PHI / 2.0, abs=1e-12)


def test_window_flags_value_increase():
    tp = TerminalPair(P=2.0 * np.eye(1), K=np.zeros((1, 1)), alpha_coeff=0.1)
    ext = np.array([[1.0], [2.0], [0.5]])  # V goes 1 -> 4 -> 0.25
    rep = check_lyapunov_window(tp, ext)
    assert not rep.passed
    assert not rep.decrease_ok[0]
    assert rep.decrease_ok[1]
    assert np.all(rep.value_ok)


def test_window_slack_tolerates_small_violation():
    tp = TerminalPair(P=2.0 * np.eye(1), K=np.zeros((1, 1)), alpha_coeff=0.1)
    ext = np.array([[1.0], [1.0], [1.0]])  # zero decrease, bound is 0.1
    assert not check_lyapunov_window(tp, ext).passed
    assert check_lyapunov_window(tp, ext, slack=0.2).passed


def test_window_nonfinite_states_fail():
    tp = TerminalPair(P=np.eye(1), K=np.zeros((1, 1)), alpha_coeff=0.1)
    ext = np.array([[1.0], [np.nan], [0.5]])
    rep = check_lyapunov_window(tp, ext)
    assert not rep.passed


def test_window_report_consistency():
    mdl, lag, tp = _pendulum_setup()
    rng = np.random.default_rng(31)
    for _ in range(20):
        ext = rng.uniform(-2.0, 2.0, size=(6, 4))
        rep = check_lyapunov_window(tp, ext)
        assert rep.passed == (bool(np.all(rep.value_ok)) and bool(np.all(rep.decrease_ok)))
        assert rep.values.shape == (6,)
        assert rep.bounds.shape == (5,)
        assert np.allclose(rep.decreases, rep.values[:-1] - rep.values[1:], atol=1e-15)


# --- single controller step ------------------------------------------------

def test_step_at_origin_terminal_regime():
    mdl, lag, tp = _pendulum_setup()
    cfg = ControllerConfig()
    st = ControllerState(N=0, warm=np.zeros((1, 2)))
    u, nxt, recs = controller_step(cfg, mdl, tp, lag, st, np.zeros(4))
    assert np.all(u == 0.0)
    assert nxt.N == 0
    assert len(recs) == 1 and recs[0].advanced and recs[0].window_pass
    assert recs[0].N == 0 and recs[0].solver_iters == 0


def test_step_scalar_stable_region_shrinks_horizon():
    mdl, lag, tp = _scalar_setup()
    cfg = ControllerConfig(N_init=1, extension_steps=2)
    st = ControllerState(N=1, warm=np.zeros((1, 1)))
    u, nxt, recs = controller_step(cfg, mdl, tp, lag, st, np.array([0.5]))
    assert recs[-1].window_pass
    assert nxt.N == 0
    assert len(recs) == 1


def test_step_pendulum_first_applied_control_regression():
    mdl, lag, tp = _pendulum_setup()
    cfg = ControllerConfig()
    st = ControllerState(N=5, warm=np.zeros((5, 2)))
    u, nxt, recs = controller_step(cfg, mdl, tp, lag, st, X0_PENDULUM)
    assert u[0] == pytest.approx(-14.536395855786528, rel=1e-9)
    assert u[1] == pytest.approx(39.332964480230686, rel=1e-9)
    assert recs[-1].window_pass and nxt.N == 4


def test_step_terminal_regime_failure_reenters_optimization():
    # with a comparison bound stronger than the closed loop can decrease,
    # the window fails even at N = 0 and the horizon re-enters at 1
    mdl, lag, tp = _scalar_setup(alpha_coeff=2.0)
    cfg = ControllerConfig(N_init=1, extension_steps=2)
    st = ControllerState(N=0, warm=np.zeros((1, 1)))
    u, nxt, recs = controller_step(cfg, mdl, tp, lag, st, np.array([1.0]))
    assert not recs[0].window_pass
    assert recs[0].advanced
    assert nxt.N == 1
    assert u[0] == pytest.approx(-KGOLD, rel=1e-12)


def test_step_budget_exhaustion_advances_with_longer_horizon():
    mdl, lag, tp = _scalar_setup(alpha_coeff=2.0)
    cfg = ControllerConfig(N_init=1, extension_steps=2, N_max=10, max_resolves_per_step=3)
    st = ControllerState(N=1, warm=np.zeros((1, 1)))
    u, nxt, recs = controller_step(cfg, mdl, tp, lag, st, np.array([1.0]))
    # three re-solves at growing horizons, then a forced advance
    assert [r.N for r in recs] == [1, 2, 3, 4]
    assert [r.advanced for r in recs] == [False, False, False, True]
    assert [r.resolves for r in recs] == [0, 1, 2, 3]
    assert not recs[-1].window_pass
    assert nxt.N == 5  # min(4 + 1, N_max)
    assert len(nxt.warm) == 5


def test_step_horizon_cap_saturates_and_flags():
    mdl, lag, tp = _scalar_setup(alpha_coeff=2.0)
    cfg = ControllerConfig(N_init=1, extension_steps=2, N_max=2, max_resolves_per_step=10)
    st = ControllerState(N=2, warm=np.zeros((2, 1)))
    u, nxt, recs = controller_step(cfg, mdl, tp, lag, st, np.array([1.0]))
    assert len(recs) == 1
    assert recs[0].advanced and not recs[0].window_pass
    assert recs[0].saturated
    assert nxt.N == 2  # capped


def test_config_validation():
    with pytest.raises(ValueError):
        ControllerConfig(N_init=0)
    with pytest.raises(ValueError):
        ControllerConfig(extension_steps=0)
    with pytest.raises(ValueError):
        ControllerConfig(N_init=5, N_max=4)
    with pytest.raises(ValueError):
        ControllerConfig(lyap_slack=-1.0)


# --- closed loop -----------------------------------------------------------

def test_loop_from_origin_counts_down_and_parks():
    mdl, lag, tp = _pendulum_setup()
    log = simulate_closed_loop(ControllerConfig(), mdl, tp, lag, np.zeros(4), 12)
    assert [r.N for r in log.advancing()] == [5, 4, 3, 2, 1, 0, 0, 0, 0, 0, 0, 0]
    assert np.all(log.states == 0.0)
    assert all(r.window_pass for r in log.records)


def test_loop_double_integrator_converges():
    mdl = double_integrator(dt=0.2)
    lag = QuadLagrangian.isotropic(2, 1, q=1.0, r=0.1)
    tp = lqr_terminal_pair(mdl, lag, alpha_coeff=0.1)
    log = simulate_closed_loop(ControllerConfig(), mdl, tp, lag, np.array([1.0, 0.0]), 60)
    norms = np.linalg.norm(log.states, axis=1)
    assert np.min(norms) < 1e-3
    adv = log.advancing()
    assert adv[-1].N == 0
    assert all(r.N == 0 for r in adv[-10:])


def test_loop_determinism():
    mdl, lag, tp = _pendulum_setup()
    cfg = ControllerConfig()
    a = simulate_closed_loop(cfg, mdl, tp, lag, X0_PENDULUM, 40)
    b = simulate_closed_loop(cfg, mdl, tp, lag, X0_PENDULUM, 40)
    assert len(a.records) == len(b.records)
    assert np.array_equal(a.states, b.states)
    for ra, rb in zip(a.records, b.records):
        assert ra.N == rb.N and ra.advanced == rb.advanced
        assert np.array_equal(ra.u, rb.u)
        assert ra.cost == rb.cost
        assert ra.solve_seconds == rb.solve_seconds == 0.0


def test_loop_window_bits_recomputable_from_log():
    """Re-evaluating the two tests from the logged extension states must
    reproduce every logged pass/fail bit exactly."""
    mdl, lag, tp = _pendulum_setup()
    cfg = ControllerConfig()
    log = simulate_closed_loop(cfg, mdl, tp, lag, X0_PENDULUM, 60)
    for rec in log.records:
        rep = check_lyapunov_window(tp, rec.x_ext, cfg.lyap_slack)
        assert rep.passed == rec.window_pass


def test_loop_terminal_regime_value_descends():
    # after ten consecutive passing steps at N = 0 the terminal value must
    # be non-increasing along the plant states
    mdl, lag, tp = _pendulum_setup()
    log = simulate_closed_loop(ControllerConfig(), mdl, tp, lag, X0_PENDULUM, 200)
    adv = log.advancing()
    run = 0
    for i, r in enumerate(adv):
        if r.N == 0 and r.window_pass:
            run += 1
            if run >= 10:
                vals = [terminal_cost(tp, a.x) for a in adv[i - 9 : i + 1]]
                assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
        else:
            run = 0
    assert run >= 10  # the experiment does settle


def test_loop_descent_under_acceptance_lq():
    """Where the window passed and the solve is exact (linear model), the
    optimal value drops by at least the applied stage cost."""
    mdl = double_integrator(dt=0.2)
    lag = QuadLagrangian.isotropic(2, 1, q=1.0, r=0.1)
    tp = lqr_terminal_pair(mdl, lag, alpha_coeff=0.1)
    checked = 0
    for x0 in ([1.0, 0.0], [0.0, 1.5], [-2.0, 1.0]):
        log = simulate_closed_loop(
            ControllerConfig(), mdl, tp, lag, np.array(x0), 60
        )
        recs = log.records
        for i in range(len(recs) - 1):
            r, r_next = recs[i], recs[i + 1]
            if r.advanced and r.window_pass and r.converged and r.N >= 1:
                drop = r.cost - r_next.cost
                stage = lag.stage_cost(r.x, r.u)
                assert drop >= stage - 1e-9
                checked += 1
    assert checked >= 10


def test_loop_horizon_step_law():
    """Between consecutive plant advances the carried horizon moves by at
    most one, and it shrinks only after a pass; growth beyond one happens
    only through logged non-advancing re-solves."""
    mdl, lag, tp = _pendulum_setup()
    log = simulate_closed_loop(ControllerConfig(), mdl, tp, lag, X0_PENDULUM, 200)
    ev = log.event_horizons()
    deltas = np.diff(ev)
    assert set(deltas.tolist()) <= {-1, 0, 1}
    for i, d in enumerate(deltas):
        if d == -1:
            assert log.records[i].window_pass
    by_step = {}
    for r in log.records:
        by_step.setdefault(r.step, []).append(r)
    adv = log.advancing()
    for prev, cur in zip(adv, adv[1:]):
        entry = by_step[cur.step][0].N
        assert entry - prev.N in (-1, 0, 1)
        if entry - prev.N == -1:
            assert prev.window_pass


def test_loop_horizon_increases_present():
    mdl, lag, tp = _pendulum_setup()
    log = simulate_closed_loop(ControllerConfig(), mdl, tp, lag, X0_PENDULUM, 200)
    ev = log.event_horizons()
    assert np.any(np.diff(ev) > 0)


def test_loop_warm_start_length_invariant():
    mdl, lag, tp = _pendulum_setup()
    cfg = ControllerConfig()
    st = ControllerState(N=cfg.N_init, warm=np.zeros((cfg.N_init, 2)))
    x = X0_PENDULUM.copy()
    from ahmpc.dynamics import step_euler

    for _ in range(30):
        u, st, _ = controller_step(cfg, mdl, tp, lag, st, x)
        assert len(st.warm) == max(st.N, 1)
        x = step_euler(mdl, x, u)


def test_loop_rejects_bad_inputs():
    mdl, lag, tp = _pendulum_setup()
    with pytest.raises(ValueError):
        simulate_closed_loop(ControllerConfig(), mdl, tp, lag, np.zeros(4), 0)
    with pytest.raises(ValueError):
        simulate_closed_loop(ControllerConfig(), mdl, tp, lag, np.zeros(3), 5)
    with pytest.raises(NumericOverflowError):
        simulate_closed_loop(
            ControllerConfig(), mdl, tp, lag, np.array([np.nan, 0, 0, 0]), 5
        )


@pytest.mark.filterwarnings("ignore:overflow")
def test_loop_divergence_recorded_not_raised():
    cubic = Model(
        name="cubic",
        n=1,
        m=1,
        vector_field=lambda x, u: np.array([x[0] ** 3 + u[0]]),
        dt=1.0,
        control_bounds=(-0.01, 0.01),
    )
    lag = QuadLagrangian(Q=np.eye(1), R=np.eye(1))
    tp = TerminalPair(
        P=np.eye(1),
        K=np.array([[0.1]]),
        alpha_coeff=0.1,
        control_bounds=cubic.control_bounds,
    )
    cfg = ControllerConfig(N_init=1, extension_steps=1, N_max=2, max_resolves_per_step=0)
    log = simulate_closed_loop(cfg, cubic, tp, lag, np.array([3.0]), 50)
    assert log.failed
    assert "step" in log.failure
    assert len(log.records) < 50 * 3  # terminated early


def test_loop_cost_field_matches_recomputation():
    mdl, lag, tp = _pendulum_setup()
    log = simulate_closed_loop(ControllerConfig(), mdl, tp, lag, X0_PENDULUM, 20)
    for rec in log.records:
        if rec.N >= 1:
            prob = OcpProblem(model=mdl, lagrangian=lag, terminal=tp, x0=rec.x, N=rec.N)
            # the logged u is only the first control; recompute V_f at the
            # logged terminal state instead, which pins the endpoint
            assert rec.vf_terminal == pytest.approx(
                terminal_cost(tp, rec.x_ext[0]), abs=1e-12
            )
        else:
            assert rec.cost == pytest.approx(terminal_cost(tp, rec.x), abs=1e-15)
