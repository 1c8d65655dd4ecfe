"""End-to-end checks of the package's headline guarantees.

One test per externally stated requirement, each exercised at its stated
tolerance.  The terminal summary (see conftest.py) prints a single PASS/FAIL
line per criterion.
"""

import math
import time

import numpy as np
import pytest

from _oracles import (
    batch_lq_solution,
    fd_gradient,
    pendulum_accel_reference,
    pendulum_energy,
    pendulum_energy_rate,
    riccati_recursion_value,
    rk4_integrate,
)
from ahmpc.cli import (
    ANGLES_SVG_NAME,
    CSV_NAME,
    HORIZON_SVG_NAME,
    ExperimentConfig,
    build_model,
    controller_config,
    default_x0,
    run_check,
    run_experiment,
)
from ahmpc.controller import check_lyapunov_window, simulate_closed_loop
from ahmpc.dynamics import (
    PendulumParams,
    double_integrator,
    double_pendulum,
    linearize,
    pendulum_vector_field,
)
from ahmpc.grid_oracle import (
    builtin_instances,
    horizon_field,
    ideal_trajectory,
    min_horizon,
    reachable_sets,
)
from ahmpc.ocp import OcpProblem, cost_gradient, solve_ocp
from ahmpc.terminal import QuadLagrangian, lqr_terminal_pair, solve_dare

PHI = (1.0 + math.sqrt(5.0)) / 2.0


@pytest.fixture(scope="module")
def pendulum_run():
    """The default 200-step closed-loop experiment, simulated once."""
    cfg = ExperimentConfig()
    model = build_model(cfg)
    lag = QuadLagrangian.isotropic(model.n, model.m, cfg.q_scale, cfg.r_scale)
    tp = lqr_terminal_pair(model, lag, cfg.alpha_coeff)
    x0 = np.asarray(default_x0(cfg.model))
    t0 = time.perf_counter()
    log = simulate_closed_loop(controller_config(cfg), model, tp, lag, x0, cfg.steps)
    elapsed = time.perf_counter() - t0
    return cfg, tp, log, elapsed


def test_criterion_1_stabilizes_the_double_pendulum(pendulum_run):
    """Both angles settle below 0.01 rad within 200 steps, the horizon
    reaches 0 and stays there for the final 20 steps, at least one horizon
    increase occurs along the way, and the whole run takes under a minute."""
    cfg, tp, log, elapsed = pendulum_run
    assert not log.failed

    angles = np.abs(log.states[:, :2])
    settled = np.where(np.max(angles, axis=1) < 0.01)[0]
    assert settled.size > 0 and settled[0] <= 200

    adv = log.advancing()
    assert len(adv) == 200
    assert any(r.N == 0 for r in adv)
    assert all(r.N == 0 for r in adv[-20:])

    assert np.any(np.diff(log.event_horizons()) == 1)
    assert elapsed < 60.0


def test_criterion_2_riccati_golden_scalar():
    """A = B = Q = R = 1 gives P = (1+sqrt5)/2 and K = (sqrt5-1)/2 to 1e-10."""
    one = np.array([[1.0]])
    P, K = solve_dare(one, one, one, one)
    assert abs(P[0, 0] - PHI) <= 1e-10
    assert abs(K[0, 0] - (math.sqrt(5.0) - 1.0) / 2.0) <= 1e-10


def test_criterion_3_gradient_matches_finite_differences():
    """Adjoint gradient vs central differences on 20 random instances across
    both plants and N in {1, 3, 8}, relative error at most 1e-5."""
    rng = np.random.default_rng(2024)
    setups = []
    for mdl in (double_pendulum(PendulumParams(), dt=0.1), double_integrator(dt=0.1)):
        lag = QuadLagrangian.isotropic(mdl.n, mdl.m, 0.1, 0.1)
        tp = lqr_terminal_pair(mdl, lag, 0.1)
        setups.append((mdl, lag, tp))
    checked = 0
    for N in (1, 3, 8):
        for mdl, lag, tp in setups:
            for _ in range(4):
                if checked == 20:
                    break
                x0 = rng.uniform(-1.0, 1.0, size=mdl.n)
                us = rng.uniform(-2.0, 2.0, size=(N, mdl.m))
                prob = OcpProblem(model=mdl, lagrangian=lag, terminal=tp, x0=x0, N=N)
                g = cost_gradient(prob, us)
                g_fd = fd_gradient(prob, us)
                scale = max(1.0, float(np.max(np.abs(g_fd))))
                assert np.max(np.abs(g - g_fd)) / scale <= 1e-5
                checked += 1
    assert checked == 20


def test_criterion_4_linear_quadratic_exactness():
    """On the linear plant the solver reproduces the batch LQ optimum to 1e-6
    in cost and the Riccati-recursion value function to 1e-8."""
    mdl = double_integrator(dt=0.1)
    lag = QuadLagrangian.isotropic(mdl.n, mdl.m, 0.1, 0.1)
    tp = lqr_terminal_pair(mdl, lag, 0.1)
    lin = linearize(mdl, np.zeros(2), np.zeros(1))
    A, B = lin.A, lin.B
    rng = np.random.default_rng(7)
    for _ in range(10):
        N = int(rng.integers(1, 9))
        x0 = rng.uniform(-2.0, 2.0, size=2)
        prob = OcpProblem(model=mdl, lagrangian=lag, terminal=tp, x0=x0, N=N)
        sol = solve_ocp(prob, np.zeros((N, 1)), tol=1e-10)
        assert sol.converged
        _, cost_ref = batch_lq_solution(A, B, lag.Q, lag.R, tp.P, x0, N)
        assert abs(sol.cost - cost_ref) <= 1e-6
        value = riccati_recursion_value(A, B, lag.Q, lag.R, tp.P, x0, N)
        assert abs(sol.cost - value) <= 1e-8


def test_criterion_5_pendulum_physics():
    """Zero-torque energy drift below 1e-6 relative over one RK4 second at
    dt=1e-4; power balance to 1e-8 at 100 random states; odd symmetry of the
    vector field to 1e-12."""
    p = PendulumParams()
    vf = lambda x, u: pendulum_vector_field(p, x, u)
    u0 = np.zeros(2)
    for x0 in (
        np.array([math.pi / 2, -math.pi / 2, 0.0, 0.0]),
        np.array([0.4, -0.9, 0.6, -0.2]),
    ):
        e0 = pendulum_energy(p, x0)
        x1 = rk4_integrate(vf, x0, u0, 1e-4, 10_000)
        assert abs(pendulum_energy(p, x1) - e0) / max(1.0, abs(e0)) < 1e-6

    rng = np.random.default_rng(11)
    for _ in range(100):
        x = rng.uniform(-3.0, 3.0, size=4)
        u = rng.uniform(-5.0, 5.0, size=2)
        # the analytic rate uses the same accelerations the plant integrates
        assert np.max(np.abs(vf(x, u)[2:] - pendulum_accel_reference(p, x, u))) <= 1e-10
        rate = pendulum_energy_rate(p, x, u)
        power = x[2] * (u[0] - u[1]) + x[3] * u[1]
        assert abs(rate - power) <= 1e-8

    for _ in range(50):
        x = rng.uniform(-2.0, 2.0, size=4)
        u = rng.uniform(-3.0, 3.0, size=2)
        assert np.max(np.abs(vf(-x, -u) + vf(x, u))) <= 1e-12


def test_criterion_6_grid_oracle_structure():
    """Reachable sets nest up to N=10, BFS horizons agree with the field on
    every grid point, ideal trajectories decrement the horizon exactly on at
    least 95% of sampled starts, and one-step value descent holds within the
    grid tolerance on every step."""
    enum_cap = {"scalar-shift": 7, "integrator-2d": 5, "scalar-unstable": 5}
    for inst in builtin_instances():
        masks = reachable_sets(inst, 10)
        for k in range(10):
            assert np.all(masks[k + 1][masks[k]]), (inst.name, k)

        fieldmap = horizon_field(inst, 10)
        for flat in range(int(np.prod(inst.shape))):
            idx = tuple(int(i) for i in np.unravel_index(flat, inst.shape))
            expect = int(fieldmap[idx]) if fieldmap[idx] >= 0 else None
            assert min_horizon(inst, inst.point(idx), 10) == expect

        idxs = np.argwhere((fieldmap >= 1) & (fieldmap <= enum_cap[inst.name]))
        starts = [tuple(int(i) for i in row) for row in idxs]
        if len(starts) > 30:
            stride = math.ceil(len(starts) / 30)
            starts = starts[::stride]
        trajs = [ideal_trajectory(inst, inst.point(s), 10) for s in starts]

        pairs = [(x, v) for t in trajs for x, v in zip(t.states, t.values)]
        h = float(np.max(inst.spacing))
        lip = 0.0
        for i in range(len(pairs)):
            for j in range(i + 1, len(pairs)):
                d = float(np.linalg.norm(pairs[i][0] - pairs[j][0]))
                if 0.0 < d <= 1.5 * h:
                    lip = max(lip, abs(pairs[i][1] - pairs[j][1]) / d)
        value_tol = max(1e-9, lip * h)

        exact = 0
        for t in trajs:
            exact += all(
                t.horizons[k + 1] == t.horizons[k] - 1
                for k in range(len(t.horizons) - 1)
            )
            for k in range(len(t.horizons) - 1):
                assert t.values[k + 1] <= t.values[k] - t.stage_costs[k] + value_tol, inst.name
        assert exact / len(starts) >= 0.95, inst.name

    assert run_check(verbose=False) == 0


def test_criterion_7_window_bits_recomputable(pendulum_run):
    """Re-running the window test from each record's logged extension states
    reproduces every stored pass/fail bit."""
    cfg, tp, log, _ = pendulum_run
    assert log.records
    for rec in log.records:
        rep = check_lyapunov_window(tp, rec.x_ext, slack=cfg.lyap_slack)
        assert rep.passed == rec.window_pass
        assert np.array_equal(rep.value_ok, rec.window.value_ok)
        assert np.array_equal(rep.decrease_ok, rec.window.decrease_ok)
        assert np.array_equal(rep.values, rec.window.values)


def test_criterion_8_horizon_step_law(pendulum_run):
    """Along the chain of solve events the horizon moves by at most one and
    only shrinks immediately after a passed window; consequently each plant
    step enters with a horizon within one of the previous advancing solve."""
    _, _, log, _ = pendulum_run
    recs = log.records
    for prev, cur in zip(recs, recs[1:]):
        d = cur.N - prev.N
        assert d in (-1, 0, 1), (prev.step, prev.N, cur.N)
        if d == -1:
            assert prev.window_pass

    first_of_step = {}
    for r in recs:
        first_of_step.setdefault(r.step, r)
    adv = log.advancing()
    for a, b in zip(adv, adv[1:]):
        entry = first_of_step[b.step].N
        d = entry - a.N
        assert d in (-1, 0, 1), (a.step, a.N, entry)
        if d == -1:
            assert a.window_pass


def test_criterion_9_byte_reproducible_outputs(tmp_path, capsys):
    """Two identical default runs produce byte-identical CSV and SVG files."""
    dests = []
    for sub in ("first", "second"):
        dest = tmp_path / sub
        assert run_experiment(ExperimentConfig(), out_dir=str(dest)) == 0
        dests.append(dest)
    capsys.readouterr()
    for name in (CSV_NAME, ANGLES_SVG_NAME, HORIZON_SVG_NAME):
        assert (dests[0] / name).read_bytes() == (dests[1] / name).read_bytes(), name
