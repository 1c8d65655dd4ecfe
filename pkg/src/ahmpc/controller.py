"""Adaptive-horizon MPC: the closed loop that adjusts N online.

Each plant step solves a horizon-N problem, extends the predicted endpoint
by L steps of terminal feedback, and tests a Lyapunov window along the
extension: the terminal value must dominate the comparison bound (L1) and
decrease by at least that bound per step (L2).  On a pass the first control
is applied and the horizon shrinks by one; on a failure the horizon grows
and the problem is re-solved *without* advancing the plant, until a
per-step re-solve budget or the horizon cap is hit, at which point the last
computed control is applied anyway and the next step starts longer.  Once
the horizon reaches zero the loop runs on terminal feedback alone, still
monitoring the window and re-entering optimization at N=1 if it fails.

Every solve — advancing or not — is logged as one record, which is what the
CSV/plot layer consumes.  The re-solve budget is counted in solves rather
than seconds so runs are exactly reproducible; wall-clock is only recorded
when a clock is injected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .dynamics import Model, step_euler
from .errors import NumericOverflowError
from .ocp import OcpProblem, shift_warm_start, solve_ocp
from .terminal import (
    QuadLagrangian,
    TerminalPair,
    alpha_bound,
    terminal_cost,
    terminal_feedback,
)

__all__ = [
    "ControllerConfig",
    "ControllerState",
    "LyapunovWindowReport",
    "StepRecord",
    "SimulationLog",
    "extend_with_terminal_feedback",
    "check_lyapunov_window",
    "controller_step",
    "simulate_closed_loop",
]


@dataclass(frozen=True)
class ControllerConfig:
    """Horizon policy knobs and OCP solver settings."""

    N_init: int = 5
    extension_steps: int = 5
    N_max: int = 30
    max_resolves_per_step: int = 10
    lyap_slack: float = 0.0
    ocp_tol: float = 1e-8
    ocp_max_iter: int = 500

    def __post_init__(self):
        if self.N_init < 1:
            raise ValueError(f"N_init must be >= 1, got {self.N_init}")
        if self.extension_steps < 1:
            raise ValueError(f"extension_steps must be >= 1, got {self.extension_steps}")
        if self.N_max < self.N_init:
            raise ValueError(f"N_max={self.N_max} < N_init={self.N_init}")
        if self.max_resolves_per_step < 0:
            raise ValueError("max_resolves_per_step must be >= 0")
        if self.lyap_slack < 0.0:
            raise ValueError("lyap_slack must be >= 0")


@dataclass(frozen=True)
class ControllerState:
    """Carry-over between plant steps: current horizon, warm start (length
    ``max(N, 1)``), and the plant step index."""

    N: int
    warm: np.ndarray
    step_index: int = 0


@dataclass(frozen=True)
class LyapunovWindowReport:
    """Per-step window data: terminal values along the extension, the
    comparison bound, the one-step decreases, and the two test verdicts."""

    values: np.ndarray       # V along the extension, length L+1
    bounds: np.ndarray       # alpha(|x(k)|) for the L window entries
    decreases: np.ndarray    # V(x(k)) - V(x(k+1)), length L
    value_ok: np.ndarray     # L1 per entry
    decrease_ok: np.ndarray  # L2 per entry
    passed: bool


@dataclass(frozen=True)
class StepRecord:
    """One solve event.  ``advanced`` is False for re-solves that grew the
    horizon without moving the plant; then ``u`` is the candidate control
    that was *not* applied."""

    step: int
    time: float
    advanced: bool
    x: np.ndarray
    u: np.ndarray
    N: int
    resolves: int
    solver_iters: int
    converged: bool
    cost: float
    vf_terminal: float
    window_pass: bool
    solve_seconds: float
    x_ext: np.ndarray = field(repr=False)
    window: LyapunovWindowReport = field(repr=False)
    saturated: bool = False


@dataclass
class SimulationLog:
    """Closed-loop audit trail: every solve event plus the plant trajectory."""

    records: List[StepRecord]
    states: np.ndarray
    n: int
    m: int
    dt: float
    config: ControllerConfig
    failed: bool = False
    failure: Optional[str] = None

    def advancing(self) -> List[StepRecord]:
        return [r for r in self.records if r.advanced]

    def event_horizons(self) -> np.ndarray:
        return np.array([r.N for r in self.records], dtype=int)


def extend_with_terminal_feedback(
    model: Model, tp: TerminalPair, x_start: np.ndarray, steps: int
) -> np.ndarray:
    """Roll terminal feedback for ``steps`` steps from ``x_start``.

    Returns states of shape (steps+1, n).  Divergence is data, not an
    exception: once an entry goes non-finite the remaining rows are NaN and
    the window check downstream fails.
    """
    x_start = np.asarray(x_start, dtype=float)
    out = np.empty((steps + 1, x_start.shape[0]))
    out[0] = x_start
    for k in range(steps):
        xk = out[k]
        if not np.all(np.isfinite(xk)):
            out[k + 1 :] = np.nan
            break
        u = terminal_feedback(tp, xk)
        with np.errstate(all="ignore"):
            out[k + 1] = xk + model.dt * model.vector_field(xk, u)
    return out


def check_lyapunov_window(
    tp: TerminalPair, x_ext: np.ndarray, slack: float = 0.0
) -> LyapunovWindowReport:
    """Evaluate (L1) value-dominates-bound and (L2) value-decreases-by-bound
    along an extension; both are non-strict and allow ``slack``.

    Non-finite states or values fail the window (they mean the terminal
    value is not defined there).
    """
    x_ext = np.asarray(x_ext, dtype=float)
    L = x_ext.shape[0] - 1
    values = np.empty(L + 1)
    for k in range(L + 1):
        xk = x_ext[k]
        if np.all(np.isfinite(xk)):
            with np.errstate(all="ignore"):
                values[k] = terminal_cost(tp, xk)
        else:
            values[k] = np.nan
    bounds = np.empty(L)
    for k in range(L):
        xk = x_ext[k]
        with np.errstate(all="ignore"):
            bounds[k] = alpha_bound(tp, xk) if np.all(np.isfinite(xk)) else np.nan
    decreases = values[:-1] - values[1:]
    with np.errstate(invalid="ignore"):
        value_ok = values[:-1] >= bounds - slack
        decrease_ok = decreases >= bounds - slack
    finite = bool(np.all(np.isfinite(values))) and bool(np.all(np.isfinite(bounds)))
    passed = finite and bool(np.all(value_ok)) and bool(np.all(decrease_ok))
    return LyapunovWindowReport(
        values=values,
        bounds=bounds,
        decreases=decreases,
        value_ok=value_ok,
        decrease_ok=decrease_ok,
        passed=passed,
    )


def _shift_after_advance(
    model: Model, tp: TerminalPair, sol_u: np.ndarray, x_end: np.ndarray, next_N: int
) -> np.ndarray:
    """Receding-horizon shift: drop the applied control, then fit to the
    next horizon (length at least 1 so re-entry from N=0 has a seed)."""
    tail = sol_u[1:]
    return shift_warm_start(tail, max(next_N, 1), tp, x_end, model)


def controller_step(
    cfg: ControllerConfig,
    model: Model,
    tp: TerminalPair,
    lagrangian: QuadLagrangian,
    state: ControllerState,
    x: np.ndarray,
    clock: Optional[Callable[[], float]] = None,
):
    """One plant step of the adaptive loop.

    Returns ``(u, next_state, records)`` where ``records`` lists every solve
    event this step, the last one advancing.
    """
    x = np.asarray(x, dtype=float)
    t = state.step_index * model.dt
    L = cfg.extension_steps

    if state.N == 0:
        u = terminal_feedback(tp, x)
        x_ext = extend_with_terminal_feedback(model, tp, x, L)
        rep = check_lyapunov_window(tp, x_ext, cfg.lyap_slack)
        vf_here = terminal_cost(tp, x)
        rec = StepRecord(
            step=state.step_index,
            time=t,
            advanced=True,
            x=x.copy(),
            u=u,
            N=0,
            resolves=0,
            solver_iters=0,
            converged=True,
            cost=vf_here,
            vf_terminal=vf_here,
            window_pass=rep.passed,
            solve_seconds=0.0,
            x_ext=x_ext,
            window=rep,
        )
        next_N = 0 if rep.passed else 1
        nxt = ControllerState(N=next_N, warm=np.array([u]), step_index=state.step_index + 1)
        return u, nxt, [rec]

    N = state.N
    warm = state.warm
    resolves = 0
    records: List[StepRecord] = []
    while True:
        t0 = clock() if clock is not None else None
        sol = solve_ocp(
            OcpProblem(model=model, lagrangian=lagrangian, terminal=tp, x0=x, N=N),
            warm,
            tol=cfg.ocp_tol,
            max_iter=cfg.ocp_max_iter,
        )
        secs = (clock() - t0) if clock is not None else 0.0
        x_end = sol.x_seq[-1]
        x_ext = extend_with_terminal_feedback(model, tp, x_end, L)
        rep = check_lyapunov_window(tp, x_ext, cfg.lyap_slack)
        u0 = sol.u_seq[0]
        can_grow = (not rep.passed) and resolves < cfg.max_resolves_per_step and N < cfg.N_max
        advanced = rep.passed or not can_grow
        records.append(
            StepRecord(
                step=state.step_index,
                time=t,
                advanced=advanced,
                x=x.copy(),
                u=u0,
                N=N,
                resolves=resolves,
                solver_iters=sol.iters,
                converged=sol.converged,
                cost=sol.cost,
                vf_terminal=terminal_cost(tp, x_end),
                window_pass=rep.passed,
                solve_seconds=secs,
                x_ext=x_ext,
                window=rep,
                saturated=(not rep.passed) and N >= cfg.N_max,
            )
        )
        if rep.passed:
            next_N = N - 1
            warm_next = _shift_after_advance(model, tp, sol.u_seq, x_end, next_N)
            nxt = ControllerState(N=next_N, warm=warm_next, step_index=state.step_index + 1)
            return u0, nxt, records
        if can_grow:
            N += 1
            warm = shift_warm_start(sol.u_seq, N, tp, x_end, model)
            resolves += 1
            continue
        # Budget or horizon cap hit with the window still failing: apply the
        # last computed control and come back longer next step.
        next_N = min(N + 1, cfg.N_max)
        warm_next = _shift_after_advance(model, tp, sol.u_seq, x_end, next_N)
        nxt = ControllerState(N=next_N, warm=warm_next, step_index=state.step_index + 1)
        return u0, nxt, records


def simulate_closed_loop(
    cfg: ControllerConfig,
    model: Model,
    tp: TerminalPair,
    lagrangian: QuadLagrangian,
    x0: np.ndarray,
    steps: int,
    clock: Optional[Callable[[], float]] = None,
) -> SimulationLog:
    """Run the adaptive loop for ``steps`` plant steps from ``x0``.

    A non-finite plant state or a diverged solve terminates the run early
    and is recorded on the log rather than raised.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    x = np.asarray(x0, dtype=float)
    if x.shape != (model.n,):
        raise ValueError(f"x0 shape {x.shape} != ({model.n},)")
    if not np.all(np.isfinite(x)):
        raise NumericOverflowError("non-finite entry in x0")

    state = ControllerState(N=cfg.N_init, warm=np.zeros((cfg.N_init, model.m)), step_index=0)
    records: List[StepRecord] = []
    trajectory = [x.copy()]
    failed = False
    failure = None
    for _ in range(steps):
        try:
            u, state, recs = controller_step(cfg, model, tp, lagrangian, state, x, clock=clock)
            records.extend(recs)
            x = step_euler(model, x, u)
        except NumericOverflowError as exc:
            failed = True
            failure = f"step {state.step_index}: {exc}"
            break
        trajectory.append(x.copy())
    return SimulationLog(
        records=records,
        states=np.array(trajectory),
        n=model.n,
        m=model.m,
        dt=model.dt,
        config=cfg,
        failed=failed,
        failure=failure,
    )
