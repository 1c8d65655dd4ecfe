"""Finite-horizon optimal control by iLQR.

Minimizes ``sum_k l(x(k), u(k)) + V(x(N))`` over control sequences subject
to ``x(k+1) = step_euler(x(k), u(k))`` and an optional control box, via
iterated LQR: linearize along the current rollout, do a Riccati backward
pass with Levenberg regularization on the control Hessian, then a forward
pass with backtracking line search that accepts any cost decrease.  Control
bounds are enforced by clamping inside the forward pass.

The exact first-order optimality measure is the adjoint gradient of the
cost with respect to the controls (:func:`cost_gradient`); the solver stops
when its max-norm falls below tolerance or progress stalls, and returns the
best iterate either way.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .dynamics import Model, clamp_control, step_euler
from .errors import NumericOverflowError
from .terminal import QuadLagrangian, TerminalPair, terminal_feedback

__all__ = [
    "OcpProblem",
    "OcpSolution",
    "rollout",
    "total_cost",
    "cost_gradient",
    "solve_ocp",
    "shift_warm_start",
]

# Levenberg schedule: start small, x10 on a rejected step, /10 on an
# accepted one, give up above the cap.
_MU_INIT = 1e-6
_MU_MAX = 1e8
_MU_MIN = 1e-12
_ALPHAS = tuple(0.5 ** i for i in range(11))  # 1, 1/2, ..., 1/1024


@dataclass(frozen=True)
class OcpProblem:
    """Initial state, horizon, and the cost ingredients of one solve."""

    model: Model
    lagrangian: QuadLagrangian
    terminal: TerminalPair
    x0: np.ndarray
    N: int

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        object.__setattr__(self, "x0", x0)
        if self.N < 1:
            raise ValueError(f"horizon must be >= 1, got {self.N}")
        if x0.shape != (self.model.n,):
            raise ValueError(f"x0 shape {x0.shape} != ({self.model.n},)")
        if not np.all(np.isfinite(x0)):
            raise NumericOverflowError("non-finite entry in x0")


@dataclass
class OcpSolution:
    """Solver output; ``x_seq`` is the exact rollout of ``u_seq`` and
    ``cost`` equals ``total_cost(u_seq)``.  ``cost_trace`` records the cost
    of every accepted iterate (non-increasing by construction)."""

    u_seq: np.ndarray
    x_seq: np.ndarray
    cost: float
    grad_norm: float
    iters: int
    converged: bool
    cost_trace: List[float] = field(default_factory=list)


def rollout(model: Model, x0: np.ndarray, u_seq: np.ndarray) -> np.ndarray:
    """Roll the Euler map along ``u_seq``; returns states of shape (N+1, n)."""
    u_seq = np.atleast_2d(np.asarray(u_seq, dtype=float))
    N = u_seq.shape[0]
    xs = np.empty((N + 1, model.n))
    xs[0] = np.asarray(x0, dtype=float)
    for k in range(N):
        xs[k + 1] = step_euler(model, xs[k], u_seq[k])
    return xs


def total_cost(problem: OcpProblem, u_seq: np.ndarray) -> float:
    """Stage costs along the rollout of ``u_seq`` plus the terminal value."""
    u_seq = np.atleast_2d(np.asarray(u_seq, dtype=float))
    xs = rollout(problem.model, problem.x0, u_seq)
    return _cost_along(problem, xs, u_seq)


def _cost_along(problem: OcpProblem, xs: np.ndarray, us: np.ndarray) -> float:
    lag = problem.lagrangian
    c = 0.0
    for k in range(us.shape[0]):
        c += lag.stage_cost(xs[k], us[k])
    xN = xs[-1]
    return c + 0.5 * float(xN @ problem.terminal.P @ xN)


def _linearize_traj(problem: OcpProblem, xs: np.ndarray, us: np.ndarray):
    from .dynamics import linearize

    As = []
    Bs = []
    for k in range(us.shape[0]):
        lin = linearize(problem.model, xs[k], us[k])
        As.append(lin.A)
        Bs.append(lin.B)
    return As, Bs


def _adjoint_gradient(problem: OcpProblem, xs, us, As, Bs) -> np.ndarray:
    lag = problem.lagrangian
    N = us.shape[0]
    grad = np.empty_like(us)
    lam = problem.terminal.P @ xs[N]
    for k in range(N - 1, -1, -1):
        grad[k] = lag.grad_u(us[k]) + Bs[k].T @ lam
        lam = lag.grad_x(xs[k]) + As[k].T @ lam
    return grad

def cost_gradient(problem: OcpProblem, u_seq: np.ndarray) -> np.ndarray:
    """Gradient of :func:`total_cost` w.r.t. the controls, by one backward
    adjoint sweep along the rollout (costate seeded with ``P x(N)``)."""
    us = np.atleast_2d(np.asarray(u_seq, dtype=float))
    xs = rollout(problem.model, problem.x0, us)
    As, Bs = _linearize_traj(problem, xs, us)
    return _adjoint_gradient(problem, xs, us, As, Bs)


def _try_rollout(problem: OcpProblem, xs_ref, us_ref, kff, Kfb, alpha):
    """Forward pass candidate: gains applied around the reference, clamped.

    Returns (xs, us, cost) or None when the candidate diverges.
    """
    model = problem.model
    N = us_ref.shape[0]
    xs = np.empty_like(xs_ref)
    us = np.empty_like(us_ref)
    xs[0] = xs_ref[0]
    with np.errstate(all="ignore"):
        for k in range(N):
            if not np.all(np.isfinite(xs[k])):
                return None
            u = us_ref[k] + alpha * kff[k] + Kfb[k] @ (xs[k] - xs_ref[k])
            u = clamp_control(model, u)
            us[k] = u
            xs[k + 1] = xs[k] + model.dt * model.vector_field(xs[k], u)
        if not np.all(np.isfinite(xs[N])):
            return None
        cost = _cost_along(problem, xs, us)
    if not np.isfinite(cost):
        return None
    return xs, us, cost


def _backward_pass(problem: OcpProblem, xs, us, As, Bs, mu):
    """Riccati sweep with ``mu``-regularized control Hessian.

    Returns (kff, Kfb) or None if a regularized Hessian fails its Cholesky
    factorization (caller escalates mu).
    """
    lag = problem.lagrangian
    N = us.shape[0]
    m = us.shape[1]
    Vx = problem.terminal.P @ xs[N]
    Vxx = problem.terminal.P.copy()
    kff = np.empty((N, m))
    Kfb = np.empty((N, m, xs.shape[1]))
    for k in range(N - 1, -1, -1):
        A, B = As[k], Bs[k]
        Qx = lag.grad_x(xs[k]) + A.T @ Vx
        Qu = lag.grad_u(us[k]) + B.T @ Vx
        Qxx = lag.Q + A.T @ Vxx @ A
        Quu = lag.R + B.T @ Vxx @ B
        Qux = B.T @ Vxx @ A
        Quu_reg = Quu + mu * np.eye(m)
        try:
            np.linalg.cholesky(Quu_reg)
        except np.linalg.LinAlgError:
            return None
        kff[k] = -np.linalg.solve(Quu_reg, Qu)
        Kfb[k] = -np.linalg.solve(Quu_reg, Qux)
        Vx = Qx + Kfb[k].T @ Quu @ kff[k] + Kfb[k].T @ Qu + Qux.T @ kff[k]
        Vxx = Qxx + Kfb[k].T @ Quu @ Kfb[k] + Kfb[k].T @ Qux + Qux.T @ Kfb[k]
        Vxx = 0.5 * (Vxx + Vxx.T)
    return kff, Kfb


def solve_ocp(
    problem: OcpProblem,
    u_init: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> OcpSolution:
    """Solve the horizon-N problem from the warm start ``u_init``.

    Converged means the adjoint gradient max-norm fell below ``tol`` or the
    relative cost decrease of an accepted step dropped under 1e-12; on
    iteration exhaustion the best iterate is returned with
    ``converged=False``.  The accepted-cost sequence never increases.
    """
    us = np.atleast_2d(np.asarray(u_init, dtype=float)).copy()
    if us.shape != (problem.N, problem.model.m):
        raise ValueError(f"warm start shape {us.shape} != ({problem.N}, {problem.model.m})")
    if not np.all(np.isfinite(us)):
        raise NumericOverflowError("non-finite entry in warm start")
    us = np.array([clamp_control(problem.model, u) for u in us])
    xs = rollout(problem.model, problem.x0, us)
    cost = _cost_along(problem, xs, us)
    trace = [cost]

    mu = _MU_INIT
    iters = 0
    converged = False
    grad_norm = np.inf
    grad_fresh = False
    for it in range(max_iter):
        iters = it
        As, Bs = _linearize_traj(problem, xs, us)
        grad = _adjoint_gradient(problem, xs, us, As, Bs)
        grad_norm = float(np.max(np.abs(grad)))
        grad_fresh = True
        if grad_norm <= tol:
            converged = True
            break

        gains = _backward_pass(problem, xs, us, As, Bs, mu)
        while gains is None:
            mu *= 10.0
            if mu > _MU_MAX:
                break
            gains = _backward_pass(problem, xs, us, As, Bs, mu)
        if gains is None:
            break  # cannot regularize further; return best iterate
        kff, Kfb = gains

        accepted = None
        for alpha in _ALPHAS:
            cand = _try_rollout(problem, xs, us, kff, Kfb, alpha)
            if cand is not None and cand[2] < cost:
                accepted = cand
                break
        if accepted is None:
            mu *= 10.0
            if mu > _MU_MAX:
                # No step in the bracket decreases the cost even at maximum
                # regularization: the achieved decrease is exactly zero,
                # which meets the relative-stall criterion.
                converged = True
                break
            continue

        new_xs, new_us, new_cost = accepted
        decrease = cost - new_cost
        xs, us, cost = new_xs, new_us, new_cost
        trace.append(cost)
        grad_fresh = False
        mu = max(mu / 10.0, _MU_MIN)
        if decrease < 1e-12 * max(1.0, abs(cost)):
            converged = True
            break

    xs = rollout(problem.model, problem.x0, us)
    cost = _cost_along(problem, xs, us)
    if not grad_fresh:
        grad_norm = float(np.max(np.abs(cost_gradient(problem, us))))
    return OcpSolution(
        u_seq=us,
        x_seq=xs,
        cost=cost,
        grad_norm=grad_norm,
        iters=iters,
        converged=converged,
        cost_trace=trace,
    )


def shift_warm_start(
    u_seq: np.ndarray,
    new_N: int,
    tp: TerminalPair,
    x_end: np.ndarray,
    model: Model,
) -> np.ndarray:
    """Adapt a control sequence to a new horizon length.

    Shrinking drops controls from the front (the receding-horizon shift);
    growing appends terminal-feedback controls along a rollout from
    ``x_end``, the state the sequence ends at.  ``u_seq`` may be empty.
    """
    if new_N < 1:
        raise ValueError(f"new horizon must be >= 1, got {new_N}")
    us = np.asarray(u_seq, dtype=float).reshape(-1, model.m)
    cur = us.shape[0]
    if cur >= new_N:
        return us[cur - new_N :].copy()
    pad = np.empty((new_N - cur, model.m))
    x = np.asarray(x_end, dtype=float)
    for j in range(new_N - cur):
        u = terminal_feedback(tp, x)
        pad[j] = u
        x = step_euler(model, x, u)
    return np.vstack([us, pad])
