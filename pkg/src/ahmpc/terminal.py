"""Quadratic stage cost and the LQR terminal pair.

The terminal ingredients used by the adaptive controller are a quadratic
value function ``V(x) = x' P x / 2`` and a linear feedback ``u = -K x``,
both obtained from the discrete algebraic Riccati equation of the model
linearized at the origin.  The Riccati solution is computed by fixed-point
iteration of the Riccati map starting from P = Q, which converges whenever
the linearization is stabilizable and the cost detectable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .dynamics import Model, linearize
from .errors import DareError

__all__ = [
    "QuadLagrangian",
    "TerminalPair",
    "riccati_step",
    "solve_dare",
    "lqr_terminal_pair",
    "terminal_cost",
    "terminal_feedback",
    "alpha_bound",
]


@dataclass(frozen=True)
class QuadLagrangian:
    """Stage cost ``l(x, u) = (x' Q x + u' R u) / 2`` with Q >= 0, R > 0."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        R = np.asarray(self.R, dtype=float)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        if not np.allclose(Q, Q.T, atol=1e-12) or not np.allclose(R, R.T, atol=1e-12):
            raise ValueError("Q and R must be symmetric")
        if np.min(np.linalg.eigvalsh(Q)) < -1e-12:
            raise ValueError("Q must be positive semidefinite")
        if np.min(np.linalg.eigvalsh(R)) <= 0.0:
            raise ValueError("R must be positive definite")

    @classmethod
    def isotropic(cls, n: int, m: int, q: float = 0.1, r: float = 0.1) -> "QuadLagrangian":
        return cls(q * np.eye(n), r * np.eye(m))

    def stage_cost(self, x: np.ndarray, u: np.ndarray) -> float:
        return 0.5 * (float(x @ self.Q @ x) + float(u @ self.R @ u))

    def grad_x(self, x: np.ndarray) -> np.ndarray:
        return self.Q @ x

    def grad_u(self, u: np.ndarray) -> np.ndarray:
        return self.R @ u


@dataclass(frozen=True)
class TerminalPair:
    """Terminal value matrix P, feedback gain K, and the coefficient of the
    quadratic comparison bound ``alpha(|x|) = alpha_coeff * |x|^2``.

    ``control_bounds`` mirrors the model's box so the terminal feedback
    respects the same saturation as the optimizer.
    """

    P: np.ndarray
    K: np.ndarray
    alpha_coeff: float
    control_bounds: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None)

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "K", np.asarray(self.K, dtype=float))
        if self.alpha_coeff <= 0.0:
            raise ValueError(f"alpha_coeff must be positive, got {self.alpha_coeff}")
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError(f"P must be square, got shape {P.shape}")
        if not np.allclose(P, P.T, atol=1e-9 * max(1.0, float(np.max(np.abs(P))))):
            raise ValueError("P must be symmetric")
        if np.min(np.linalg.eigvalsh(P)) <= 0.0:
            raise ValueError("P must be positive definite")


def riccati_step(
    A: np.ndarray, B: np.ndarray, Q: np.ndarray, R: np.ndarray, P: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """One application of the Riccati map; returns the new P and the gain at
    the *input* P.  Raises :class:`DareError` if ``R + B'PB`` is singular."""
    BtP = B.T @ P
    S = R + BtP @ B
    try:
        K = np.linalg.solve(S, BtP @ A)
    except np.linalg.LinAlgError as exc:
        raise DareError(f"singular innovation R + B'PB: {exc}") from exc
    M = BtP @ A
    Pn = Q + A.T @ P @ A - M.T @ K
    return 0.5 * (Pn + Pn.T), K


def solve_dare(
    A: np.ndarray,
    B: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 10000,
) -> Tuple[np.ndarray, np.ndarray]:
    """Solve ``P = Q + A'PA - A'PB (R + B'PB)^-1 B'PA`` by fixed-point
    iteration from P = Q.

    Returns ``(P, K)`` where the Frobenius norm of the Riccati residual at P
    is at most ``tol`` and ``K = (R + B'PB)^-1 B'PA``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    P = 0.5 * (Q + Q.T)
    resid = np.inf
    for _ in range(max_iter):
        Pn, K = riccati_step(A, B, Q, R, P)
        resid = float(np.linalg.norm(Pn - P, "fro"))
        if not np.isfinite(resid):
            raise DareError("Riccati iteration diverged to non-finite values")
        if resid <= tol:
            return P, K
        P = Pn
    raise DareError(f"no convergence after {max_iter} iterations (residual {resid:.3e})")


def lqr_terminal_pair(
    model: Model,
    lagrangian: QuadLagrangian,
    alpha_coeff: float,
    tol: float = 1e-10,
    max_iter: int = 10000,
) -> TerminalPair:
    """Build the LQR terminal pair from the model linearized at the origin.

    Verifies the closed loop ``A - BK`` is Schur stable and P is positive
    definite; failure of either indicates an unstabilizable linearization or
    a degenerate cost.
    """
    lin = linearize(model, np.zeros(model.n), np.zeros(model.m))
    P, K = solve_dare(lin.A, lin.B, lagrangian.Q, lagrangian.R, tol=tol, max_iter=max_iter)
    rho = float(np.max(np.abs(np.linalg.eigvals(lin.A - lin.B @ K))))
    if rho >= 1.0:
        raise DareError(f"closed loop is not Schur stable (spectral radius {rho:.6f})")
    if float(np.min(np.linalg.eigvalsh(P))) <= 0.0:
        raise DareError("Riccati solution is not positive definite")
    return TerminalPair(P=P, K=K, alpha_coeff=alpha_coeff, control_bounds=model.control_bounds)


def terminal_cost(tp: TerminalPair, x: np.ndarray) -> float:
    """``V(x) = x' P x / 2``."""
    return 0.5 * float(x @ tp.P @ x)


def terminal_feedback(tp: TerminalPair, x: np.ndarray) -> np.ndarray:
    """``u = -K x``, clamped to the control box when one is configured."""
    u = -(tp.K @ x)
    if tp.control_bounds is not None:
        lo, hi = tp.control_bounds
        u = np.clip(u, lo, hi)
    return u


def alpha_bound(tp: TerminalPair, x: np.ndarray) -> float:
    """Quadratic comparison bound ``alpha_coeff * |x|^2``."""
    return tp.alpha_coeff * float(x @ x)
