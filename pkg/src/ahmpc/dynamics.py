"""Controlled dynamics: Euler step map, linearization, benchmark models.

Every model is a continuous-time vector field ``dx/dt = f(x, u)`` paired
with a step size ``dt``; the discrete plant everything else in the package
operates on is the explicit Euler map ``x+ = x + dt * f(x, u)`` with the
control held constant over the step.  Models keep their operating point at
the origin, i.e. ``f(0, 0) = 0``.

Double pendulum
---------------
The stabilization benchmark is a planar double pendulum: two massless rigid
legs of lengths ``l1``, ``l2``, a point mass ``m1`` at the joint between
them and ``m2`` at the tip, a torque ``u1`` at the base pivot and ``u2`` at
the joint.  Both angles are absolute, measured counter-clockwise from
straight up, so the state is ``(q1, q2, dq1, dq2)`` and the upright rest
position is the origin.

With mass positions ``p1 = l1*(-sin q1, cos q1)`` and
``p2 = p1 + l2*(-sin q2, cos q2)`` the kinetic and potential energies are::

    T = (m1+m2) l1^2 dq1^2 / 2 + m2 l2^2 dq2^2 / 2
        + m2 l1 l2 dq1 dq2 cos(q1 - q2)
    V = (m1+m2) g l1 cos q1 + m2 g l2 cos q2

The joint torque acts on the relative angle ``q2 - q1``, so the generalized
forces conjugate to ``(q1, q2)`` are ``(u1 - u2, u2)``.  Euler-Lagrange then
gives ``M(q) qdd + c(q, dq) + gvec(q) = tau`` with::

    M11 = (m1+m2) l1^2        M12 = M21 = m2 l1 l2 cos(q1 - q2)
    M22 = m2 l2^2
    c    = m2 l1 l2 sin(q1 - q2) * (dq2^2, -dq1^2)
    gvec = (-(m1+m2) g l1 sin q1, -m2 g l2 sin q2)

``det M = m2 l1^2 l2^2 (m1 + m2 sin^2(q1-q2)) >= m1 m2 l1^2 l2^2 > 0``, so
the mass matrix is invertible everywhere and the vector field is smooth.
Useful sanity identities: total energy ``T + V`` is conserved under zero
torque, and ``d(T+V)/dt = dq1*(u1 - u2) + dq2*u2`` in general.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import NumericOverflowError

__all__ = [
    "Model",
    "LinearizedStep",
    "PendulumParams",
    "step_euler",
    "linearize",
    "clamp_control",
    "pendulum_vector_field",
    "double_pendulum",
    "double_integrator",
    "scalar_system",
]

VectorField = Callable[[np.ndarray, np.ndarray], np.ndarray]
# optional analytic Jacobian of the *continuous* field: (x, u) -> (df/dx, df/du)
JacobianFn = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class Model:
    """A continuous-time control system plus the Euler step size.

    ``control_bounds``, when present, is a ``(lo, hi)`` pair of shape-(m,)
    arrays; controls are clamped elementwise to the box.  ``jacobian`` is an
    optional analytic Jacobian of the vector field; models without one are
    linearized by central finite differences.
    """

    name: str
    n: int
    m: int
    vector_field: VectorField = field(repr=False)
    dt: float
    control_bounds: Optional[Tuple[np.ndarray, np.ndarray]] = None
    jacobian: Optional[JacobianFn] = field(default=None, repr=False)

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError(f"need n, m >= 1, got n={self.n}, m={self.m}")
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if self.control_bounds is not None:
            lo = np.broadcast_to(
                np.asarray(self.control_bounds[0], dtype=float), (self.m,)
            ).copy()
            hi = np.broadcast_to(
                np.asarray(self.control_bounds[1], dtype=float), (self.m,)
            ).copy()
            if np.any(lo > hi):
                raise ValueError(f"control bounds crossed: lo={lo}, hi={hi}")
            object.__setattr__(self, "control_bounds", (lo, hi))
        f0 = self.vector_field(np.zeros(self.n), np.zeros(self.m))
        if np.max(np.abs(f0)) > 1e-12:
            raise ValueError(f"origin is not an equilibrium: f(0,0)={f0}")


@dataclass(frozen=True)
class LinearizedStep:
    """Jacobians A = d(step)/dx, B = d(step)/du of the Euler step map."""

    A: np.ndarray
    B: np.ndarray


def clamp_control(model: Model, u: np.ndarray) -> np.ndarray:
    """Clamp ``u`` elementwise to the model's control box (no-op if unbounded)."""
    if model.control_bounds is None:
        return u
    lo, hi = model.control_bounds
    return np.clip(u, lo, hi)


def step_euler(model: Model, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """One explicit Euler step ``x + dt * f(x, u)``.

    Raises :class:`NumericOverflowError` naming the first non-finite state
    entry if the step diverges.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (model.n,):
        raise ValueError(f"state shape {x.shape} != ({model.n},)")
    if u.shape != (model.m,):
        raise ValueError(f"control shape {u.shape} != ({model.m},)")
    xn = x + model.dt * model.vector_field(x, u)
    if not np.all(np.isfinite(xn)):
        bad = int(np.flatnonzero(~np.isfinite(xn))[0])
        raise NumericOverflowError(f"non-finite state entry x[{bad}] after Euler step")
    return xn


def linearize(model: Model, x: np.ndarray, u: np.ndarray) -> LinearizedStep:
    """Linearize the Euler step map at ``(x, u)``.

    Uses the model's analytic Jacobian when available, otherwise central
    finite differences of the step map with per-coordinate step
    ``h = max(1e-6, 1e-6 * |coord|)``.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if model.jacobian is not None:
        jx, ju = model.jacobian(x, u)
        A = np.eye(model.n) + model.dt * np.asarray(jx, dtype=float)
        B = model.dt * np.asarray(ju, dtype=float)
    else:
        A = np.empty((model.n, model.n))
        B = np.empty((model.n, model.m))
        for j in range(model.n):
            h = max(1e-6, 1e-6 * abs(x[j]))
            xp = x.copy()
            xm = x.copy()
            xp[j] += h
            xm[j] -= h
            fp = xp + model.dt * model.vector_field(xp, u)
            fm = xm + model.dt * model.vector_field(xm, u)
            A[:, j] = (fp - fm) / (2.0 * h)
        for j in range(model.m):
            h = max(1e-6, 1e-6 * abs(u[j]))
            up = u.copy()
            um = u.copy()
            up[j] += h
            um[j] -= h
            fp = model.dt * model.vector_field(x, up)
            fm = model.dt * model.vector_field(x, um)
            B[:, j] = (fp - fm) / (2.0 * h)
    for name, mat in (("A", A), ("B", B)):
        if not np.all(np.isfinite(mat)):
            r, c = np.argwhere(~np.isfinite(mat))[0]
            raise NumericOverflowError(f"non-finite Jacobian entry {name}[{r},{c}]")
    return LinearizedStep(A=A, B=B)


@dataclass(frozen=True)
class PendulumParams:
    """Double-pendulum geometry: leg lengths, point masses, gravity."""

    l1: float = 1.0
    l2: float = 2.0
    m1: float = 2.0
    m2: float = 1.0
    g: float = 9.81

    def __post_init__(self):
        for key in ("l1", "l2", "m1", "m2", "g"):
            if not getattr(self, key) > 0.0:
                raise ValueError(f"{key} must be positive, got {getattr(self, key)}")


def pendulum_vector_field(p: PendulumParams, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vector field of the double pendulum (see module docstring).

    Solves the 2x2 mass matrix in closed form; scalar math keeps this cheap
    inside finite-difference loops.
    """
    q1, q2, w1, w2 = x
    s1 = math.sin(q1)
    s2 = math.sin(q2)
    sd = math.sin(q1 - q2)
    cd = math.cos(q1 - q2)
    msum = p.m1 + p.m2
    m11 = msum * p.l1 * p.l1
    m12 = p.m2 * p.l1 * p.l2 * cd
    m22 = p.m2 * p.l2 * p.l2
    det = m11 * m22 - m12 * m12  # = m2 l1^2 l2^2 (m1 + m2 sd^2) > 0
    coup = p.m2 * p.l1 * p.l2 * sd
    # tau - c - gvec, with tau = (u1 - u2, u2)
    r1 = (u[0] - u[1]) - coup * w2 * w2 + msum * p.g * p.l1 * s1
    r2 = u[1] + coup * w1 * w1 + p.m2 * p.g * p.l2 * s2
    a1 = (m22 * r1 - m12 * r2) / det
    a2 = (m11 * r2 - m12 * r1) / det
    return np.array([w1, w2, a1, a2])


def double_pendulum(
    params: PendulumParams | None = None,
    dt: float = 0.1,
    control_bounds: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Model:
    """Double pendulum, angles measured from the upright equilibrium."""
    p = params if params is not None else PendulumParams()

    def vf(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return pendulum_vector_field(p, x, u)

    return Model("double_pendulum", 4, 2, vf, dt, control_bounds)


def double_integrator(
    dt: float = 0.1,
    control_bounds: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Model:
    """Double integrator ``dx1 = x2, dx2 = u`` with analytic Jacobians."""

    def vf(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.array([x[1], u[0]])

    jx = np.array([[0.0, 1.0], [0.0, 0.0]])
    ju = np.array([[0.0], [1.0]])

    def jac(x: np.ndarray, u: np.ndarray):
        return jx, ju

    return Model("double_integrator", 2, 1, vf, dt, control_bounds, jac)


def scalar_system(
    dt: float = 1.0,
    control_bounds: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Model:
    """Scalar system ``dx = u``; with dt=1 the step map is ``x+ = x + u``."""

    def vf(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.array([u[0]])

    def jac(x: np.ndarray, u: np.ndarray):
        return np.zeros((1, 1)), np.ones((1, 1))

    return Model("scalar", 1, 1, vf, dt, control_bounds, jac)
