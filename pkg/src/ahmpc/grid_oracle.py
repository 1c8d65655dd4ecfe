"""Desk-scale brute-force oracle for the horizon theory.

Everything here lives on a small box grid (1-D or 2-D state) with a finite
control set, where the minimum stabilizing horizon and the exact optimal
trajectories can be computed by breadth-first search and exhaustive
enumeration.  The point is to validate, with no optimizer in the loop, the
two structural facts the adaptive controller relies on: along an exact
optimal trajectory the minimum horizon decrements by one per step, and the
optimal value decreases by at least the stage cost.

States are snapped to the grid after every transition, so the computed maps
are exact for instances whose dynamics send grid points to grid points and
accurate to a value-Lipschitz-times-spacing tolerance otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, List, Optional, Tuple

import numpy as np

__all__ = [
    "GridInstance",
    "IdealTrajectory",
    "min_horizon",
    "reachable_sets",
    "horizon_field",
    "ideal_trajectory",
    "scalar_instance",
    "integrator_2d_instance",
    "scalar_unstable_instance",
    "builtin_instances",
]

ENUMERATION_LIMIT = 10**7


@dataclass(frozen=True)
class GridInstance:
    """A finite problem: grid over a state box, control set, terminal
    sublevel set ``{x' P x / 2 <= terminal_level}``, quadratic stage cost."""

    name: str
    step: Callable[[np.ndarray, np.ndarray], np.ndarray]
    controls: np.ndarray  # (n_controls, m)
    P: np.ndarray
    terminal_level: float
    lo: np.ndarray
    hi: np.ndarray
    shape: Tuple[int, ...]
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        for key in ("controls", "P", "lo", "hi", "Q", "R"):
            object.__setattr__(self, key, np.asarray(getattr(self, key), dtype=float))
        object.__setattr__(self, "controls", np.atleast_2d(self.controls))
        if len(self.shape) != self.lo.shape[0]:
            raise ValueError("shape and box dimension disagree")
        if any(s < 2 for s in self.shape):
            raise ValueError("need at least 2 grid points per axis")

    @cached_property
    def axes(self) -> Tuple[np.ndarray, ...]:
        return tuple(
            np.linspace(self.lo[d], self.hi[d], self.shape[d]) for d in range(len(self.shape))
        )

    @cached_property
    def spacing(self) -> np.ndarray:
        return (self.hi - self.lo) / (np.array(self.shape) - 1)

    def point(self, idx: Tuple[int, ...]) -> np.ndarray:
        return np.array([self.axes[d][idx[d]] for d in range(len(self.shape))])

    def snap(self, x: np.ndarray) -> Optional[Tuple[int, ...]]:
        """Nearest grid index, or None when ``x`` leaves the box."""
        idx = np.rint((np.asarray(x, dtype=float) - self.lo) / self.spacing).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.array(self.shape)):
            return None
        return tuple(int(i) for i in idx)

    def terminal_value(self, x: np.ndarray) -> float:
        return 0.5 * float(x @ self.P @ x)

    def in_terminal(self, x: np.ndarray) -> bool:
        return self.terminal_value(x) <= self.terminal_level

    def stage_cost(self, x: np.ndarray, u: np.ndarray) -> float:
        return 0.5 * (float(x @ self.Q @ x) + float(u @ self.R @ u))


def min_horizon(inst: GridInstance, x: np.ndarray, cap: int) -> Optional[int]:
    """Smallest number of steps that reaches the terminal set from ``x``,
    by BFS over snapped successors; None if unreachable within ``cap``."""
    start = inst.snap(x)
    if start is None:
        raise ValueError(f"state {x} outside the grid box")
    if inst.in_terminal(inst.point(start)):
        return 0
    frontier = {start}
    visited = {start}
    for depth in range(1, cap + 1):
        nxt = set()
        for idx in frontier:
            xg = inst.point(idx)
            for u in inst.controls:
                succ = inst.snap(inst.step(xg, u))
                if succ is None or succ in visited:
                    continue
                if inst.in_terminal(inst.point(succ)):
                    return depth
                visited.add(succ)
                nxt.add(succ)
        if not nxt:
            return None
        frontier = nxt
    return None


def _successor_table(inst: GridInstance) -> np.ndarray:
    """Flat successor index per (grid point, control); -1 leaves the box."""
    total = int(np.prod(inst.shape))
    nu = inst.controls.shape[0]
    table = np.full((total, nu), -1, dtype=int)
    for flat in range(total):
        idx = np.unravel_index(flat, inst.shape)
        xg = inst.point(tuple(int(i) for i in idx))
        for j, u in enumerate(inst.controls):
            succ = inst.snap(inst.step(xg, u))
            if succ is not None:
                table[flat, j] = int(np.ravel_multi_index(succ, inst.shape))
    return table


def _terminal_mask(inst: GridInstance) -> np.ndarray:
    total = int(np.prod(inst.shape))
    mask = np.zeros(total, dtype=bool)
    for flat in range(total):
        idx = np.unravel_index(flat, inst.shape)
        mask[flat] = inst.in_terminal(inst.point(tuple(int(i) for i in idx)))
    return mask


def reachable_sets(inst: GridInstance, cap: int) -> List[np.ndarray]:
    """Masks X_0..X_cap where X_0 is the terminal set on the grid and
    X_{N+1} is its one-step controllable preimage."""
    table = _successor_table(inst)
    valid = table >= 0
    safe = np.where(valid, table, 0)
    masks = [_terminal_mask(inst).reshape(inst.shape)]
    for _ in range(cap):
        prev = masks[-1].ravel()
        hit = np.where(valid, prev[safe], False)
        masks.append(np.any(hit, axis=1).reshape(inst.shape))
    return masks


def horizon_field(inst: GridInstance, cap: int) -> np.ndarray:
    """Minimum horizon per grid point (-1 where unreachable within cap)."""
    masks = reachable_sets(inst, cap)
    field = np.full(inst.shape, -1, dtype=int)
    for N in range(cap, -1, -1):
        field[masks[N]] = N
    return field


@dataclass(frozen=True)
class IdealTrajectory:
    """Exact closed loop of the enumerated controller.  Entry k records the
    state, its minimum horizon, the optimal value, the applied control and
    its stage cost; the final entry sits in the terminal set with the
    terminal value and no control."""

    states: List[np.ndarray]
    horizons: List[int]
    values: List[float]
    controls: List[Optional[np.ndarray]]
    stage_costs: List[Optional[float]]


def _enumerate_best(
    inst: GridInstance, start: Tuple[int, ...], N: int, limit: int
) -> Tuple[float, np.ndarray]:
    """Exhaustive minimum over control sequences of length N with the
    snapped rollout constrained to the box and ending in the terminal set."""
    nu = inst.controls.shape[0]
    if nu ** N > limit:
        raise ValueError(f"enumeration size {nu}**{N} exceeds limit {limit}")
    best_cost = np.inf
    best_first: Optional[np.ndarray] = None

    def recurse(idx: Tuple[int, ...], depth: int, acc: float, first: Optional[np.ndarray]):
        nonlocal best_cost, best_first
        if acc >= best_cost:
            return
        xg = inst.point(idx)
        if depth == N:
            if inst.in_terminal(xg):
                total = acc + inst.terminal_value(xg)
                if total < best_cost:
                    best_cost = total
                    best_first = first
            return
        for u in inst.controls:
            succ = inst.snap(inst.step(xg, u))
            if succ is None:
                continue
            recurse(succ, depth + 1, acc + inst.stage_cost(xg, u), u if first is None else first)

    recurse(start, 0, 0.0, None)
    if best_first is None:
        raise ValueError(f"no feasible length-{N} sequence from grid point {start}")
    return best_cost, best_first


def ideal_trajectory(
    inst: GridInstance,
    x0: np.ndarray,
    cap: int,
    limit: int = ENUMERATION_LIMIT,
) -> IdealTrajectory:
    """Run the exact enumerated controller from ``x0`` until the terminal
    set is reached (or ``cap`` extra steps elapse on inexact instances)."""
    idx = inst.snap(x0)
    if idx is None:
        raise ValueError(f"state {x0} outside the grid box")
    states: List[np.ndarray] = []
    horizons: List[int] = []
    values: List[float] = []
    controls: List[Optional[np.ndarray]] = []
    stage_costs: List[Optional[float]] = []
    first_N = min_horizon(inst, inst.point(idx), cap)
    if first_N is None:
        raise ValueError(f"terminal set unreachable from {x0} within {cap} steps")
    for _ in range(first_N + cap + 1):
        xg = inst.point(idx)
        N = min_horizon(inst, xg, cap)
        if N is None:
            raise ValueError(f"terminal set became unreachable at {xg}")
        states.append(xg)
        horizons.append(N)
        if N == 0:
            values.append(inst.terminal_value(xg))
            controls.append(None)
            stage_costs.append(None)
            break
        cost, u0 = _enumerate_best(inst, idx, N, limit)
        values.append(cost)
        controls.append(u0)
        stage_costs.append(inst.stage_cost(xg, u0))
        idx = inst.snap(inst.step(xg, u0))
        if idx is None:
            raise ValueError("optimal step left the box; inconsistent instance")
    else:
        raise ValueError("trajectory failed to reach the terminal set")
    return IdealTrajectory(states, horizons, values, controls, stage_costs)


def scalar_instance() -> GridInstance:
    """1-D shift ``x+ = x + u``, u in {-1, 0, 1}: transitions land exactly
    on the 0.1-spaced grid, so BFS and enumeration are exact."""
    return GridInstance(
        name="scalar-shift",
        step=lambda x, u: x + u,
        controls=np.array([[-1.0], [0.0], [1.0]]),
        P=np.array([[2.0]]),
        terminal_level=0.25,
        lo=np.array([-3.0]),
        hi=np.array([3.0]),
        shape=(61,),
        Q=np.array([[1.0]]),
        R=np.array([[1.0]]),
    )


def integrator_2d_instance() -> GridInstance:
    """Discrete double integrator ``x+ = (x1 + x2, x2 + u)`` on a
    0.25-spaced grid with controls in 0.25 multiples: grid-exact."""

    def step(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.array([x[0] + x[1], x[1] + u[0]])

    return GridInstance(
        name="integrator-2d",
        step=step,
        controls=np.array([[-0.5], [-0.25], [0.0], [0.25], [0.5]]),
        P=2.0 * np.eye(2),
        terminal_level=0.0625,  # ball of radius 0.25
        lo=np.array([-2.0, -1.0]),
        hi=np.array([2.0, 1.0]),
        shape=(17, 9),
        Q=np.eye(2),
        R=np.array([[1.0]]),
    )


def scalar_unstable_instance() -> GridInstance:
    """1-D unstable system ``x+ = x + 0.3 sin x + u`` whose transitions do
    *not* land on the grid: exercises genuine snapping, so horizon and
    descent checks hold only up to a grid tolerance."""

    def step(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.array([x[0] + 0.3 * np.sin(x[0]) + u[0]])

    return GridInstance(
        name="scalar-unstable",
        step=step,
        controls=np.array([[-0.4], [-0.2], [0.0], [0.2], [0.4]]),
        P=np.array([[2.0]]),
        terminal_level=0.01,  # |x| <= 0.1
        lo=np.array([-2.0]),
        hi=np.array([2.0]),
        shape=(81,),
        Q=np.array([[1.0]]),
        R=np.array([[1.0]]),
    )


def builtin_instances() -> List[GridInstance]:
    return [scalar_instance(), integrator_2d_instance(), scalar_unstable_instance()]
