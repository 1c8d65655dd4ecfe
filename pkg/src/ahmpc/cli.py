"""Experiment driver: config files, CSV/SVG output, the ``ahmpc`` command.

Config files are flat ``key = value`` text with ``#`` comments; every
default reproduces the double-pendulum stabilization experiment, so an
empty file is a complete config.  ``ahmpc run`` simulates the closed loop
and writes ``run.csv`` (one row per solve event) plus two SVG plots drawn
directly as text — state trajectories and the horizon trace.  ``ahmpc
check`` runs the brute-force grid oracle suite.

All emitted bytes are a pure function of the config: floats are written in
shortest round-trip form and re-solve budgets are counted in solves, so two
runs of the same config produce identical files.  Wall-clock timing is
opt-in (``--timing``) precisely because it breaks that reproducibility.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import grid_oracle
from .controller import ControllerConfig, SimulationLog, simulate_closed_loop
from .dynamics import Model, PendulumParams, double_integrator, double_pendulum, scalar_system
from .errors import ConfigError
from .terminal import lqr_terminal_pair, QuadLagrangian

__all__ = [
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "build_model",
    "run_experiment",
    "write_csv",
    "read_csv",
    "write_svg_plots",
    "run_check",
    "main",
]

CSV_NAME = "run.csv"
ANGLES_SVG_NAME = "angles.svg"
HORIZON_SVG_NAME = "horizon.svg"

_MODELS = ("double_pendulum", "double_integrator", "scalar")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one run needs; the defaults are the double-pendulum
    stabilization experiment.  ``x0=None`` means the model's standard start;
    ``seed`` only matters to external instance-generation tooling and is
    accepted so configs can carry it."""

    model: str = "double_pendulum"
    dt: float = 0.1
    q_scale: float = 0.1
    r_scale: float = 0.1
    alpha_coeff: float = 0.1
    n_init: int = 5
    extension_steps: int = 5
    n_max: int = 30
    max_resolves: int = 10
    steps: int = 200
    x0: Optional[Tuple[float, ...]] = None
    u_min: Optional[Tuple[float, ...]] = None
    u_max: Optional[Tuple[float, ...]] = None
    l1: float = 1.0
    l2: float = 2.0
    m1: float = 2.0
    m2: float = 1.0
    gravity: float = 9.81
    lyap_slack: float = 0.0
    ocp_tol: float = 1e-8
    ocp_max_iter: int = 500
    seed: int = 0
    out_dir: Optional[str] = None


_INT_KEYS = {
    "n_init": "n_init",
    "L": "extension_steps",
    "n_max": "n_max",
    "max_resolves": "max_resolves",
    "steps": "steps",
    "seed": "seed",
    "ocp_max_iter": "ocp_max_iter",
}
_FLOAT_KEYS = {
    "dt": "dt",
    "q_scale": "q_scale",
    "r_scale": "r_scale",
    "alpha_coeff": "alpha_coeff",
    "l1": "l1",
    "l2": "l2",
    "m1": "m1",
    "m2": "m2",
    "gravity": "gravity",
    "lyap_slack": "lyap_slack",
    "ocp_tol": "ocp_tol",
}
_VECTOR_KEYS = {"x0": "x0", "u_min": "u_min", "u_max": "u_max"}
_STR_KEYS = {"model": "model", "out_dir": "out_dir"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse flat ``key = value`` text; ``#`` starts a comment.

    Unknown keys, malformed values, and inconsistent dimensions raise
    :class:`ConfigError` naming the line.
    """
    values: Dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if not val:
            raise ConfigError(f"line {lineno}: empty value for key '{key}'")
        try:
            if key in _INT_KEYS:
                values[_INT_KEYS[key]] = int(val)
            elif key in _FLOAT_KEYS:
                values[_FLOAT_KEYS[key]] = float(val)
            elif key in _VECTOR_KEYS:
                values[_VECTOR_KEYS[key]] = tuple(float(p) for p in val.split(","))
            elif key in _STR_KEYS:
                values[_STR_KEYS[key]] = val
            else:
                raise ConfigError(f"line {lineno}: unknown key '{key}'")
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for '{key}': {exc}") from exc
    cfg = ExperimentConfig(**values)
    validate_config(cfg)
    return cfg


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def validate_config(cfg: ExperimentConfig) -> None:
    def need(cond: bool, msg: str) -> None:
        if not cond:
            raise ConfigError(msg)

    need(cfg.model in _MODELS, f"model must be one of {_MODELS}, got '{cfg.model}'")
    need(cfg.dt > 0, f"dt must be positive, got {cfg.dt}")
    need(cfg.q_scale >= 0, f"q_scale must be >= 0, got {cfg.q_scale}")
    need(cfg.r_scale > 0, f"r_scale must be positive, got {cfg.r_scale}")
    need(cfg.alpha_coeff > 0, f"alpha_coeff must be positive, got {cfg.alpha_coeff}")
    need(cfg.n_init >= 1, f"n_init must be >= 1, got {cfg.n_init}")
    need(cfg.extension_steps >= 1, f"L must be >= 1, got {cfg.extension_steps}")
    need(cfg.n_max >= cfg.n_init, f"n_max={cfg.n_max} < n_init={cfg.n_init}")
    need(cfg.max_resolves >= 0, f"max_resolves must be >= 0, got {cfg.max_resolves}")
    need(cfg.steps >= 1, f"steps must be >= 1, got {cfg.steps}")
    need(cfg.lyap_slack >= 0, f"lyap_slack must be >= 0, got {cfg.lyap_slack}")
    need(cfg.ocp_tol > 0, f"ocp_tol must be positive, got {cfg.ocp_tol}")
    need(cfg.ocp_max_iter >= 1, f"ocp_max_iter must be >= 1, got {cfg.ocp_max_iter}")
    for key in ("l1", "l2", "m1", "m2", "gravity"):
        need(getattr(cfg, key) > 0, f"{key} must be positive, got {getattr(cfg, key)}")
    n, m = _model_dims(cfg.model)
    if cfg.x0 is not None:
        need(len(cfg.x0) == n, f"x0 has {len(cfg.x0)} entries, model '{cfg.model}' needs {n}")
    need(
        (cfg.u_min is None) == (cfg.u_max is None),
        "u_min and u_max must be given together",
    )
    if cfg.u_min is not None and cfg.u_max is not None:
        need(
            len(cfg.u_min) in (1, m) and len(cfg.u_max) in (1, m),
            f"control bounds need 1 or {m} entries",
        )
        lo = np.resize(np.asarray(cfg.u_min, dtype=float), m)
        hi = np.resize(np.asarray(cfg.u_max, dtype=float), m)
        need(bool(np.all(lo <= hi)), "u_min must not exceed u_max")


def _model_dims(name: str) -> Tuple[int, int]:
    return {"double_pendulum": (4, 2), "double_integrator": (2, 1), "scalar": (1, 1)}[name]


def default_x0(model_name: str) -> Tuple[float, ...]:
    if model_name == "double_pendulum":
        return (math.pi / 2, -math.pi / 2, 0.0, 0.0)
    if model_name == "double_integrator":
        return (1.0, 0.0)
    return (1.0,)


def build_model(cfg: ExperimentConfig) -> Model:
    n, m = _model_dims(cfg.model)
    bounds = None
    if cfg.u_min is not None and cfg.u_max is not None:
        bounds = (
            np.resize(np.asarray(cfg.u_min, dtype=float), m),
            np.resize(np.asarray(cfg.u_max, dtype=float), m),
        )
    if cfg.model == "double_pendulum":
        params = PendulumParams(l1=cfg.l1, l2=cfg.l2, m1=cfg.m1, m2=cfg.m2, g=cfg.gravity)
        return double_pendulum(params, dt=cfg.dt, control_bounds=bounds)
    if cfg.model == "double_integrator":
        return double_integrator(dt=cfg.dt, control_bounds=bounds)
    return scalar_system(dt=cfg.dt, control_bounds=bounds)


def controller_config(cfg: ExperimentConfig) -> ControllerConfig:
    return ControllerConfig(
        N_init=cfg.n_init,
        extension_steps=cfg.extension_steps,
        N_max=cfg.n_max,
        max_resolves_per_step=cfg.max_resolves,
        lyap_slack=cfg.lyap_slack,
        ocp_tol=cfg.ocp_tol,
        ocp_max_iter=cfg.ocp_max_iter,
    )


def resolve_out_dir(cfg: ExperimentConfig, override: Optional[str] = None) -> str:
    if override:
        return override
    if cfg.out_dir:
        return cfg.out_dir
    return os.environ.get("AHMPC_OUT") or "."


def _fmt(v: float) -> str:
    """Shortest decimal that round-trips the float exactly."""
    return repr(float(v))


def write_csv(log: SimulationLog, path: str) -> None:
    """One row per solve event; see the header for the column order.

    Floats round-trip exactly; flags are 0/1.  LF line endings, UTF-8.
    """
    if not log.records:
        raise ValueError("refusing to write an empty log")
    cols = ["step", "time", "advanced"]
    cols += [f"x{i + 1}" for i in range(log.n)]
    cols += [f"u{i + 1}" for i in range(log.m)]
    cols += ["N", "resolves", "solver_iters", "converged", "Vf_xN", "window_pass", "solve_seconds"]
    lines = [",".join(cols)]
    for rec in log.records:
        parts = [str(rec.step), _fmt(rec.time), str(int(rec.advanced))]
        parts += [_fmt(v) for v in rec.x]
        parts += [_fmt(v) for v in rec.u]
        parts += [
            str(rec.N),
            str(rec.resolves),
            str(rec.solver_iters),
            str(int(rec.converged)),
            _fmt(rec.vf_terminal),
            str(int(rec.window_pass)),
            _fmt(rec.solve_seconds),
        ]
        lines.append(",".join(parts))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path: str) -> List[Dict[str, object]]:
    """Parse a file written by :func:`write_csv` back into typed rows with
    ``x`` and ``u`` re-assembled as arrays."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path} is empty")
    header = lines[0].split(",")
    x_cols = [c for c in header if c.startswith("x") and c[1:].isdigit()]
    u_cols = [c for c in header if c.startswith("u") and c[1:].isdigit()]
    rows: List[Dict[str, object]] = []
    for ln in lines[1:]:
        vals = dict(zip(header, ln.split(",")))
        rows.append(
            {
                "step": int(vals["step"]),
                "time": float(vals["time"]),
                "advanced": vals["advanced"] == "1",
                "x": np.array([float(vals[c]) for c in x_cols]),
                "u": np.array([float(vals[c]) for c in u_cols]),
                "N": int(vals["N"]),
                "resolves": int(vals["resolves"]),
                "solver_iters": int(vals["solver_iters"]),
                "converged": vals["converged"] == "1",
                "Vf_xN": float(vals["Vf_xN"]),
                "window_pass": vals["window_pass"] == "1",
                "solve_seconds": float(vals["solve_seconds"]),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# SVG plotting, emitted directly as text so the output is byte-reproducible.

_BLUE = "#1f77b4"
_RED = "#d62728"

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 58, 16, 30, 46


def _nice_ticks(lo: float, hi: float, target: int = 5) -> List[float]:
    if not (hi > lo):
        lo, hi = lo - 1.0, hi + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    step = 10.0 * mag
    for mult in (1.0, 2.0, 5.0):
        if mult * mag >= raw:
            step = mult * mag
            break
    ticks = []
    t = math.ceil(lo / step - 1e-9) * step
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _svg_plot(
    series: Sequence[Tuple[np.ndarray, np.ndarray, str, str]],
    xlabel: str,
    ylabel: str,
    title: str,
    step_mode: bool = False,
) -> str:
    xs_all = np.concatenate([s[0] for s in series])
    ys_all = np.concatenate([s[1] for s in series])
    xlo, xhi = float(np.min(xs_all)), float(np.max(xs_all))
    ylo, yhi = float(np.min(ys_all)), float(np.max(ys_all))
    if xhi <= xlo:
        xlo, xhi = xlo - 1.0, xhi + 1.0
    if yhi <= ylo:
        ylo, yhi = ylo - 1.0, yhi + 1.0
    ypad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - ypad, yhi + ypad
    pw = _W - _ML - _MR
    ph = _H - _MT - _MB

    def px(x: float) -> float:
        return _ML + (x - xlo) / (xhi - xlo) * pw

    def py(y: float) -> float:
        return _MT + (yhi - y) / (yhi - ylo) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.2f}" y="18" font-family="sans-serif" font-size="13" '
        f'text-anchor="middle">{title}</text>',
    ]
    for t in _nice_ticks(xlo, xhi):
        if t < xlo - 1e-12 or t > xhi + 1e-12:
            continue
        X = px(t)
        out.append(
            f'<line x1="{X:.2f}" y1="{_MT + ph:.2f}" x2="{X:.2f}" y2="{_MT + ph + 5:.2f}" '
            'stroke="black" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{X:.2f}" y="{_MT + ph + 18:.2f}" font-family="sans-serif" '
            f'font-size="11" text-anchor="middle">{t:g}</text>'
        )
    for t in _nice_ticks(ylo, yhi):
        if t < ylo - 1e-12 or t > yhi + 1e-12:
            continue
        Y = py(t)
        out.append(
            f'<line x1="{_ML - 5:.2f}" y1="{Y:.2f}" x2="{_ML:.2f}" y2="{Y:.2f}" '
            'stroke="black" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_ML - 8:.2f}" y="{Y + 4:.2f}" font-family="sans-serif" '
            f'font-size="11" text-anchor="end">{t:g}</text>'
        )
    out.append(
        f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" fill="none" '
        'stroke="black" stroke-width="1"/>'
    )
    out.append(
        f'<text x="{_ML + pw / 2:.2f}" y="{_H - 10}" font-family="sans-serif" '
        f'font-size="12" text-anchor="middle">{xlabel}</text>'
    )
    out.append(
        f'<text x="16" y="{_MT + ph / 2:.2f}" font-family="sans-serif" font-size="12" '
        f'text-anchor="middle" transform="rotate(-90 16 {_MT + ph / 2:.2f})">{ylabel}</text>'
    )
    for i, (sx, sy, color, label) in enumerate(series):
        pts: List[Tuple[float, float]] = []
        for j in range(len(sx)):
            if step_mode and j > 0:
                pts.append((px(float(sx[j])), py(float(sy[j - 1]))))
            pts.append((px(float(sx[j])), py(float(sy[j]))))
        if len(pts) == 1:
            out.append(
                f'<circle cx="{pts[0][0]:.2f}" cy="{pts[0][1]:.2f}" r="3" fill="{color}"/>'
            )
        else:
            attr = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
            out.append(
                f'<polyline points="{attr}" fill="none" stroke="{color}" stroke-width="1.5"/>'
            )
        if label:
            ly = _MT + 14 + 16 * i
            out.append(
                f'<line x1="{_ML + pw - 88:.2f}" y1="{ly - 4:.2f}" x2="{_ML + pw - 64:.2f}" '
                f'y2="{ly - 4:.2f}" stroke="{color}" stroke-width="2"/>'
            )
            out.append(
                f'<text x="{_ML + pw - 58:.2f}" y="{ly:.2f}" font-family="sans-serif" '
                f'font-size="11">{label}</text>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg_plots(log: SimulationLog, angles_path: str, horizon_path: str) -> None:
    """State-trajectory plot (first two components vs time) and the horizon
    trace over solve events as a step plot."""
    times = np.arange(log.states.shape[0]) * log.dt
    if log.n >= 2:
        series = [
            (times, log.states[:, 0], _BLUE, "x1"),
            (times, log.states[:, 1], _RED, "x2"),
        ]
    else:
        series = [(times, log.states[:, 0], _BLUE, "x1")]
    svg = _svg_plot(series, "time [s]", "angle [rad]", "state trajectories")
    with open(angles_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    events = np.arange(len(log.records), dtype=float)
    horizons = log.event_horizons().astype(float)
    svg = _svg_plot(
        [(events, horizons, _BLUE, "")],
        "solve event",
        "horizon N",
        "adaptive horizon",
        step_mode=True,
    )
    with open(horizon_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[str] = None, timing: bool = False) -> int:
    """Simulate the configured closed loop and write CSV + SVG outputs.

    Returns 0 on success, 2 on stabilization failure (non-finite state, or
    the run ending with the window still failing at the horizon cap).
    """
    validate_config(cfg)
    model = build_model(cfg)
    lag = QuadLagrangian.isotropic(model.n, model.m, cfg.q_scale, cfg.r_scale)
    tp = lqr_terminal_pair(model, lag, cfg.alpha_coeff)
    x0 = np.asarray(cfg.x0 if cfg.x0 is not None else default_x0(cfg.model), dtype=float)
    ccfg = controller_config(cfg)
    t0 = time.perf_counter()
    log = simulate_closed_loop(
        ccfg, model, tp, lag, x0, cfg.steps, clock=time.perf_counter if timing else None
    )
    elapsed = time.perf_counter() - t0
    dest = resolve_out_dir(cfg, out_dir)
    try:
        os.makedirs(dest, exist_ok=True)
        csv_path = os.path.join(dest, CSV_NAME)
        angles_path = os.path.join(dest, ANGLES_SVG_NAME)
        horizon_path = os.path.join(dest, HORIZON_SVG_NAME)
        write_csv(log, csv_path)
        write_svg_plots(log, angles_path, horizon_path)
    except OSError as exc:
        print(f"error: cannot write outputs under {dest}: {exc}", file=sys.stderr)
        return 1

    adv = log.advancing()
    final_x = log.states[-1]
    saturations = sum(1 for r in adv if r.saturated)
    print(f"model={cfg.model} plant_steps={len(adv)} solve_events={len(log.records)}")
    print(f"final |x|={float(np.linalg.norm(final_x)):.3e} final N={adv[-1].N if adv else cfg.n_init}")
    print(f"wall_seconds={elapsed:.2f}")
    print(f"wrote {csv_path} {angles_path} {horizon_path}")
    if log.failed:
        print(f"stabilization failure: {log.failure}", file=sys.stderr)
        return 2
    if adv and adv[-1].saturated:
        print(
            f"stabilization failure: window still failing at the horizon cap "
            f"N_max={cfg.n_max} at the end of the run",
            file=sys.stderr,
        )
        return 2
    if saturations:
        print(f"note: {saturations} transient horizon-cap saturation(s)")
    return 0


# ---------------------------------------------------------------------------
# `ahmpc check`: the brute-force grid oracle suite.

_ENUM_CAP = {"scalar-shift": 7, "integrator-2d": 5, "scalar-unstable": 5}
_BFS_CAP = 10
_MAX_TRAJECTORIES = 30


def _sample_starts(
    inst: grid_oracle.GridInstance, fieldmap: np.ndarray, cap: int
) -> List[Tuple[int, ...]]:
    idxs = np.argwhere((fieldmap >= 1) & (fieldmap <= cap))
    starts = [tuple(int(i) for i in row) for row in idxs]
    if len(starts) > _MAX_TRAJECTORIES:
        stride = math.ceil(len(starts) / _MAX_TRAJECTORIES)
        starts = starts[::stride]
    return starts


def run_check(verbose: bool = True) -> int:
    """Validate horizon-decrement and value-descent structure on the
    built-in grid instances; returns 0 when every check passes."""

    def say(msg: str) -> None:
        if verbose:
            print(msg)

    ok = True
    for inst in grid_oracle.builtin_instances():
        masks = grid_oracle.reachable_sets(inst, _BFS_CAP)
        nested = all(
            bool(np.all(masks[k + 1][masks[k]])) for k in range(_BFS_CAP)
        )
        ok &= nested
        say(f"[{inst.name}] nesting X_N within X_N+1 for N<=10: {'PASS' if nested else 'FAIL'}")

        fieldmap = grid_oracle.horizon_field(inst, _BFS_CAP)
        agree = 0
        total = int(np.prod(inst.shape))
        for flat in range(total):
            idx = tuple(int(i) for i in np.unravel_index(flat, inst.shape))
            mh = grid_oracle.min_horizon(inst, inst.point(idx), _BFS_CAP)
            from_field = int(fieldmap[idx]) if fieldmap[idx] >= 0 else None
            agree += mh == from_field
        ok &= agree == total
        say(
            f"[{inst.name}] min_horizon matches reachable sets on {agree}/{total} "
            f"grid points: {'PASS' if agree == total else 'FAIL'}"
        )

        cap = _ENUM_CAP[inst.name]
        starts = _sample_starts(inst, fieldmap, cap)
        decrement_ok = 0
        flagged = 0
        descent_viol = 0
        descent_steps = 0
        pairs: List[Tuple[np.ndarray, float]] = []
        trajs = []
        for start in starts:
            traj = grid_oracle.ideal_trajectory(inst, inst.point(start), _BFS_CAP)
            trajs.append(traj)
            for x, v in zip(traj.states, traj.values):
                pairs.append((x, v))
        # Descent tolerance: value-Lipschitz estimate times grid spacing,
        # floored at float noise (snapped-consistent instances are exact).
        lip = 0.0
        h = float(np.max(inst.spacing))
        for i in range(len(pairs)):
            for j in range(i + 1, len(pairs)):
                d = float(np.linalg.norm(pairs[i][0] - pairs[j][0]))
                if 0.0 < d <= 1.5 * h:
                    lip = max(lip, abs(pairs[i][1] - pairs[j][1]) / d)
        value_tol = max(1e-9, lip * h)
        for traj in trajs:
            dec = all(
                traj.horizons[k + 1] == traj.horizons[k] - 1
                for k in range(len(traj.horizons) - 1)
            )
            decrement_ok += dec
            flagged += not dec
            for k in range(len(traj.horizons) - 1):
                descent_steps += 1
                lhs = traj.values[k + 1]
                rhs = traj.values[k] - traj.stage_costs[k]
                if lhs > rhs + value_tol:
                    descent_viol += 1
        frac = decrement_ok / len(starts) if starts else 1.0
        dec_pass = frac >= 0.95
        ok &= dec_pass
        say(
            f"[{inst.name}] horizon decrements along {decrement_ok}/{len(starts)} ideal "
            f"trajectories ({flagged} flagged): {'PASS' if dec_pass else 'FAIL'}"
        )
        desc_pass = descent_viol == 0
        ok &= desc_pass
        say(
            f"[{inst.name}] value descent within {value_tol:.1e} on {descent_steps} steps "
            f"({descent_viol} violations): {'PASS' if desc_pass else 'FAIL'}"
        )
    say("all checks passed" if ok else "CHECK FAILURES PRESENT")
    return 0 if ok else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ahmpc", description="adaptive-horizon MPC experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="simulate a configured closed loop")
    p_run.add_argument("--config", help="path to a key=value config file")
    p_run.add_argument("--out-dir", help="output directory (else config, $AHMPC_OUT, '.')")
    p_run.add_argument("--steps", type=int, help="override the number of plant steps")
    p_run.add_argument(
        "--timing",
        action="store_true",
        help="record wall-clock per solve (breaks byte-reproducibility of the CSV)",
    )
    sub.add_parser("check", help="run the brute-force grid oracle suite")
    args = parser.parse_args(argv)

    if args.command == "check":
        return run_check()
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.steps is not None:
            if args.steps < 1:
                raise ConfigError(f"--steps must be >= 1, got {args.steps}")
            cfg = replace(cfg, steps=args.steps)
        return run_experiment(cfg, out_dir=args.out_dir, timing=args.timing)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
