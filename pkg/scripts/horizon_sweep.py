#!/usr/bin/env python3
"""Sweep the decrease-requirement coefficient and report how the adaptive
horizon responds on the double-pendulum experiment.

For each alpha the table lists the plant step at which both angles first stay
below 0.01 rad, the step at which the horizon first hits zero, the number of
grow re-solves, and the largest horizon visited.  Larger alpha demands more
decrease per step, so the controller holds longer horizons for longer.
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from ahmpc.cli import (
    ExperimentConfig,
    build_model,
    controller_config,
    default_x0,
)
from ahmpc.controller import simulate_closed_loop
from ahmpc.terminal import QuadLagrangian, lqr_terminal_pair


def settle_step(states: np.ndarray, tol: float = 0.01) -> int:
    bad = np.max(np.abs(states[:, :2]), axis=1) >= tol
    idx = np.where(bad)[0]
    return int(idx[-1]) + 1 if idx.size else 0


def main() -> int:
    print(f"{'alpha':>7} {'settle':>7} {'N=0 at':>7} {'regrows':>8} {'max N':>6}")
    for alpha in (0.02, 0.05, 0.1, 0.2, 0.5):
        cfg = ExperimentConfig(alpha_coeff=alpha)
        model = build_model(cfg)
        lag = QuadLagrangian.isotropic(model.n, model.m, cfg.q_scale, cfg.r_scale)
        tp = lqr_terminal_pair(model, lag, cfg.alpha_coeff)
        log = simulate_closed_loop(
            controller_config(cfg), model, tp, lag,
            np.asarray(default_x0(cfg.model)), cfg.steps,
        )
        if log.failed:
            print(f"{alpha:7.2f}  failed: {log.failure}")
            continue
        adv = log.advancing()
        horizons = np.array([r.N for r in adv])
        zero_at = int(np.argmax(horizons == 0)) if np.any(horizons == 0) else -1
        regrows = int(np.sum(np.diff(log.event_horizons()) == 1))
        print(
            f"{alpha:7.2f} {settle_step(log.states):7d} {zero_at:7d} "
            f"{regrows:8d} {int(np.max(log.event_horizons())):6d}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
