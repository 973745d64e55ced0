"""Independent scenario validator.

Re-simulates a scenario from (x0, w-sequence, v-sequence) using only the
plant model and the controller handle, and checks every falsifiability
condition: state recursion, observation consistency, controller re-query
agreement, uncertainty memberships, and the terminal violation.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .engine import AdversarialScenario, FalsificationProblem
from .geometry import contains_point
from .lp import TOL_FEAS

STATE_TOL = 1e-9


def replay_scenario(problem: FalsificationProblem, ctrl,
                    scenario: AdversarialScenario) -> list[str]:
    """Return a list of failed checks (empty means the scenario is valid)."""
    sys = problem.sys
    mm = problem.mismatch
    fails: list[str] = []
    T = scenario.T
    if scenario.w_seq.shape != (T, sys.n_w):
        return [f"w sequence has shape {scenario.w_seq.shape}, expected {(T, sys.n_w)}"]
    if scenario.v_seq.shape != (T, sys.n_v):
        return [f"v sequence has shape {scenario.v_seq.shape}, expected {(T, sys.n_v)}"]

    x = np.asarray(scenario.x0, dtype=float)
    if np.max(np.abs(x - scenario.x_traj[0]), initial=0.0) > STATE_TOL:
        fails.append("stored trace does not start at x0")
    xs = [x]
    for t in range(T):
        v = scenario.v_seq[t]
        w = scenario.w_seq[t]
        if not problem.unc.V.contains(v, x, TOL_FEAS):
            fails.append(f"t={t}: noise outside V(x)")
        if not problem.unc.W.contains(w, x, TOL_FEAS):
            fails.append(f"t={t}: disturbance outside W(x)")
        u_stored = scenario.u_traj[t]
        y = sys.measure(x, v, u_stored if np.any(sys.D != 0.0) else None)
        if np.max(np.abs(y - scenario.y_traj[t]), initial=0.0) > STATE_TOL:
            fails.append(f"t={t}: observation trace mismatch")
        s, raw = ctrl.query(y)
        u = problem.cspace.clamp(raw)
        if s != scenario.s_traj[t]:
            fails.append(f"t={t}: controller mode {s} != stored {scenario.s_traj[t]}")
        if np.max(np.abs(u - u_stored), initial=0.0) > 1e-9:
            fails.append(f"t={t}: controller output {u.tolist()} != stored {u_stored.tolist()}")
        if mm is not None:
            x_next = np.asarray(mm.oracle(x, s, u, w), dtype=float)
        else:
            x_next = sys.step(x, s, u, w)
        if np.max(np.abs(x_next - scenario.x_traj[t + 1]), initial=0.0) > STATE_TOL:
            fails.append(f"t={t}: state recursion mismatch")
        x = x_next
        xs.append(x)

    fails.extend(_terminal_checks(problem, scenario, np.asarray(xs)))
    return fails


def _terminal_checks(problem: FalsificationProblem,
                     scenario: AdversarialScenario, xs: np.ndarray) -> list[str]:
    fails: list[str] = []
    T = scenario.T
    if scenario.route == "safety":
        if not problem.in_unsafe(xs[T]):
            fails.append("terminal state is not in the unsafe set")
        return fails
    # Deadline route: the clock must have reached t_max with the target
    # never visited on any slice up to the deadline.
    if problem.t_max is None or problem.X_target_box is None:
        return ["deadline scenario against a problem without a target set"]
    from .geometry import HPolytope
    target = HPolytope.from_box(problem.X_target_box)
    zT = scenario.z0 + T
    if zT < problem.t_max:
        fails.append(f"trajectory ends at clock {zT} before the deadline {problem.t_max}")
    for t in range(T + 1):
        z = scenario.z0 + t
        if z <= problem.t_max and contains_point(target, xs[t], TOL_FEAS):
            fails.append(f"t={t}: target set visited at clock {z} before the deadline")
            break
    return fails


def check_from_init(problem: FalsificationProblem,
                    scenario: AdversarialScenario) -> bool:
    ok = contains_point(problem.X_init, scenario.x0, TOL_FEAS)
    if scenario.route == "deadline":
        ok = ok and scenario.z0 == 0
    return ok
