"""Random problem-instance generation and the random-simulation baseline.

Instances are integrator plants of dimension 2, 6, or 10 with box obstacles,
a random initial box, a goal-seeking reference controller, and a small
additive quadratic model mismatch.  Every instance is a plain problem-spec
document, so the generated files round-trip through the normal loader.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .engine import EngineConfig, FalsificationProblem, find_adversarial_scenario
from .geometry import contains_point
from .probspec import LoadedProblem, problem_from_dict
from .replay import check_from_init, replay_scenario


@dataclass(frozen=True)
class RandomInstanceSpec:
    dimension: int = 2
    obstacle_count: int = 2
    seed: int = 0
    mismatch_magnitude: float = 0.02

    def __post_init__(self):
        if self.dimension not in (2, 6, 10):
            raise ValueError("dimension must be 2, 6, or 10")


def _boxes_disjoint(a, b, margin=0.0) -> bool:
    return bool(np.any(a[:, 0] - margin >= b[:, 1]) or
                np.any(b[:, 0] - margin >= a[:, 1]))


def _place_boxes(rng, count, size_range, arena, existing, margin, retries=100):
    out = []
    for _ in range(count):
        for attempt in range(retries):
            size = rng.uniform(*size_range, size=arena.shape[0])
            lo = rng.uniform(arena[:, 0], arena[:, 1] - size)
            box = np.stack([lo, lo + size], axis=1)
            if all(_boxes_disjoint(box, other, margin) for other in existing + out):
                out.append(box)
                break
        else:
            raise RuntimeError("could not place a disjoint box after retries")
    return out


def _grid_go_to_goal_regions(goal_center, u_max, dead=0.3):
    """3x3 sign-quantized go-to-goal lookup over a 2D observation."""
    g1, g2 = goal_center
    regions = []
    for s1, u1 in ((-1, u_max), (1, -u_max), (0, 0.0)):
        for s2, u2 in ((-1, u_max), (1, -u_max), (0, 0.0)):
            rows, offs = [], []
            for axis, sgn, g in ((0, s1, g1), (1, s2, g2)):
                e = [0.0, 0.0]
                if sgn < 0:      # y_axis <= g - dead
                    e[axis] = 1.0
                    rows.append(list(e))
                    offs.append(g - dead)
                elif sgn > 0:    # y_axis >= g + dead
                    e[axis] = -1.0
                    rows.append(list(e))
                    offs.append(-(g + dead))
                else:            # |y_axis - g| <= dead
                    e[axis] = 1.0
                    rows.append(list(e))
                    offs.append(g + dead)
                    e2 = [0.0, 0.0]
                    e2[axis] = -1.0
                    rows.append(e2)
                    offs.append(-(g - dead))
            regions.append({"H": rows, "h": offs, "s": 1, "u": [u1, u2]})
    return regions


def _detour_regions(obstacle, goal_center, u_max, inflate=0.7):
    """Two constant sidestep pieces covering an inflated obstacle."""
    c = obstacle.mean(axis=1)
    d = np.asarray(goal_center) - c
    major = int(np.argmax(np.abs(d)))
    minor = 1 - major
    lo = obstacle[:, 0] - inflate
    hi = obstacle[:, 1] + inflate
    box_rows = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
    box_offs = [hi[0], -lo[0], hi[1], -lo[1]]
    out = []
    for side, sgn in (("below", -1.0), ("above", 1.0)):
        rows = list(box_rows)
        offs = list(box_offs)
        e = [0.0, 0.0]
        if sgn < 0:   # minor coordinate at or below the obstacle center line
            e[minor] = 1.0
            rows.append(e)
            offs.append(c[minor])
        else:
            e[minor] = -1.0
            rows.append(e)
            offs.append(-c[minor])
        u = [0.0, 0.0]
        u[major] = u_max * float(np.sign(d[major]) if d[major] != 0 else 1.0)
        u[minor] = u_max * float(sgn)
        out.append({"H": rows, "h": offs, "s": 1, "u": u})
    return out


def _psd_quad_terms(rng, coords, n_x):
    terms = []
    for coord in coords:
        r = rng.normal(size=n_x)
        r /= np.linalg.norm(r)
        terms.append({"coord": int(coord), "M": np.outer(r, r).tolist()})
    return terms


def instance_spec_dict(spec: RandomInstanceSpec) -> dict:
    """Deterministic problem-spec document for a random instance."""
    rng = np.random.default_rng(spec.seed)
    n = spec.dimension
    if n == 2:
        return _instance_2d(spec, rng)
    return _instance_integrator_nd(spec, rng)


def _instance_2d(spec: RandomInstanceSpec, rng) -> dict:
    arena = np.array([[0.0, 10.0], [0.0, 10.0]])
    goal = _place_boxes(rng, 1, (1.0, 1.4), np.array([[1.0, 9.0], [1.0, 9.0]]),
                        [], 0.0)[0]
    obstacles = _place_boxes(rng, spec.obstacle_count, (1.4, 2.4),
                             np.array([[1.5, 8.5], [1.5, 8.5]]), [goal], 0.5)
    init = _place_boxes(rng, 1, (0.9, 1.1), np.array([[0.8, 9.2], [0.8, 9.2]]),
                        obstacles + [goal], 0.5)[0]
    goal_center = goal.mean(axis=1)
    regions = []
    for o in obstacles:
        regions.extend(_detour_regions(o, goal_center, 1.0))
    regions.extend(_grid_go_to_goal_regions(goal_center, 1.0))
    if spec.obstacle_count > 0:
        unsafe = [{"box": o.tolist()} for o in obstacles]
    else:
        t = 0.5
        unsafe = [{"box": [[0.0, t], [0.0, 10.0]]},
                  {"box": [[10.0 - t, 10.0], [0.0, 10.0]]},
                  {"box": [[t, 10.0 - t], [0.0, t]]},
                  {"box": [[t, 10.0 - t], [10.0 - t, 10.0]]}]
    doc = {
        "name": f"rand2d_s{spec.seed}_o{spec.obstacle_count}",
        "system": {
            "modes": {"1": {"A": np.eye(2).tolist(),
                            "B": (0.5 * np.eye(2)).tolist(),
                            "K": [0.0, 0.0],
                            "E": (0.5 * np.eye(2)).tolist()}},
            "C": np.eye(2).tolist(), "D": np.zeros((2, 2)).tolist(),
            "F": np.eye(2).tolist(),
        },
        "uncertainty": {"W": {"box": [[-0.2, 0.2], [-0.2, 0.2]]},
                        "V": {"box": [[-0.5, 0.5], [-0.5, 0.5]]}},
        "control": {"modes": [1], "U": {"box": [[-1.0, 1.0], [-1.0, 1.0]]}},
        "sets": {"domain": arena.tolist(),
                 "X_init": {"box": init.tolist()},
                 "X_unsafe": unsafe},
        "controller": {"piecewise": {"regions": regions,
                                     "default": {"s": 1, "u": [0.0, 0.0]},
                                     "clamp_box": arena.tolist()}},
        "engine": {"backend": "polytope", "seed": spec.seed, "k_max": 60,
                   "dual_k_stop": 30, "proj_dim_cap": 14},
        "goal": {"box": goal.tolist()},
    }
    if spec.mismatch_magnitude > 0:
        doc["mismatch"] = {"quad": {
            "terms": _psd_quad_terms(rng, [0, 1], 2),
            "magnitude": spec.mismatch_magnitude}}
    return doc


def _instance_integrator_nd(spec: RandomInstanceSpec, rng) -> dict:
    """Double integrator in 3D space; dimension 10 adds a stable but
    uncontrollable 4D subspace."""
    n = spec.dimension
    dt = 0.5
    pos_arena = np.array([[0.0, 10.0]] * 3)
    vel_rng = np.array([[-2.0, 2.0]] * 3)
    A6 = np.block([[np.eye(3), dt * np.eye(3)],
                   [np.zeros((3, 3)), np.eye(3)]])
    B6 = np.vstack([0.5 * dt * dt * np.eye(3), dt * np.eye(3)])
    E6 = 0.5 * B6
    goal = _place_boxes(rng, 1, (1.2, 1.6), np.array([[1.0, 9.0]] * 3), [], 0.0)[0]
    obstacles = _place_boxes(rng, spec.obstacle_count, (1.6, 2.6),
                             np.array([[2.0, 8.0]] * 3), [goal], 0.5)
    init_pos = _place_boxes(rng, 1, (0.9, 1.1), np.array([[1.0, 9.0]] * 3),
                            obstacles + [goal], 0.5)[0]
    if n == 6:
        A, B, E = A6, B6, E6
        domain = np.vstack([pos_arena, vel_rng])
        w_box = [[-0.15, 0.15]] * 3
    else:
        # Stable uncontrollable tail: two weakly damped rotation blocks.
        th1, th2 = 0.35, 0.8
        R = np.zeros((4, 4))
        for blk, th in enumerate((th1, th2)):
            c, s = 0.9 * np.cos(th), 0.9 * np.sin(th)
            i = 2 * blk
            R[i:i + 2, i:i + 2] = [[c, -s], [s, c]]
        A = np.block([[A6, np.zeros((6, 4))], [np.zeros((4, 6)), R]])
        B = np.vstack([B6, np.zeros((4, 3))])
        E = np.block([[E6, np.zeros((6, 4))],
                      [np.zeros((4, 3)), 0.1 * np.eye(4)]])
        domain = np.vstack([pos_arena, vel_rng, np.array([[-1.0, 1.0]] * 4)])
        w_box = [[-0.15, 0.15]] * 3 + [[-0.1, 0.1]] * 4
    n_w = E.shape[1]
    vel0 = np.array([[-0.1, 0.1]] * 3)
    init = np.vstack([init_pos, vel0] + ([np.array([[-0.05, 0.05]] * 4)] if n == 10 else []))
    unsafe = []
    for o in obstacles:
        full = np.vstack([o, domain[3:]])
        unsafe.append({"box": full.tolist()})
    goal_center = goal.mean(axis=1)
    kp, kd = 0.8, 1.2
    gain = np.hstack([-kp * np.eye(3), -kd * np.eye(3)]
                     + ([np.zeros((3, 4))] if n == 10 else []))
    bias = kp * goal_center
    doc = {
        "name": f"rand{n}d_s{spec.seed}_o{spec.obstacle_count}",
        "system": {
            "modes": {"1": {"A": A.tolist(), "B": B.tolist(),
                            "K": np.zeros(n).tolist(), "E": E.tolist()}},
            "C": np.eye(n).tolist(), "D": np.zeros((n, 3)).tolist(),
            "F": np.eye(n).tolist(),
        },
        "uncertainty": {"W": {"box": w_box},
                        "V": {"box": [[-0.3, 0.3]] * n}},
        "control": {"modes": [1], "U": {"box": [[-1.0, 1.0]] * 3}},
        "sets": {"domain": domain.tolist(),
                 "X_init": {"box": init.tolist()},
                 "X_unsafe": unsafe},
        "controller": {"saturated_linear": {"gain": gain.tolist(),
                                            "lower": [-1.0] * 3,
                                            "upper": [1.0] * 3,
                                            "bias": bias.tolist()}},
        "engine": {"backend": "zonotope", "seed": spec.seed, "k_max": 30,
                   "dual_k_stop": 12,
                   "zono_order_cap": 36 if n == 10 else 30},
        "goal": {"box": goal.tolist()},
    }
    if spec.mismatch_magnitude > 0:
        # Inject on one velocity row to keep the parameter vertex count low.
        doc["mismatch"] = {"quad": {
            "terms": _psd_quad_terms(rng, [3], n),
            "magnitude": spec.mismatch_magnitude}}
    return doc


def generate_instance(spec: RandomInstanceSpec) -> LoadedProblem:
    return problem_from_dict(instance_spec_dict(spec))


def random_baseline(problem: FalsificationProblem, ctrl, x0, runs: int,
                    horizon: int, seed: int) -> int:
    """Closed-loop simulations under uniform noise; counts violating runs."""
    violations = 0
    for r in range(runs):
        rng = np.random.default_rng([seed, r])
        x = np.asarray(x0, dtype=float)
        hit = False
        for t in range(horizon):
            v = problem.unc.V.sample(rng, x)
            y = problem.sys.measure(x, v, None)
            s, raw = ctrl.query(y)
            u = problem.cspace.clamp(raw)
            w = problem.unc.W.sample(rng, x)
            if problem.mismatch is not None:
                x = np.asarray(problem.mismatch.oracle(x, s, u, w), dtype=float)
            else:
                x = problem.sys.step(x, s, u, w)
            if problem.in_unsafe(x):
                hit = True
                break
        if hit:
            violations += 1
    return violations


def run_benchmark(instance_specs, out_dir: Optional[str] = None,
                  runs: int = 10, write_files: bool = True) -> list[dict]:
    """Falsify each instance, replay-validate, and run the random baseline."""
    rows = []
    for spec in instance_specs:
        doc = instance_spec_dict(spec)
        loaded = problem_from_dict(doc)
        t0 = time.perf_counter()
        scenario, report, rr = find_adversarial_scenario(
            loaded.problem, loaded.controller, loaded.config)
        fals_time = time.perf_counter() - t0
        fails = replay_scenario(loaded.problem, loaded.controller, scenario)
        from_init = check_from_init(loaded.problem, scenario)
        t1 = time.perf_counter()
        violations = random_baseline(loaded.problem, loaded.controller,
                                     scenario.x0, runs,
                                     horizon=max(2 * scenario.T, 10),
                                     seed=spec.seed + 1)
        sim_time = time.perf_counter() - t1
        row = {
            "dimension": spec.dimension,
            "seed": spec.seed,
            "obstacles": spec.obstacle_count,
            "mismatch": spec.mismatch_magnitude,
            "success_from_init": bool(from_init),
            "replay_valid": not fails,
            "replay_failures": fails,
            "T": scenario.T,
            "violations_random": violations,
            "runs": runs,
            "falsification_time_s": round(fals_time, 3),
            "simulation_time_s": round(sim_time, 3),
            "backend": loaded.config.backend,
            "name": doc["name"],
        }
        rows.append(row)
        if write_files and out_dir:
            inst_dir = os.path.join(out_dir, doc["name"])
            os.makedirs(inst_dir, exist_ok=True)
            with open(os.path.join(inst_dir, "instance.json"), "w",
                      encoding="utf-8") as fh:
                json.dump(doc, fh, sort_keys=True, indent=1)
                fh.write("\n")
            from .scenario_io import dump_json, scenario_to_dict, write_trace_csv
            dump_json(scenario_to_dict(scenario),
                      os.path.join(inst_dir, "scenario.json"))
            write_trace_csv(scenario, os.path.join(inst_dir, "trace.csv"))
    if write_files and out_dir:
        write_report(rows, out_dir)
    return rows


def write_report(rows: list[dict], out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(rows, fh, sort_keys=True, indent=1)
        fh.write("\n")
    cols = ["name", "dimension", "seed", "obstacles", "mismatch", "backend",
            "success_from_init", "replay_valid", "T", "violations_random",
            "runs", "falsification_time_s", "simulation_time_s"]
    with open(os.path.join(out_dir, "report.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in rows:
            writer.writerow([row[c] for c in cols])
