"""Scenario, trace, and report file emission and parsing.

scenario.json is written canonically (sorted keys, full-precision floats) so
identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import os
from typing import Optional

import numpy as np

from .engine import AdversarialScenario


def scenario_to_dict(scenario: AdversarialScenario, metadata: Optional[dict] = None) -> dict:
    doc = {
        "scenario": {
            "x0": scenario.x0.tolist(),
            "z0": int(scenario.z0),
            "w_seq": scenario.w_seq.tolist(),
            "v_seq": scenario.v_seq.tolist(),
        },
        "traces": {
            "x": scenario.x_traj.tolist(),
            "y": scenario.y_traj.tolist(),
            "u": scenario.u_traj.tolist(),
            "s": [int(s) for s in scenario.s_traj],
            "phase": list(scenario.phase),
        },
        "metadata": {
            "N": int(scenario.N),
            "T": int(scenario.T),
            "from_init": bool(scenario.from_init),
            "route": scenario.route,
            "unsafe_index": int(scenario.unsafe_index),
            "seed": int(scenario.seed),
            "backend": scenario.backend,
        },
    }
    if scenario.p_seq is not None:
        doc["scenario"]["p_seq"] = scenario.p_seq.tolist()
        doc["scenario"]["q_seq"] = scenario.q_seq.tolist()
    if metadata:
        doc["metadata"].update(metadata)
    return doc


def scenario_from_dict(doc: dict) -> AdversarialScenario:
    sc = doc["scenario"]
    tr = doc["traces"]
    md = doc["metadata"]
    p_seq = sc.get("p_seq")
    q_seq = sc.get("q_seq")
    return AdversarialScenario(
        x0=np.asarray(sc["x0"], dtype=float),
        z0=int(sc.get("z0", 0)),
        w_seq=np.asarray(sc["w_seq"], dtype=float),
        v_seq=np.asarray(sc["v_seq"], dtype=float),
        x_traj=np.asarray(tr["x"], dtype=float),
        y_traj=np.asarray(tr["y"], dtype=float),
        u_traj=np.asarray(tr["u"], dtype=float),
        s_traj=[int(s) for s in tr["s"]],
        phase=list(tr["phase"]),
        N=int(md["N"]),
        T=int(md["T"]),
        from_init=bool(md["from_init"]),
        route=md.get("route", "safety"),
        unsafe_index=int(md.get("unsafe_index", 0)),
        seed=int(md.get("seed", 0)),
        backend=md.get("backend", "polytope"),
        p_seq=None if p_seq is None else np.asarray(p_seq, dtype=float),
        q_seq=None if q_seq is None else np.asarray(q_seq, dtype=float),
    )


def dump_json(doc: dict, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_scenario(path: str) -> AdversarialScenario:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))


def write_trace_csv(scenario: AdversarialScenario, path: str) -> None:
    """Columns: t, x..., y..., u..., s, w..., v..., phase."""
    n_x = scenario.x_traj.shape[1]
    n_y = scenario.y_traj.shape[1] if scenario.T else 0
    n_u = scenario.u_traj.shape[1] if scenario.T else 0
    n_w = scenario.w_seq.shape[1] if scenario.T else 0
    n_v = scenario.v_seq.shape[1] if scenario.T else 0
    header = (["t"] + [f"x{i}" for i in range(n_x)] + [f"y{i}" for i in range(n_y)]
              + [f"u{i}" for i in range(n_u)] + ["s"]
              + [f"w{i}" for i in range(n_w)] + [f"v{i}" for i in range(n_v)]
              + ["phase"])
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(scenario.T):
            row = ([t] + [repr(v) for v in scenario.x_traj[t]]
                   + [repr(v) for v in scenario.y_traj[t]]
                   + [repr(v) for v in scenario.u_traj[t]]
                   + [scenario.s_traj[t]]
                   + [repr(v) for v in scenario.w_seq[t]]
                   + [repr(v) for v in scenario.v_seq[t]]
                   + [scenario.phase[t]])
            writer.writerow(row)
        # Terminal state row: only t and x are meaningful.
        writer.writerow([scenario.T] + [repr(v) for v in scenario.x_traj[scenario.T]]
                        + [""] * (n_y + n_u) + [""] + [""] * (n_w + n_v) + ["end"])
