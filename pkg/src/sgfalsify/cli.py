"""Batch command-line front end.

Subcommands: falsify, replay, simulate, dualgame, bench.  Exit codes for
falsify: 0 when the scenario starts in the initial set, 2 for a valid but
weaker scenario, 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys as _sys
import time

import numpy as np

from . import bench as bench_mod
from .engine import find_adversarial_scenario
from .probspec import SpecError, load_problem
from .replay import check_from_init, replay_scenario
from .scenario_io import (dump_json, load_scenario, scenario_to_dict,
                          write_trace_csv)
from .svgplot import render_run


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--delta", type=str, default=None,
                   help="refinement fineness; 'inf' disables")
    p.add_argument("--kmax", type=int, default=None)
    p.add_argument("--backend", choices=["polytope", "zonotope"], default=None)


def _overrides(args) -> dict:
    return {"seed": args.seed, "beta": args.beta, "delta": args.delta,
            "k_max": args.kmax, "backend": args.backend}


def cmd_falsify(args) -> int:
    try:
        loaded = load_problem(args.spec, overrides=_overrides(args))
    except SpecError as e:
        print(f"spec error: {e}", file=_sys.stderr)
        return 1
    out = args.out or "."
    try:
        t0 = time.perf_counter()
        scenario, report, rr = find_adversarial_scenario(
            loaded.problem, loaded.controller, loaded.config)
        wall = time.perf_counter() - t0
        fails = replay_scenario(loaded.problem, loaded.controller, scenario)
        meta = {"config_hash": loaded.config_hash, "query_count": report["query_count"]}
        dump_json(scenario_to_dict(scenario, metadata=meta),
                  os.path.join(out, "scenario.json"))
        write_trace_csv(scenario, os.path.join(out, "trace.csv"))
        report["name"] = loaded.name
        report["config_hash"] = loaded.config_hash
        report["wall_time_s"] = round(wall, 3)
        report["replay_valid"] = not fails
        report["replay_failures"] = fails
        dump_json(report, os.path.join(out, "report.json"))
        try:
            render_run(loaded.problem, rr.dual.frames, rr.frames[1:], scenario,
                       os.path.join(out, "plot.svg"))
        except Exception as e:  # plotting must never fail a run
            print(f"plot skipped: {e}", file=_sys.stderr)
        if fails:
            print("scenario failed replay validation:", file=_sys.stderr)
            for f in fails:
                print(f"  {f}", file=_sys.stderr)
            return 1
        from_init = check_from_init(loaded.problem, scenario)
        print(f"{loaded.name}: status={report['status']} from_init={from_init} "
              f"T={scenario.T} N={scenario.N} queries={report['query_count']}")
        return 0 if from_init else 2
    finally:
        loaded.controller.close()


def cmd_replay(args) -> int:
    try:
        loaded = load_problem(args.spec)
    except SpecError as e:
        print(f"spec error: {e}", file=_sys.stderr)
        return 1
    try:
        scenario = load_scenario(args.scenario)
        fails = replay_scenario(loaded.problem, loaded.controller, scenario)
        if fails:
            for f in fails:
                print(f"FAIL {f}")
            return 1
        print(f"replay OK: T={scenario.T} from_init="
              f"{check_from_init(loaded.problem, scenario)}")
        return 0
    finally:
        loaded.controller.close()


def cmd_simulate(args) -> int:
    try:
        loaded = load_problem(args.spec, overrides={"seed": args.seed})
    except SpecError as e:
        print(f"spec error: {e}", file=_sys.stderr)
        return 1
    try:
        if args.x0:
            x0 = np.asarray(json.loads(args.x0), dtype=float)
        else:
            from .geometry import chebyshev_center_poly
            x0, _ = chebyshev_center_poly(loaded.problem.X_init)
        violations = bench_mod.random_baseline(
            loaded.problem, loaded.controller, x0, args.runs, args.horizon,
            seed=loaded.config.seed)
        doc = {"x0": x0.tolist(), "runs": args.runs, "horizon": args.horizon,
               "violations": violations, "seed": loaded.config.seed}
        if args.out:
            dump_json(doc, os.path.join(args.out, "simulate.json"))
        print(f"{loaded.name}: {violations} violations out of {args.runs} runs")
        return 0
    finally:
        loaded.controller.close()


def cmd_dualgame(args) -> int:
    try:
        loaded = load_problem(args.spec, overrides=_overrides(args))
    except SpecError as e:
        print(f"spec error: {e}", file=_sys.stderr)
        return 1
    from .backends import make_backend
    from .dual_game import expand
    from .engine import RouteResult, _route_unsafe_set
    problem = loaded.problem
    cfg = loaded.config
    out = args.out or "."
    frames_doc = []
    all_dual = []
    for i, (us, ub) in enumerate(zip(problem.unsafe_sets, problem.unsafe_boxes)):
        backend = make_backend(cfg.backend, problem.sys, problem.unc,
                               problem.cspace, problem.domain_poly,
                               mismatch=problem.mismatch,
                               dim_cap=cfg.proj_dim_cap,
                               order_cap=cfg.zono_order_cap)
        target0 = _route_unsafe_set(cfg.backend, problem, us, ub)
        dual = expand(backend, target0, k_stop=cfg.dual_k_stop)
        all_dual.extend(dual.frames)
        for k, fr in enumerate(dual.frames):
            from .geometry import bounding_box
            frames_doc.append({"unsafe_index": i, "k": k,
                               "bounding_box": bounding_box(fr).tolist()})
        print(f"unsafe[{i}]: depth K={dual.K}")
    dump_json({"frames": frames_doc}, os.path.join(out, "dualgame.json"))
    try:
        render_run(problem, all_dual, [], None, os.path.join(out, "dualgame.svg"))
    except Exception as e:
        print(f"plot skipped: {e}", file=_sys.stderr)
    loaded.controller.close()
    return 0


def cmd_bench(args) -> int:
    with open(args.spec, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    specs = [bench_mod.RandomInstanceSpec(
        dimension=int(d.get("dimension", 2)),
        obstacle_count=int(d.get("obstacles", 2)),
        seed=int(d.get("seed", 0)),
        mismatch_magnitude=float(d.get("mismatch", 0.02)))
        for d in doc["instances"]]
    rows = bench_mod.run_benchmark(specs, out_dir=args.out or "bench_out",
                                   runs=int(doc.get("runs", 10)))
    for row in rows:
        mark = "ok" if row["success_from_init"] else "x"
        print(f"{row['name']}: from_init={mark} T={row['T']} "
              f"violations={row['violations_random']}/{row['runs']} "
              f"replay_valid={row['replay_valid']}")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="sgfalsify",
        description="Adversarial scenario generation for gray-box feedback systems")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("falsify", help="search for an adversarial scenario")
    p.add_argument("spec")
    p.add_argument("--out", default=None)
    _add_overrides(p)
    p.set_defaults(fn=cmd_falsify)

    p = sub.add_parser("replay", help="validate a scenario file")
    p.add_argument("spec")
    p.add_argument("scenario")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("simulate", help="random closed-loop baseline runs")
    p.add_argument("spec")
    p.add_argument("--x0", default=None, help="JSON list initial state")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--horizon", type=int, default=300)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("dualgame", help="dump the dual-game frames")
    p.add_argument("spec")
    p.add_argument("--out", default=None)
    _add_overrides(p)
    p.set_defaults(fn=cmd_dualgame)

    p = sub.add_parser("bench", help="random-instance benchmark harness")
    p.add_argument("spec")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_bench)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except SpecError as e:
        print(f"spec error: {e}", file=_sys.stderr)
        return 1
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
