"""Synthesis-guided falsification engine.

Alternates a local observation-space dual game with single controller
queries, expanding backward from the dual winning region until the frames
reach the initial set, then extracts a concrete replayable scenario by
forward expansion through the frames and the dual winning strategy.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .backends import PolytopeBackend, YHandle, ZonotopeBackend, make_backend
from .dual_game import DualGameResult, StrategyError, dual_strategy_step, expand
from .geometry import EMPTY, HPolytope, Zonotope, contains_point
from .lp import TOL_FEAS
from .system import (BackendAssumptionError, ControlPiece, ControlSpace,
                     MismatchModel, SwitchedAffineSystem, UncertaintyModel,
                     box_complement)

STATUS_REACHED_INIT = "reached-init"
STATUS_FRAME_DIED = "frame-died"
STATUS_K_MAX = "k-max"


class EngineAbort(RuntimeError):
    """A forward-phase LP or determinism check failed; run aborts with context."""


@dataclass
class EngineConfig:
    beta: float = 0.6
    k_max: int = 100
    delta: float = np.inf
    backend: str = "polytope"
    seed: int = 0
    x0_choice: str = "last-dual-frame"  # or "unsafe-set"
    dual_k_stop: int = 50
    proj_dim_cap: int = 12
    zono_order_cap: Optional[int] = None

    def __post_init__(self):
        if not (0.0 <= self.beta <= 1.0):
            raise ValueError("beta must lie in [0, 1]")
        if not (self.delta > 0):
            raise ValueError("delta must be positive (use inf to disable)")
        if self.x0_choice not in ("last-dual-frame", "unsafe-set"):
            raise ValueError(f"unknown x0_choice {self.x0_choice!r}")


@dataclass
class BackreachFrame:
    k: int
    X: object
    y_query: Optional[np.ndarray]
    action: Optional[tuple]
    u_piece: Optional[object]
    backend: str
    raw_u: Optional[np.ndarray] = None


@dataclass
class AdversarialScenario:
    """Concrete replayable counterexample: initial state plus the adversarial
    disturbance and noise sequences, with derived traces."""

    x0: np.ndarray
    w_seq: np.ndarray
    v_seq: np.ndarray
    x_traj: np.ndarray
    y_traj: np.ndarray
    u_traj: np.ndarray
    s_traj: list
    phase: list
    N: int
    T: int
    from_init: bool
    route: str = "safety"
    z0: int = 0
    unsafe_index: int = 0
    seed: int = 0
    backend: str = "polytope"
    p_seq: Optional[np.ndarray] = None
    q_seq: Optional[np.ndarray] = None


@dataclass
class FalsificationProblem:
    sys: SwitchedAffineSystem
    unc: UncertaintyModel
    cspace: ControlSpace
    domain_box: np.ndarray
    X_init: HPolytope
    unsafe_sets: list
    unsafe_boxes: list
    X_init_box: Optional[np.ndarray] = None
    X_target_box: Optional[np.ndarray] = None
    t_max: Optional[int] = None
    mismatch: Optional[MismatchModel] = None

    @property
    def domain_poly(self) -> HPolytope:
        return HPolytope.from_box(self.domain_box)

    def in_unsafe(self, x, tol: float = TOL_FEAS) -> bool:
        return any(contains_point(S, x, tol) for S in self.unsafe_sets)


# ---------------------------------------------------------------------------
# query-point selection and control refinement


def select_query_point(backend, handle: YHandle, X_init: HPolytope,
                       beta: float) -> np.ndarray:
    """Blend of the init-closest feasible observation and the set center."""
    y_close = backend.y_close(handle, X_init)
    if beta >= 1.0:
        return y_close
    y_center = backend.y_center(handle)
    if beta <= 0.0:
        return y_center
    cand = beta * y_close + (1.0 - beta) * y_center
    if backend.y_in_handle(handle, cand, tol=1e-9):
        return cand
    return y_close


class _WholeControl:
    """Unsplittable stand-in piece for non-box control sets."""

    def __init__(self, cspace: ControlSpace):
        self._cs = cspace

    def vertices(self):
        return self._cs.vertices()

    @property
    def diameter(self) -> float:
        return 0.0

    def contains(self, u, tol=TOL_FEAS):
        return self._cs.contains(u, tol)

    def bisect(self):
        raise BackendAssumptionError("cannot split a non-box control set")


@dataclass
class QueryOutcome:
    ybar: np.ndarray
    s: int
    u: np.ndarray
    raw_u: np.ndarray
    piece: object
    handle: YHandle


def refine_and_query(backend, ctrl, Xk, cspace: ControlSpace, delta: float,
                     X_init: HPolytope, beta: float):
    """Work through control pieces until a query lands inside its piece.

    Splits a piece by bisecting its longest axis while its diameter exceeds
    delta.  Returns (QueryOutcome | None, rejection count).
    """
    if cspace.box is not None:
        queue = deque([ControlPiece.whole(cspace)])
    else:
        if np.isfinite(delta):
            raise BackendAssumptionError(
                "control refinement requires a box control set")
        queue = deque([_WholeControl(cspace)])
    rejections = 0
    while queue:
        piece = queue.popleft()
        handle = backend.epre_y(Xk, piece.vertices())
        if handle is not None:
            ybar = select_query_point(backend, handle, X_init, beta)
            s, raw_u = ctrl.query(ybar)
            u = cspace.clamp(raw_u)
            if s in cspace.modes and piece.contains(u):
                return QueryOutcome(ybar, s, u, raw_u, piece, handle), rejections
            rejections += 1
        if piece.diameter > delta:
            queue.extend(piece.bisect())
    return None, rejections


# ---------------------------------------------------------------------------
# backward expansion


def alternating_backward(backend, ctrl, X0, X_init: HPolytope,
                         cfg: EngineConfig, forced_steps: Optional[int] = None):
    """Alternating local-dual-game / controller-query backward expansion.

    Plain mode stops as soon as a frame meets the initial set (or k_max /
    frame death).  With ``forced_steps`` (deadline problems) exactly that
    many steps are attempted and the initial set is only tested at the end,
    because each backward step corresponds to one clock slice.
    """
    frames = [BackreachFrame(0, X0, None, None, None, backend.name)]
    rejections = 0
    k = 0
    while True:
        if forced_steps is None:
            if backend.frame_intersects(frames[-1].X, X_init):
                return frames, STATUS_REACHED_INIT, rejections
            if k >= cfg.k_max:
                return frames, STATUS_K_MAX, rejections
        else:
            if k >= forced_steps:
                if backend.frame_intersects(frames[-1].X, X_init):
                    return frames, STATUS_REACHED_INIT, rejections
                return frames, STATUS_K_MAX, rejections
        out, rej = refine_and_query(backend, ctrl, frames[-1].X, backend.cspace,
                                    cfg.delta, X_init, cfg.beta)
        rejections += rej
        if out is None:
            return frames, STATUS_FRAME_DIED, rejections
        Xn = backend.pre_y_pi(frames[-1].X, out.ybar, out.s, out.u)
        if Xn is EMPTY or backend.frame_is_empty(Xn):
            return frames, STATUS_FRAME_DIED, rejections
        k += 1
        frames.append(BackreachFrame(k, Xn, out.ybar, (out.s, out.u),
                                     out.piece, backend.name, raw_u=out.raw_u))


# ---------------------------------------------------------------------------
# forward expansion


def _controller_action(ctrl, cspace, y):
    s, raw = ctrl.query(y)
    return s, cspace.clamp(raw), raw


def forward_expand(backend, frames: Sequence[BackreachFrame],
                   dual: DualGameResult, start_k: int, ctrl,
                   problem: FalsificationProblem, rng: np.random.Generator,
                   route: str = "safety", deadline: Optional[int] = None,
                   seed: int = 0) -> AdversarialScenario:
    """Extract a concrete scenario through the frames, then the dual strategy.

    The alternating phase realizes each recorded observation exactly (noise
    from a feasibility LP) and re-queries the controller; the dual phase
    draws noise at random and forces progress with the winning disturbance.
    """
    sys = problem.sys
    mm = problem.mismatch
    N = len(frames) - 1
    x0 = None
    from_init = False
    inter = backend.frame_intersection_point(frames[-1].X, problem.X_init)
    if inter is not None:
        x0 = inter
        from_init = True
        if deadline is not None and N + start_k != deadline:
            # A deadline scenario starts at clock 0 only when the chain spans
            # the whole horizon.
            from_init = False
    if x0 is None:
        x0 = backend.frame_interior_point(frames[-1].X)

    xs = [np.asarray(x0, dtype=float)]
    ws, vs, us, ss, ys, phases, p_l, q_l = [], [], [], [], [], [], [], []
    truncated = False

    def record(v, y, s, u, w, phase, p, q, x_next):
        vs.append(v)
        ys.append(y)
        ss.append(s)
        us.append(u)
        ws.append(w)
        phases.append(phase)
        if mm is not None:
            p_l.append(p)
            q_l.append(np.zeros(mm.Mq.shape[1]) if q is None else q)
        xs.append(x_next)

    x = xs[0]
    for t in range(N):
        fr = frames[N - t]
        s_rec, u_rec = fr.action
        v = backend.v_for_y(x, fr.y_query, u_rec)
        if v is None:
            raise EngineAbort(f"noise LP infeasible at alternating frame {N - t}")
        y = sys.measure(x, v, u_rec)
        s, u, raw = _controller_action(ctrl, problem.cspace, y)
        if s != s_rec or np.max(np.abs(u - u_rec), initial=0.0) > 1e-6:
            raise EngineAbort(
                f"controller output changed between query and replay at frame "
                f"{N - t}: recorded {(s_rec, u_rec.tolist())}, fresh {(s, u.tolist())}")
        p = np.asarray(mm.resolve_p(x, u), dtype=float) if mm is not None else None
        w = backend.w_step(x, s, u, frames[N - t - 1].X, p=p)
        if w is None:
            raise EngineAbort(f"disturbance LP infeasible at alternating frame {N - t}")
        if mm is not None:
            x_next = np.asarray(mm.oracle(x, s, u, w), dtype=float)
            q = None if mm.trivial_q else mm.match_q(x, s, u, w, p)
        else:
            x_next = sys.step(x, s, u, w)
            q = None
        record(v, y, s, u, w, "alt", p, q, x_next)
        x = x_next
        if route == "safety" and problem.in_unsafe(x):
            truncated = True
            break

    if not truncated:
        for k in range(start_k, 0, -1):
            v = problem.unc.V.sample(rng, x)
            y = sys.measure(x, v, None)
            s, u, raw = _controller_action(ctrl, problem.cspace, y)
            p = np.asarray(mm.resolve_p(x, u), dtype=float) if mm is not None else None
            w = backend.w_step(x, s, u, dual.frames[k - 1], p=p)
            if w is None:
                raise StrategyError(f"winning-strategy LP infeasible at dual frame {k}")
            if mm is not None:
                x_next = np.asarray(mm.oracle(x, s, u, w), dtype=float)
                q = None if mm.trivial_q else mm.match_q(x, s, u, w, p)
            else:
                x_next = sys.step(x, s, u, w)
                q = None
            record(v, y, s, u, w, "dual", p, q, x_next)
            x = x_next
            if route == "safety" and problem.in_unsafe(x):
                break

    T = len(ws)
    z0 = 0
    if deadline is not None:
        z0 = deadline - T
    return AdversarialScenario(
        x0=np.asarray(x0, dtype=float),
        w_seq=np.asarray(ws, dtype=float).reshape(T, sys.n_w),
        v_seq=np.asarray(vs, dtype=float).reshape(T, sys.n_v),
        x_traj=np.asarray(xs, dtype=float),
        y_traj=np.asarray(ys, dtype=float).reshape(T, sys.n_y),
        u_traj=np.asarray(us, dtype=float).reshape(T, sys.n_u),
        s_traj=[int(s) for s in ss],
        phase=list(phases),
        N=min(N, T),
        T=T,
        from_init=from_init,
        route=route,
        z0=int(z0),
        seed=seed,
        backend=backend.name,
        p_seq=(np.asarray(p_l, dtype=float).reshape(T, -1) if mm is not None else None),
        q_seq=(np.asarray(q_l, dtype=float).reshape(T, -1) if mm is not None else None),
    )


# ---------------------------------------------------------------------------
# orchestration


@dataclass
class RouteResult:
    scenario: AdversarialScenario
    status: str
    frames: list
    dual: DualGameResult
    start_k: int
    rejections: int
    route: str
    unsafe_index: int
    timings: dict = field(default_factory=dict)


def _route_unsafe_set(backend_kind: str, problem: FalsificationProblem,
                      unsafe_set, unsafe_box):
    if backend_kind == "zonotope":
        if unsafe_box is None:
            raise BackendAssumptionError(
                "zonotope backend needs box unsafe sets")
        return Zonotope.from_box(unsafe_box)
    return unsafe_set


def run_route(problem: FalsificationProblem, ctrl, cfg: EngineConfig,
              unsafe_set, unsafe_box, restrict=None,
              deadline: Optional[int] = None, route: str = "safety",
              unsafe_index: int = 0, rng=None) -> RouteResult:
    backend = make_backend(cfg.backend, problem.sys, problem.unc,
                           problem.cspace, problem.domain_poly,
                           mismatch=problem.mismatch, restrict=restrict,
                           dim_cap=cfg.proj_dim_cap,
                           order_cap=cfg.zono_order_cap)
    t0 = time.perf_counter()
    k_stop = cfg.dual_k_stop if deadline is None else min(cfg.dual_k_stop, deadline)
    target0 = _route_unsafe_set(cfg.backend, problem, unsafe_set, unsafe_box)
    dual = expand(backend, target0, k_stop=k_stop,
                  stop_at_fixpoint=(deadline is None))
    t1 = time.perf_counter()
    start_k = dual.K if cfg.x0_choice == "last-dual-frame" else 0
    forced = None if deadline is None else deadline - start_k
    frames, status, rejections = alternating_backward(
        backend, ctrl, dual.frames[start_k], problem.X_init, cfg,
        forced_steps=forced)
    t2 = time.perf_counter()
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    scenario = forward_expand(backend, frames, dual, start_k, ctrl, problem,
                              rng, route=route, deadline=deadline,
                              seed=cfg.seed)
    scenario.unsafe_index = unsafe_index
    t3 = time.perf_counter()
    return RouteResult(scenario, status, frames, dual, start_k, rejections,
                       route, unsafe_index,
                       timings={"dual": t1 - t0, "alternating": t2 - t1,
                                "forward": t3 - t2})


def find_adversarial_scenario(problem: FalsificationProblem, ctrl,
                              cfg: EngineConfig):
    """End-to-end falsification: dual game, alternating expansion, forward
    scenario extraction; over unsafe-set pieces (and deadline routes for
    reach-avoid problems), the best chain wins."""
    if np.any(problem.sys.D != 0.0):
        raise BackendAssumptionError(
            "backward computation requires D = 0; feedthrough is replay-only")
    routes = []
    for i, (us, ub) in enumerate(zip(problem.unsafe_sets, problem.unsafe_boxes)):
        routes.append(dict(unsafe_set=us, unsafe_box=ub, restrict=None,
                           deadline=None, route="safety", unsafe_index=i))
    if problem.t_max is not None:
        pieces = box_complement(problem.X_target_box, problem.domain_box)
        for j, piece in enumerate(pieces):
            P = HPolytope.from_box(piece)
            routes.append(dict(unsafe_set=P, unsafe_box=piece, restrict=P,
                               deadline=problem.t_max, route="deadline",
                               unsafe_index=j))
    results = []
    for idx, spec in enumerate(routes):
        rng = np.random.default_rng([cfg.seed, idx])
        try:
            res = run_route(problem, ctrl, cfg, rng=rng, **spec)
        except BackendAssumptionError:
            raise
        except (EngineAbort, StrategyError):
            if not results:
                raise
            continue
        results.append(res)
        if res.scenario.from_init:
            break
    if not results:
        raise EngineAbort("no route produced a scenario")
    best = next((r for r in results if r.scenario.from_init), results[0])
    report = {
        "status": best.status,
        "from_init": bool(best.scenario.from_init),
        "route": best.route,
        "unsafe_index": best.unsafe_index,
        "N": best.scenario.N,
        "T": best.scenario.T,
        "dual_depth": best.dual.K,
        "start_k": best.start_k,
        "refinement_rejections": best.rejections,
        "query_count": ctrl.query_count,
        "timings": best.timings,
        "frames": [
            {"k": fr.k,
             "y_query": None if fr.y_query is None else fr.y_query.tolist(),
             "action": None if fr.action is None else
             [int(fr.action[0]), fr.action[1].tolist()]}
            for fr in best.frames],
        "routes_tried": len(results),
    }
    return best.scenario, report, best


# ---------------------------------------------------------------------------
# frame-soundness validation (sampled)


def validate_frames(backend, frames: Sequence[BackreachFrame], n_samples: int,
                    rng: np.random.Generator, tol: float = 1e-7) -> tuple[int, int]:
    """Sampled one-step inclusion check over an alternating frame chain.

    For each frame k >= 1 and each sampled member state: (a) the state is
    measurement-consistent with the recorded query; (b) some disturbance
    drives it into frame k-1 under the recorded action.  Returns
    (failures, checks).
    """
    failures = 0
    checks = 0
    for k in range(1, len(frames)):
        fr = frames[k]
        prev = frames[k - 1]
        s, u = fr.action
        pts = backend.sample_frame(fr.X, n_samples, rng)
        if isinstance(backend, PolytopeBackend):
            meas = backend.meas_x_set(fr.y_query, u)
            step = backend.one_step_x_set(prev.X, s, u)
            for S in (meas, step):
                if S is EMPTY:
                    failures += len(pts)
                    checks += len(pts)
                    continue
                bad = np.any(pts @ S.H.T - S.h > tol, axis=1)
                failures += int(bad.sum())
                checks += len(pts)
        else:
            for x in pts:
                v = backend.v_for_y(x, fr.y_query, u)
                if v is None:
                    failures += 1
                w = backend.w_step(x, s, u, prev.X)
                if w is None:
                    failures += 1
                checks += 2
    return failures, checks


def validate_dual_frames(backend, dual: DualGameResult, n_samples: int,
                         rng: np.random.Generator, tol: float = 1e-7) -> tuple[int, int]:
    """Sampled forced-predecessor check: from any sampled state of frame k,
    every (mode, control-vertex) admits a disturbance into frame k-1."""
    failures = 0
    checks = 0
    for k in range(1, len(dual.frames)):
        if dual.frames[k] is dual.frames[k - 1]:
            continue
        pts = backend.sample_frame(dual.frames[k], n_samples, rng)
        for s in backend.cspace.modes:
            for u in backend.cspace.vertices():
                if isinstance(backend, PolytopeBackend):
                    S = backend.one_step_x_set(dual.frames[k - 1], s, u)
                    if S is EMPTY:
                        failures += len(pts)
                    else:
                        bad = np.any(pts @ S.H.T - S.h > tol, axis=1)
                        failures += int(bad.sum())
                    checks += len(pts)
                else:
                    for x in pts:
                        if backend.w_step(x, s, u, dual.frames[k - 1]) is None:
                            failures += 1
                        checks += 1
    return failures, checks
