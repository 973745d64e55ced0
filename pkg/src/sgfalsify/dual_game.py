"""Perfect-information dual safety game.

Backward expansion of the sets from which the environment can force entry
into the unsafe region no matter what the controller plays, plus the winning
disturbance strategy that finishes every adversarial scenario.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .backends import PolytopeBackend, ZonotopeBackend, make_backend
from .geometry import EMPTY, HPolytope, Zonotope


class StrategyError(RuntimeError):
    """The winning-strategy disturbance LP failed; numerics breached."""


@dataclass
class DualGameResult:
    """Frames D0..DK of the one-shot environment-forced predecessor chain."""

    frames: list
    provenance: list = field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.frames) - 1

    def __len__(self) -> int:
        return len(self.frames)


def epre_under(D, sys=None, cspace=None, unc=None, domain=None,
               backend="polytope", _backend_obj=None, **kw):
    """One environment-forced predecessor step (convenience wrapper)."""
    be = _backend_obj or make_backend(backend, sys, unc, cspace, domain, **kw)
    return be.epre(D)


def expand(backend, X_unsafe, k_stop: int = 50, stop_at_fixpoint: bool = True,
           fixpoint_tol: float = 1e-6) -> DualGameResult:
    """Iterate the forced predecessor from the unsafe set.

    Stops on emptiness, on a support-function fixpoint (axis directions,
    change below ``fixpoint_tol``), or at ``k_stop``.  With the fixpoint
    stop disabled, a detected fixpoint keeps appending the same frame,
    which deadline-indexed expansions rely on.
    """
    first = backend.canonical_frame(X_unsafe)
    if backend.frame_is_empty(first):
        raise ValueError("unsafe set is empty")
    frames = [first]
    prov = [("unsafe",)]
    combos = [(s, tuple(u)) for s in backend.cspace.modes
              for u in backend.cspace.vertices()]
    profile = backend.support_profile(first)
    at_fixpoint = False
    for k in range(1, k_stop + 1):
        if at_fixpoint:
            frames.append(frames[-1])
            prov.append(("fixpoint",))
            continue
        nxt = backend.epre(frames[-1])
        if nxt is EMPTY or backend.frame_is_empty(nxt):
            break
        new_profile = backend.support_profile(nxt)
        if np.max(np.abs(new_profile - profile)) < fixpoint_tol:
            if stop_at_fixpoint:
                break
            at_fixpoint = True
            frames.append(nxt)
            prov.append(("fixpoint",))
            profile = new_profile
            continue
        frames.append(nxt)
        prov.append(tuple(combos))
        profile = new_profile
    return DualGameResult(frames, prov)


def dual_strategy_step(backend, dual: DualGameResult, k: int, x, s, u,
                       p=None) -> tuple[np.ndarray, np.ndarray]:
    """Winning disturbance from a state in frame k against the played action.

    Returns (w, next state under the nominal dynamics).  Guaranteed feasible
    for any in-set action by construction of the frames; an infeasible LP is
    a tolerance breach and raises StrategyError.
    """
    if k < 1 or k > dual.K:
        raise ValueError(f"frame index {k} out of range 1..{dual.K}")
    w = backend.w_step(x, s, u, dual.frames[k - 1], p=p)
    if w is None:
        raise StrategyError(
            f"no winning disturbance found at dual frame {k}; state {np.asarray(x).tolist()}")
    x_next = backend.sys.step(x, s, u, w)
    return w, x_next
