"""White-box plant: switched-affine dynamics, linear measurement, uncertainty
sets, control space, model-mismatch parametrization, and the reach-avoid
time augmentation."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Optional, Sequence

import numpy as np

from .geometry import (EMPTY, DimensionError, HPolytope, VPolytope, Zonotope,
                       bounding_box, contains_point, zonotope_to_hpolytope)
from .lp import TOL_FEAS


class ModelError(ValueError):
    pass


class BackendAssumptionError(ValueError):
    """A backend's structural assumption does not hold for this plant."""


@dataclass(frozen=True)
class Mode:
    A: np.ndarray
    B: np.ndarray
    K: np.ndarray
    E: np.ndarray


def _mat(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float))


def _vec(x) -> np.ndarray:
    return np.asarray(x, dtype=float).ravel()


class SwitchedAffineSystem:
    """x+ = A_s x + B_s u + K_s + E_s w,   y = C x + D u + F v."""

    def __init__(self, modes: dict, C, D, F):
        self.modes = {}
        for s, m in modes.items():
            A, B, K, E = _mat(m[0]), _mat(m[1]), _vec(m[2]), _mat(m[3])
            self.modes[int(s)] = Mode(A, B, K, E)
        self.C = _mat(C)
        self.D = _mat(D)
        self.F = _mat(F)
        self._validate()

    def _validate(self):
        n_x = self.n_x
        for s, m in self.modes.items():
            if m.A.shape != (n_x, n_x):
                raise ModelError(f"mode {s}: A must be {n_x}x{n_x}")
            if m.B.shape[0] != n_x:
                raise ModelError(f"mode {s}: B row count must be {n_x}")
            if m.B.shape[1] != self.n_u:
                raise ModelError(f"mode {s}: B column count inconsistent")
            if m.K.shape[0] != n_x:
                raise ModelError(f"mode {s}: K length must be {n_x}")
            if m.E.shape[0] != n_x:
                raise ModelError(f"mode {s}: E row count must be {n_x}")
            if m.E.shape[1] != self.n_w:
                raise ModelError(f"mode {s}: E column count inconsistent")
        if self.C.shape[1] != n_x:
            raise ModelError("C column count must equal the state dimension")
        if self.D.shape[0] != self.n_y:
            raise ModelError("D row count must equal the observation dimension")
        if self.F.shape[0] != self.n_y:
            raise ModelError("F row count must equal the observation dimension")

    @property
    def n_x(self) -> int:
        return next(iter(self.modes.values())).A.shape[0]

    @property
    def n_u(self) -> int:
        return next(iter(self.modes.values())).B.shape[1]

    @property
    def n_w(self) -> int:
        return next(iter(self.modes.values())).E.shape[1]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]

    @property
    def n_v(self) -> int:
        return self.F.shape[1]

    @property
    def mode_ids(self) -> list:
        return sorted(self.modes)

    def step(self, x, s, u, w) -> np.ndarray:
        """Exact affine state update."""
        if s not in self.modes:
            raise ModelError(f"unknown mode {s!r}")
        m = self.modes[s]
        x, u, w = _vec(x), _vec(u), _vec(w)
        return m.A @ x + m.B @ u + m.K + m.E @ w

    def measure(self, x, v, u=None) -> np.ndarray:
        """y = C x + D u + F v; the D-term applies only when u is supplied."""
        y = self.C @ _vec(x) + self.F @ _vec(v)
        if u is not None and np.any(self.D != 0.0):
            y = y + self.D @ _vec(u)
        return y

    def check_zonotope_assumptions(self) -> None:
        if not np.allclose(self.C, np.eye(self.n_x)):
            raise BackendAssumptionError("zonotope backend requires C = I")
        for s, m in self.modes.items():
            if abs(np.linalg.det(m.A)) < 1e-12:
                raise BackendAssumptionError(f"zonotope backend requires invertible A (mode {s})")


class UncertaintySet:
    """A disturbance or noise set, possibly state-dependent.

    Stored in up to two equivalent forms: polyhedral rows
    {z | Mx x + Mz z <= m} (state-dependent allowed) and a zonotope.  Each
    backend pulls the form it needs; 1D/2D zonotopes convert to rows exactly.
    """

    def __init__(self, dim: int, poly: Optional[tuple] = None,
                 zono: Optional[Zonotope] = None):
        if poly is None and zono is None:
            raise ModelError("uncertainty set needs a polyhedral or zonotope form")
        self.dim = dim
        self._poly = None
        if poly is not None:
            Mx, Mz, m = poly
            Mz = _mat(Mz)
            m = _vec(m)
            Mx = None if Mx is None else _mat(Mx)
            if Mz.shape[1] != dim or Mz.shape[0] != m.shape[0]:
                raise ModelError("inconsistent polyhedral uncertainty rows")
            if Mx is not None and Mx.shape[0] != m.shape[0]:
                raise ModelError("state-coupling rows must match offset length")
            self._poly = (Mx, Mz, m)
        self.zono = zono
        if zono is not None and zono.dim != dim:
            raise ModelError("zonotope dimension mismatch")

    @classmethod
    def from_box(cls, bounds) -> "UncertaintySet":
        bounds = np.asarray(bounds, dtype=float)
        n = bounds.shape[0]
        Mz = np.vstack([np.eye(n), -np.eye(n)])
        m = np.concatenate([bounds[:, 1], -bounds[:, 0]])
        return cls(n, poly=(None, Mz, m), zono=Zonotope.from_box(bounds))

    @classmethod
    def from_poly(cls, Mz, m, Mx=None) -> "UncertaintySet":
        Mz = _mat(Mz)
        return cls(Mz.shape[1], poly=(Mx, Mz, m))

    @classmethod
    def from_zonotope(cls, Z: Zonotope) -> "UncertaintySet":
        poly = None
        if Z.dim <= 2:
            P = zonotope_to_hpolytope(Z)
            poly = (None, P.H, P.h)
        return cls(Z.dim, poly=poly, zono=Z)

    @property
    def state_dependent(self) -> bool:
        return self._poly is not None and self._poly[0] is not None

    def rows(self) -> tuple:
        """(Mx | None, Mz, m) rows for the polytope backend."""
        if self._poly is None:
            raise BackendAssumptionError(
                "no polyhedral form available for this uncertainty set")
        return self._poly

    def zonotope_form(self) -> Zonotope:
        if self.zono is None:
            raise BackendAssumptionError(
                "no zonotope form available for this uncertainty set")
        return self.zono

    def fixed_polytope(self) -> HPolytope:
        Mx, Mz, m = self.rows()
        if Mx is not None:
            raise BackendAssumptionError("set is state-dependent")
        return HPolytope(Mz, m)

    def bounding_box(self) -> np.ndarray:
        if self.zono is not None:
            return self.zono.bounding_box()
        return bounding_box(self.fixed_polytope())

    def contains(self, z, x=None, tol: float = TOL_FEAS) -> bool:
        z = _vec(z)
        if self._poly is not None:
            Mx, Mz, m = self._poly
            lhs = Mz @ z
            if Mx is not None:
                if x is None:
                    raise ModelError("state required for a state-dependent set")
                lhs = lhs + Mx @ _vec(x)
            return bool(np.all(lhs - m <= tol))
        return contains_point(self.zono, z, tol)

    def sample(self, rng: np.random.Generator, x=None, max_tries: int = 10000) -> np.ndarray:
        """Uniform over the bounding box with rejection into the set."""
        if self._poly is None:
            # Zonotope-only form beyond 2D: parameter sampling (always valid).
            theta = rng.uniform(-1.0, 1.0, size=self.zono.num_generators)
            return self.zono.G @ theta + self.zono.c
        Mx, Mz, m = self._poly
        mm = m - (Mx @ _vec(x) if Mx is not None else 0.0)
        box = bounding_box(HPolytope(Mz, mm))
        for _ in range(max_tries):
            z = rng.uniform(box[:, 0], box[:, 1])
            if self.contains(z, x):
                return z
        from .geometry import chebyshev_center_poly
        c, _ = chebyshev_center_poly(HPolytope(Mz, mm))
        return c


@dataclass
class UncertaintyModel:
    W: UncertaintySet
    V: UncertaintySet


class ControlSpace:
    """Finite mode set S plus a bounded continuous control set U."""

    def __init__(self, modes: Sequence[int], box=None, vertices=None,
                 zono: Optional[Zonotope] = None):
        self.modes = sorted(int(s) for s in modes)
        if not self.modes:
            raise ModelError("mode set must be nonempty")
        self.box = None if box is None else np.asarray(box, dtype=float)
        self._vertices = None
        self.zono = zono
        if self.box is not None:
            lo, hi = self.box[:, 0], self.box[:, 1]
            if np.any(lo > hi):
                raise ModelError("control box has lo > hi")
            self._vertices = _box_corners(lo, hi)
            if zono is None:
                self.zono = Zonotope.from_box(self.box)
        elif vertices is not None:
            self._vertices = VPolytope(vertices).vertices
        elif zono is not None:
            self._vertices = _zonotope_corners(zono)
        else:
            raise ModelError("control set needs a box, vertex list, or zonotope")

    @property
    def n_u(self) -> int:
        return self._vertices.shape[1]

    def vertices(self) -> np.ndarray:
        return self._vertices

    def zonotope_form(self) -> Zonotope:
        if self.zono is None:
            raise BackendAssumptionError("control set has no zonotope form")
        return self.zono

    def contains(self, u, tol: float = TOL_FEAS) -> bool:
        u = _vec(u)
        if self.box is not None:
            return bool(np.all(u >= self.box[:, 0] - tol) and np.all(u <= self.box[:, 1] + tol))
        return VPolytope(self._vertices).contains(u, tol)

    def clamp(self, u) -> np.ndarray:
        """Nearest point of U in the 1-norm (componentwise clip for boxes)."""
        u = _vec(u)
        if self.box is not None:
            return np.clip(u, self.box[:, 0], self.box[:, 1])
        return VPolytope(self._vertices).clamp_1norm(u)


def _box_corners(lo, hi) -> np.ndarray:
    lo, hi = _vec(lo), _vec(hi)
    corners = np.array(list(product(*[(l, h) for l, h in zip(lo, hi)])))
    _, idx = np.unique(np.round(corners, 12), axis=0, return_index=True)
    return corners[np.sort(idx)]


def _zonotope_corners(Z: Zonotope) -> np.ndarray:
    if Z.num_generators > 12:
        raise ModelError("vertex enumeration of a zonotope with >12 generators")
    signs = np.array(list(product((-1.0, 1.0), repeat=Z.num_generators)))
    pts = signs @ Z.G.T + Z.c
    _, idx = np.unique(np.round(pts, 12), axis=0, return_index=True)
    return pts[np.sort(idx)]


# ---------------------------------------------------------------------------
# control pieces for the refinement queue


class ControlPiece:
    """An axis-aligned box piece of the control set used during refinement."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        self.lo = _vec(lo)
        self.hi = _vec(hi)

    @classmethod
    def whole(cls, cspace: ControlSpace) -> "ControlPiece":
        if cspace.box is None:
            raise BackendAssumptionError(
                "control refinement requires a box control set")
        return cls(cspace.box[:, 0], cspace.box[:, 1])

    def vertices(self) -> np.ndarray:
        return _box_corners(self.lo, self.hi)

    @property
    def diameter(self) -> float:
        return float(np.max(self.hi - self.lo, initial=0.0))

    def contains(self, u, tol: float = TOL_FEAS) -> bool:
        u = _vec(u)
        return bool(np.all(u >= self.lo - tol) and np.all(u <= self.hi + tol))

    def bisect(self) -> tuple["ControlPiece", "ControlPiece"]:
        axis = int(np.argmax(self.hi - self.lo))
        mid = 0.5 * (self.lo[axis] + self.hi[axis])
        hi1 = self.hi.copy()
        hi1[axis] = mid
        lo2 = self.lo.copy()
        lo2[axis] = mid
        return ControlPiece(self.lo, hi1), ControlPiece(lo2, self.hi)

    def __repr__(self):
        return f"ControlPiece({self.lo}, {self.hi})"


# ---------------------------------------------------------------------------
# model mismatch


class MismatchModel:
    """Abstraction parameters (p, q) entering the state update additively.

    The abstract update is f_hat(x, s, u, w; p, q) =
    A_s x + B_s u + K_s + Mp p + Mq q + E_s w.  ``resolve_p(x, u)`` realizes
    the parameter that is fixed once (x, u) are known; ``oracle(x, s, u, w)``
    is the concrete dynamics used during forward replay; ``resolve_q`` matches
    the oracle after the disturbance has played.
    """

    def __init__(self, sys: SwitchedAffineSystem, P_vertices, Mp,
                 resolve_p: Callable, oracle: Callable,
                 Q_vertices=None, Mq=None, resolve_q: Optional[Callable] = None):
        self.sys = sys
        self.P_vertices = np.atleast_2d(np.asarray(P_vertices, dtype=float))
        self.Mp = _mat(Mp)
        self.resolve_p = resolve_p
        self.oracle = oracle
        if Q_vertices is None:
            Q_vertices = np.zeros((1, 1))
            Mq = np.zeros((sys.n_x, 1))
        self.Q_vertices = np.atleast_2d(np.asarray(Q_vertices, dtype=float))
        self.Mq = _mat(Mq)
        self.resolve_q = resolve_q
        if self.Mp.shape != (sys.n_x, self.P_vertices.shape[1]):
            raise ModelError("p-injection matrix shape mismatch")
        if self.Mq.shape != (sys.n_x, self.Q_vertices.shape[1]):
            raise ModelError("q-injection matrix shape mismatch")

    @property
    def trivial_q(self) -> bool:
        return bool(np.all(self.Mq == 0.0) or
                    (self.Q_vertices.shape[0] == 1 and np.all(self.Q_vertices == 0.0)))

    def abstract_step(self, x, s, u, w, p, q=None) -> np.ndarray:
        out = self.sys.step(x, s, u, w) + self.Mp @ _vec(p)
        if q is not None:
            out = out + self.Mq @ _vec(q)
        return out

    def match_q(self, x, s, u, w, p) -> np.ndarray:
        """Least-squares q with f_oracle = f_hat_{p,q}; exact by contract."""
        target = _vec(self.oracle(x, s, u, w)) - self.abstract_step(x, s, u, w, p)
        q, *_ = np.linalg.lstsq(self.Mq, target, rcond=None)
        return q

    def validate_samples(self, domain_box, cspace: ControlSpace,
                         W: UncertaintySet, rng: np.random.Generator,
                         n: int = 1000, tol: float = 1e-9) -> None:
        """Spot-check that (p, q) reproduce the oracle exactly on samples."""
        domain_box = np.asarray(domain_box, dtype=float)
        u_box = cspace.box if cspace.box is not None else None
        modes = self.sys.mode_ids
        for i in range(n):
            x = rng.uniform(domain_box[:, 0], domain_box[:, 1])
            if u_box is not None:
                u = rng.uniform(u_box[:, 0], u_box[:, 1])
            else:
                verts = cspace.vertices()
                u = verts[int(rng.integers(len(verts)))]
            w = W.sample(rng, x)
            s = modes[int(rng.integers(len(modes)))]
            p = _vec(self.resolve_p(x, u))
            q = self.match_q(x, s, u, w, p) if not self.trivial_q else np.zeros(self.Mq.shape[1])
            got = self.abstract_step(x, s, u, w, p, q)
            want = _vec(self.oracle(x, s, u, w))
            if np.max(np.abs(got - want)) > tol:
                raise ModelError(
                    f"mismatch relation violated at sample {i}: residual "
                    f"{np.max(np.abs(got - want)):.3e}")


def quadratic_mismatch(sys: SwitchedAffineSystem, quad_terms, magnitude: float,
                       domain_box) -> MismatchModel:
    """Additive quadratic state terms, bounded by ``magnitude`` on the domain.

    ``quad_terms`` is a list of (state coordinate, symmetric matrix); each
    term is scaled so its absolute value never exceeds ``magnitude`` over
    the domain box.  Keeping the injected coordinate count small keeps the
    universal-quantifier vertex enumeration cheap.
    """
    quad_terms = [(int(i), np.asarray(M, dtype=float)) for i, M in quad_terms]
    domain_box = np.asarray(domain_box, dtype=float)
    n = sys.n_x
    if domain_box.shape[0] > 12:
        raise ModelError("quadratic mismatch scaling limited to 12 state dims")
    corners = _box_corners(domain_box[:, 0], domain_box[:, 1])
    scales = []
    for _, M in quad_terms:
        # Vertex maxima are exact for PSD M (the intended use); the 2x pad
        # keeps the bound conservative regardless.
        worst = max(abs(c @ M @ c) for c in corners)
        scales.append(magnitude / (2.0 * worst) if worst > 0 else 0.0)
    scales = np.asarray(scales)
    n_p = len(quad_terms)
    Mp = np.zeros((n, n_p))
    for j, (coord, _) in enumerate(quad_terms):
        Mp[coord, j] = 1.0

    def phi(x):
        x = _vec(x)
        return np.array([s * (x @ M @ x) for s, (_, M) in zip(scales, quad_terms)])

    def resolve_p(x, u):
        return phi(x)

    def oracle(x, s, u, w):
        return sys.step(x, s, u, w) + Mp @ phi(x)

    P_bounds = np.stack([-magnitude * np.ones(n_p), magnitude * np.ones(n_p)], axis=1)
    P_vertices = _box_corners(P_bounds[:, 0], P_bounds[:, 1])
    model = MismatchModel(sys, P_vertices, Mp, resolve_p, oracle)
    model.P_box = P_bounds
    return model


# ---------------------------------------------------------------------------
# reach-avoid time augmentation


@dataclass
class TimeAugmentedProblem:
    """Augmented problem with an exact integer clock next to the state.

    The clock z obeys z+ = z + 1 starting from 0; backward frames carry a
    time-slice index instead of a continuous clock coordinate.  unsafe_any
    is the state-invariance violation route; deadline_sets are the
    target-complement pieces whose backward expansion is restricted to them.
    """

    sys: SwitchedAffineSystem
    t_max: int
    X_target: HPolytope
    unsafe_any: list
    deadline_sets: list
    init_set: HPolytope

    def step(self, xz, s, u, w) -> tuple:
        x, z = xz
        return self.sys.step(x, s, u, w), int(z) + 1


def box_complement(target_box, domain_box) -> list:
    """Axis-aligned complement of a box inside a domain box, as box list."""
    t = np.asarray(target_box, dtype=float)
    d = np.asarray(domain_box, dtype=float)
    out = []
    lo = d[:, 0].copy()
    hi = d[:, 1].copy()
    for axis in range(d.shape[0]):
        if t[axis, 0] > d[axis, 0] + 1e-12:
            piece = np.stack([lo, hi], axis=1)
            piece[axis] = (d[axis, 0], t[axis, 0])
            out.append(piece.copy())
        if t[axis, 1] < d[axis, 1] - 1e-12:
            piece = np.stack([lo, hi], axis=1)
            piece[axis] = (t[axis, 1], d[axis, 1])
            out.append(piece.copy())
        lo[axis], hi[axis] = max(lo[axis], t[axis, 0]), min(hi[axis], t[axis, 1])
    return out


def augment_time(sys: SwitchedAffineSystem, t_max: int, X_target_box,
                 domain_box, X_init: HPolytope, unsafe_boxes) -> TimeAugmentedProblem:
    """Build the time-augmented reach-avoid falsification problem."""
    if t_max < 0:
        raise ModelError("t_max must be nonnegative")
    X_target_box = np.asarray(X_target_box, dtype=float)
    if np.any(X_target_box[:, 0] > X_target_box[:, 1]):
        raise ModelError("empty target set")
    comp = box_complement(X_target_box, domain_box)
    return TimeAugmentedProblem(
        sys=sys,
        t_max=int(t_max),
        X_target=HPolytope.from_box(X_target_box),
        unsafe_any=[HPolytope.from_box(b) for b in np.asarray(unsafe_boxes, dtype=float)],
        deadline_sets=[HPolytope.from_box(b) for b in comp],
        init_set=X_init,
    )
