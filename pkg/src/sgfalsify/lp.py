"""Deterministic linear-program kernel shared by every set operation.

All geometry and engine computations funnel through :func:`solve`, which wraps
the HiGHS solver (via scipy).  HiGHS is deterministic for a fixed input, which
is what makes seeded falsification runs reproducible byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

# Primal feasibility tolerance; every downstream membership test inherits it.
TOL_FEAS = 1e-7
# Objective agreement tolerance on non-degenerate problems.
TOL_OBJ = 1e-6


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical-failure"


class LpError(RuntimeError):
    """The solver failed numerically where the caller required an answer."""


class EmptyPolytopeError(ValueError):
    pass


class UnboundedPolytopeError(ValueError):
    pass


@dataclass(frozen=True)
class LinearProgram:
    """min/max c.z  s.t.  A z <= b,  E z = d,  per-variable bounds.

    ``objective=None`` together with ``sense="feas"`` asks for a feasible
    point only.  Bounds default to free variables.
    """

    n: int
    objective: Optional[np.ndarray] = None
    a_ub: Optional[object] = None  # dense or scipy.sparse, shape (m, n)
    b_ub: Optional[np.ndarray] = None
    a_eq: Optional[object] = None
    b_eq: Optional[np.ndarray] = None
    bounds: Optional[list] = None  # list of (lo, hi); None => all free
    sense: str = "min"  # "min" | "max" | "feas"

    def validate(self) -> None:
        if self.n <= 0:
            raise ValueError("LinearProgram needs at least one variable")
        for a, b, tag in ((self.a_ub, self.b_ub, "inequality"),
                          (self.a_eq, self.b_eq, "equality")):
            if a is None:
                continue
            if a.shape[1] != self.n:
                raise ValueError(f"{tag} matrix has {a.shape[1]} columns, expected {self.n}")
            if b is None or a.shape[0] != len(b):
                raise ValueError(f"{tag} right-hand side length mismatch")
            if not np.all(np.isfinite(b)):
                raise ValueError(f"{tag} right-hand side must be finite")
        if self.sense not in ("min", "max", "feas"):
            raise ValueError(f"unknown sense {self.sense!r}")
        if self.sense != "feas" and self.objective is None:
            raise ValueError("objective required unless sense='feas'")


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    point: Optional[np.ndarray] = None
    objective_value: Optional[float] = None


_HIGHS_STATUS = {
    0: LpStatus.OPTIMAL,
    1: LpStatus.NUMERICAL_FAILURE,  # iteration limit
    2: LpStatus.INFEASIBLE,
    3: LpStatus.UNBOUNDED,
    4: LpStatus.NUMERICAL_FAILURE,
}


def solve(lp: LinearProgram) -> LpSolution:
    """Solve an LP; statuses are reported, never silently conflated."""
    lp.validate()
    if lp.objective is None:
        c = np.zeros(lp.n)
    elif lp.sense == "max":
        c = -np.asarray(lp.objective, dtype=float)
    else:
        c = np.asarray(lp.objective, dtype=float)
    bounds = lp.bounds if lp.bounds is not None else [(None, None)] * lp.n
    res = linprog(c, A_ub=lp.a_ub, b_ub=lp.b_ub, A_eq=lp.a_eq, b_eq=lp.b_eq,
                  bounds=bounds, method="highs")
    status = _HIGHS_STATUS.get(res.status, LpStatus.NUMERICAL_FAILURE)
    if status is not LpStatus.OPTIMAL:
        return LpSolution(status)
    value = float(res.fun)
    if lp.sense == "max":
        value = -value
    return LpSolution(LpStatus.OPTIMAL, np.asarray(res.x, dtype=float), value)


def chebyshev_center(H: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, float]:
    """Largest-inscribed-ball center and radius of {x | Hx <= h} via one LP.

    Raises ``EmptyPolytopeError`` / ``UnboundedPolytopeError`` accordingly.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    h = np.asarray(h, dtype=float).ravel()
    n = H.shape[1]
    norms = np.linalg.norm(H, axis=1)
    keep = norms > 1e-12
    if np.any(~keep & (h < -TOL_FEAS)):
        raise EmptyPolytopeError("polytope contains a trivially infeasible row")
    Hk, hk, nk = H[keep], h[keep], norms[keep]
    if Hk.shape[0] == 0:
        raise UnboundedPolytopeError("no constraints: unbounded polytope")
    a_ub = np.hstack([Hk, nk[:, None]])
    lp = LinearProgram(n=n + 1, objective=np.r_[np.zeros(n), 1.0],
                       a_ub=a_ub, b_ub=hk,
                       bounds=[(None, None)] * n + [(0.0, None)], sense="max")
    sol = solve(lp)
    if sol.status is LpStatus.INFEASIBLE:
        raise EmptyPolytopeError("empty polytope")
    if sol.status is LpStatus.UNBOUNDED:
        raise UnboundedPolytopeError("unbounded polytope: inscribed radius diverges")
    if sol.status is not LpStatus.OPTIMAL:
        raise LpError("chebyshev center LP failed numerically")
    return sol.point[:n], float(sol.objective_value)


class Var:
    """A named block of decision variables inside an :class:`LpBuilder`."""

    __slots__ = ("name", "offset", "size")

    def __init__(self, name: str, offset: int, size: int):
        self.name = name
        self.offset = offset
        self.size = size


class LpBuilder:
    """Incremental assembly of block-structured LPs.

    Terms are (Var, matrix) pairs; each constraint row block reads
    ``sum_v M_v @ x_v (<=|=) rhs``.  Assembled sparse so the zonotope
    containment programs with thousands of variables stay tractable.
    """

    def __init__(self):
        self._vars: list[Var] = []
        self._n = 0
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._ub_coo = ([], [], [])  # data, row, col
        self._ub_rhs: list[float] = []
        self._eq_coo = ([], [], [])
        self._eq_rhs: list[float] = []
        self._obj_terms: list[tuple[Var, np.ndarray]] = []
        self._sense = "feas"

    @property
    def num_vars(self) -> int:
        return self._n

    def var(self, name: str, size: int, lb: float = -np.inf, ub: float = np.inf) -> Var:
        v = Var(name, self._n, size)
        self._vars.append(v)
        self._n += size
        self._lb.extend([lb] * size)
        self._ub.extend([ub] * size)
        return v

    def set_bounds(self, v: Var, lb, ub) -> None:
        lb = np.broadcast_to(np.asarray(lb, dtype=float), (v.size,))
        ub = np.broadcast_to(np.asarray(ub, dtype=float), (v.size,))
        for i in range(v.size):
            self._lb[v.offset + i] = lb[i]
            self._ub[v.offset + i] = ub[i]

    def _append(self, coo, rhs_list, terms, rhs):
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        m = rhs.shape[0]
        row0 = len(rhs_list)
        data, rows, cols = coo
        for v, M in terms:
            M = np.atleast_2d(np.asarray(M, dtype=float))
            if M.shape != (m, v.size):
                raise ValueError(f"term for {v.name} has shape {M.shape}, expected {(m, v.size)}")
            r, c = np.nonzero(M)
            data.extend(M[r, c].tolist())
            rows.extend((r + row0).tolist())
            cols.extend((c + v.offset).tolist())
        rhs_list.extend(rhs.tolist())

    def ineq(self, terms: Sequence[tuple[Var, np.ndarray]], rhs) -> None:
        self._append(self._ub_coo, self._ub_rhs, terms, rhs)

    def eq(self, terms: Sequence[tuple[Var, np.ndarray]], rhs) -> None:
        self._append(self._eq_coo, self._eq_rhs, terms, rhs)

    def objective(self, terms: Sequence[tuple[Var, np.ndarray]], sense: str = "min") -> None:
        self._sense = sense
        self._obj_terms = list(terms)

    def _assemble_objective(self) -> Optional[np.ndarray]:
        if self._sense == "feas":
            return None
        c = np.zeros(self._n)
        for v, vec in self._obj_terms:
            vec = np.asarray(vec, dtype=float).ravel()
            if vec.shape[0] != v.size:
                raise ValueError(f"objective term for {v.name} has wrong length")
            c[v.offset:v.offset + v.size] += vec
        return c

    def _matrix(self, coo, nrows):
        data, rows, cols = coo
        if nrows == 0:
            return None
        return sp.coo_matrix((data, (rows, cols)), shape=(nrows, self._n)).tocsr()

    def build(self) -> LinearProgram:
        bounds = [(None if not np.isfinite(lo) else lo,
                   None if not np.isfinite(hi) else hi)
                  for lo, hi in zip(self._lb, self._ub)]
        return LinearProgram(
            n=self._n,
            objective=self._assemble_objective(),
            a_ub=self._matrix(self._ub_coo, len(self._ub_rhs)),
            b_ub=np.asarray(self._ub_rhs) if self._ub_rhs else None,
            a_eq=self._matrix(self._eq_coo, len(self._eq_rhs)),
            b_eq=np.asarray(self._eq_rhs) if self._eq_rhs else None,
            bounds=bounds,
            sense=self._sense,
        )

    def solve(self) -> tuple[LpStatus, Optional[dict], Optional[float]]:
        sol = solve(self.build())
        if sol.status is not LpStatus.OPTIMAL:
            return sol.status, None, None
        out = {v.name: sol.point[v.offset:v.offset + v.size] for v in self._vars}
        return sol.status, out, sol.objective_value
