"""Set-computation backends.

The polytope backend realizes every predecessor as a Fourier-Motzkin
projection of a lifted constraint system; the zonotope backend realizes it
through affine arithmetic plus inner intersection LPs.  Both expose the same
surface so the dual game and the alternating engine stay backend-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import (EMPTY, HPolytope, Zonotope, affine_map, bounding_box,
                       chebyshev_center_poly, containment_constraints,
                       contains_point, minkowski_sum, project,
                       reduce_zonotope_under, remove_redundancy,
                       sample_hpolytope, support, translate,
                       zonotope_intersection_under_many,
                       PROJECTION_DIM_CAP)
from .lp import LpBuilder, LpStatus, TOL_FEAS, LpError
from .system import (BackendAssumptionError, ControlSpace, MismatchModel,
                     SwitchedAffineSystem, UncertaintyModel)


@dataclass
class YHandle:
    """Observation-space predecessor handle: its set plus a feasible witness."""

    backend: str
    set: object           # HPolytope | Zonotope
    witness: np.ndarray


def _axis_dirs(n: int) -> np.ndarray:
    eye = np.eye(n)
    return np.vstack([eye, -eye])


def _norm_directions(n: int, kind: str) -> np.ndarray:
    """Unit directions whose support maximum defines the distance norm."""
    if kind == "l1" or n == 1:
        return _axis_dirs(n)
    if n == 2:
        ang = np.linspace(0.0, 2 * np.pi, 16, endpoint=False)
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    # Higher dimensions: axis directions plus normalized diagonal pairs.
    dirs = [d for d in _axis_dirs(n)]
    for i in range(n):
        for j in range(i + 1, n):
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                d = np.zeros(n)
                d[i], d[j] = si, sj
                dirs.append(d / np.sqrt(2.0))
    return np.asarray(dirs)


def _distance_objective(b: LpBuilder, x, xp, n: int, kind: str) -> None:
    """Append min-distance objective between variable blocks x and xp.

    'l1' uses split variables (exact 1-norm); 'l2poly' minimizes the maximum
    support over a direction fan, a polygonal Euclidean surrogate that stays
    a linear program.
    """
    if kind == "l1":
        t = b.var("dist_t", n, lb=0.0)
        eye = np.eye(n)
        b.ineq([(x, eye), (xp, -eye), (t, -eye)], np.zeros(n))
        b.ineq([(x, -eye), (xp, eye), (t, -eye)], np.zeros(n))
        b.objective([(t, np.ones(n))], "min")
        return
    dirs = _norm_directions(n, kind)
    t = b.var("dist_t", 1, lb=0.0)
    ones = np.ones((dirs.shape[0], 1))
    b.ineq([(x, dirs), (xp, -dirs), (t, -ones)], np.zeros(dirs.shape[0]))
    b.objective([(t, np.ones(1))], "min")


class PolytopeBackend:
    """H-polytope frames; exact predecessors up to the projection dim cap."""

    name = "polytope"

    def __init__(self, sys: SwitchedAffineSystem, unc: UncertaintyModel,
                 cspace: ControlSpace, domain: HPolytope,
                 mismatch: Optional[MismatchModel] = None,
                 restrict: Optional[HPolytope] = None,
                 dim_cap: int = PROJECTION_DIM_CAP,
                 dist_norm: str = "l2poly"):
        self.sys = sys
        self.unc = unc
        self.cspace = cspace
        self.domain = domain
        self.mismatch = mismatch
        self.restrict = restrict
        self.dim_cap = dim_cap
        self.dist_norm = dist_norm
        self._wx, self._ww, self._hw = self._norm_rows(unc.W.rows(), sys.n_x)
        self._vx, self._vv, self._gv = self._norm_rows(unc.V.rows(), sys.n_x)
        if mismatch is None:
            self._pverts = np.zeros((1, 0))
            self._mp = np.zeros((sys.n_x, 0))
        else:
            self._pverts = mismatch.P_vertices
            self._mp = mismatch.Mp

    @staticmethod
    def _norm_rows(rows, n_x):
        Mx, Mz, m = rows
        if Mx is None:
            Mx = np.zeros((Mz.shape[0], n_x))
        return Mx, Mz, m

    # -- target-row helpers -------------------------------------------------

    def _eroded(self, target: HPolytope) -> tuple[np.ndarray, np.ndarray]:
        """Target rows with the worst-case q contribution subtracted."""
        H, h = target.H, target.h
        mm = self.mismatch
        if mm is None or mm.trivial_q:
            return H, h
        shifts = H @ (mm.Mq @ mm.Q_vertices.T)
        return H, h - shifts.max(axis=1)

    def canonical_frame(self, X: HPolytope):
        P = X.intersect(self.domain)
        if self.restrict is not None:
            P = P.intersect(self.restrict)
        return remove_redundancy(P)

    # -- predecessor projections -------------------------------------------

    def _project_block(self, target: HPolytope, s: int, u: np.ndarray,
                       with_y: bool, with_v: bool):
        """FM projection of one (mode, control-vertex) lifted block.

        Variable layout: [y?] x [v?] w_0 .. w_{P-1}; keeps y when with_y,
        else keeps x.
        """
        sys = self.sys
        m = sys.modes[s]
        Ht, ht = self._eroded(target)
        nP = max(1, self._pverts.shape[0])
        n_x, n_w, n_v, n_y = sys.n_x, sys.n_w, sys.n_v, sys.n_y
        off_y = 0
        off_x = (n_y if with_y else 0)
        off_v = off_x + n_x
        off_w0 = off_v + (n_v if with_v else 0)
        total = off_w0 + nP * n_w
        if total > self.dim_cap:
            raise BackendAssumptionError(
                f"lifted block dimension {total} exceeds the projection cap "
                f"{self.dim_cap}; use the zonotope backend")
        rows, rhs = [], []

        def emit(mat_y, mat_x, mat_v, w_mats, b):
            mrows = b.shape[0]
            R = np.zeros((mrows, total))
            if with_y and mat_y is not None:
                R[:, off_y:off_y + n_y] = mat_y
            if mat_x is not None:
                R[:, off_x:off_x + n_x] = mat_x
            if with_v and mat_v is not None:
                R[:, off_v:off_v + n_v] = mat_v
            for i, Wm in w_mats:
                R[:, off_w0 + i * n_w: off_w0 + (i + 1) * n_w] = Wm
            rows.append(R)
            rhs.append(b)

        base = m.B @ u + m.K
        for i in range(nP):
            shift = base + (self._mp @ self._pverts[i] if self._mp.shape[1] else 0.0)
            emit(None, Ht @ m.A, None, [(i, Ht @ m.E)], ht - Ht @ shift)
            emit(None, self._wx, None, [(i, self._ww)], self._hw)
        if with_v:
            emit(None, self._vx, self._vv, [], self._gv)
        if with_y:
            # C x + D u + F v = y, as two inequality blocks.
            du = self.sys.D @ u
            emit(-np.eye(n_y), sys.C, sys.F, [], -du)
            emit(np.eye(n_y), -sys.C, -sys.F, [], du)
            # x stays a state of the declared domain (and restriction).
            emit(None, self.domain.H, None, [], self.domain.h)
            if self.restrict is not None:
                emit(None, self.restrict.H, None, [], self.restrict.h)
        lifted = HPolytope(np.vstack(rows), np.concatenate(rhs))
        keep = (list(range(n_y)) if with_y
                else list(range(off_x, off_x + n_x)))
        return project(lifted, keep, dim_cap=max(self.dim_cap, total))

    def epre(self, D: HPolytope):
        """Environment-forced predecessor: for every control some disturbance
        reaches D; exact via per-(mode, vertex) projections intersected."""
        pieces = []
        for s in self.cspace.modes:
            for u in self.cspace.vertices():
                piece = self._project_block(D, s, u, with_y=False, with_v=False)
                if piece is EMPTY:
                    return EMPTY
                pieces.append(piece)
        out = pieces[0]
        for piece in pieces[1:]:
            out = out.intersect(piece)
        out = out.intersect(self.domain)
        if self.restrict is not None:
            out = out.intersect(self.restrict)
        return remove_redundancy(out)

    def epre_y(self, Xk: HPolytope, u_vertices: np.ndarray):
        """Observation-space predecessor for a control piece.

        Returns (handle | None).  A joint feasibility LP over all
        (mode, vertex) copies gates the expensive projection.
        """
        witness = self._epre_y_witness(Xk, u_vertices)
        if witness is None:
            return None
        pieces = []
        for s in self.cspace.modes:
            for u in u_vertices:
                piece = self._project_block(Xk, s, u, with_y=True, with_v=True)
                if piece is EMPTY:
                    return None
                pieces.append(piece)
        Y = pieces[0]
        for piece in pieces[1:]:
            Y = Y.intersect(piece)
        Y = remove_redundancy(Y)
        if Y is EMPTY:
            return None
        return YHandle(self.name, Y, witness)

    def _epre_y_witness(self, Xk: HPolytope, u_vertices) -> Optional[np.ndarray]:
        sys = self.sys
        b = LpBuilder()
        y = b.var("y", sys.n_y)
        Ht, ht = self._eroded(Xk)
        nP = max(1, self._pverts.shape[0])
        for s in self.cspace.modes:
            m = sys.modes[s]
            for j, u in enumerate(u_vertices):
                x = b.var(f"x_{s}_{j}", sys.n_x)
                v = b.var(f"v_{s}_{j}", sys.n_v)
                base = m.B @ u + m.K
                for i in range(nP):
                    w = b.var(f"w_{s}_{j}_{i}", sys.n_w)
                    shift = base + (self._mp @ self._pverts[i] if self._mp.shape[1] else 0.0)
                    b.ineq([(x, Ht @ m.A), (w, Ht @ m.E)], ht - Ht @ shift)
                    b.ineq([(x, self._wx), (w, self._ww)], self._hw)
                b.ineq([(x, self._vx), (v, self._vv)], self._gv)
                b.eq([(x, sys.C), (v, sys.F), (y, -np.eye(sys.n_y))], -sys.D @ u)
                b.ineq([(x, self.domain.H)], self.domain.h)
                if self.restrict is not None:
                    b.ineq([(x, self.restrict.H)], self.restrict.h)
        status, out, _ = b.solve()
        if status is not LpStatus.OPTIMAL:
            return None
        return out["y"]

    def pre_y_pi(self, Xk: HPolytope, ybar: np.ndarray, s: int, u: np.ndarray):
        """States measurement-consistent with ybar from which some disturbance
        reaches Xk under the queried action."""
        sys = self.sys
        m = sys.modes[s]
        Ht, ht = self._eroded(Xk)
        nP = max(1, self._pverts.shape[0])
        n_x, n_w, n_v = sys.n_x, sys.n_w, sys.n_v
        total = n_x + n_v + nP * n_w
        if total > self.dim_cap:
            raise BackendAssumptionError(
                f"lifted block dimension {total} exceeds the projection cap")
        rows, rhs = [], []
        base = m.B @ u + m.K

        def emit(mat_x, mat_v, w_mats, b_):
            R = np.zeros((b_.shape[0], total))
            if mat_x is not None:
                R[:, :n_x] = mat_x
            if mat_v is not None:
                R[:, n_x:n_x + n_v] = mat_v
            for i, Wm in w_mats:
                R[:, n_x + n_v + i * n_w: n_x + n_v + (i + 1) * n_w] = Wm
            rows.append(R)
            rhs.append(b_)

        for i in range(nP):
            shift = base + (self._mp @ self._pverts[i] if self._mp.shape[1] else 0.0)
            emit(Ht @ m.A, None, [(i, Ht @ m.E)], ht - Ht @ shift)
            emit(self._wx, None, [(i, self._ww)], self._hw)
        emit(self._vx, self._vv, [], self._gv)
        resid = ybar - sys.D @ u
        emit(sys.C, sys.F, [], resid)
        emit(-sys.C, -sys.F, [], -resid)
        lifted = HPolytope(np.vstack(rows), np.concatenate(rhs))
        X = project(lifted, list(range(n_x)), dim_cap=max(self.dim_cap, total))
        if X is EMPTY:
            return EMPTY
        X = X.intersect(self.domain)
        if self.restrict is not None:
            X = X.intersect(self.restrict)
        return remove_redundancy(X)

    # -- point operations ----------------------------------------------------

    def one_step_x_set(self, target: HPolytope, s: int, u: np.ndarray) -> object:
        """{x | exists w in W(x) (robust to q): f(x,u,w) in target}."""
        return self._project_block(target, s, u, with_y=False, with_v=False)

    def meas_x_set(self, ybar: np.ndarray, u: np.ndarray) -> object:
        """{x | exists v in V(x): C x + D u + F v = ybar}."""
        sys = self.sys
        n_x, n_v = sys.n_x, sys.n_v
        resid = ybar - sys.D @ u
        rows = [np.hstack([self._vx, self._vv]),
                np.hstack([sys.C, sys.F]),
                np.hstack([-sys.C, -sys.F])]
        rhs = [self._gv, resid, -resid]
        lifted = HPolytope(np.vstack(rows), np.concatenate(rhs))
        return project(lifted, list(range(n_x)),
                       dim_cap=max(self.dim_cap, n_x + n_v))

    def w_step(self, x, s, u, target: HPolytope, p=None) -> Optional[np.ndarray]:
        """Max-margin disturbance driving f(x, u, w) into the target."""
        sys = self.sys
        m = sys.modes[s]
        Ht, ht = self._eroded(target)
        x = np.asarray(x, dtype=float).ravel()
        shift = m.A @ x + m.B @ np.asarray(u, dtype=float).ravel() + m.K
        if p is not None and self._mp.shape[1]:
            shift = shift + self._mp @ np.asarray(p, dtype=float).ravel()
        b = LpBuilder()
        w = b.var("w", sys.n_w)
        sig = b.var("sig", 1, lb=0.0)
        norms = np.linalg.norm(Ht, axis=1)
        b.ineq([(w, Ht @ m.E), (sig, norms[:, None])], ht - Ht @ shift)
        b.ineq([(w, self._ww)], self._hw - self._wx @ x)
        b.objective([(sig, np.ones(1))], "max")
        status, out, _ = b.solve()
        if status is not LpStatus.OPTIMAL:
            return None
        return out["w"]

    def v_for_y(self, x, ybar, u) -> Optional[np.ndarray]:
        """Max-margin noise realizing the observation ybar at state x."""
        sys = self.sys
        x = np.asarray(x, dtype=float).ravel()
        resid = (np.asarray(ybar, dtype=float).ravel() - sys.C @ x
                 - sys.D @ np.asarray(u, dtype=float).ravel())
        b = LpBuilder()
        v = b.var("v", sys.n_v)
        sig = b.var("sig", 1, lb=0.0)
        norms = np.linalg.norm(self._vv, axis=1)
        b.eq([(v, sys.F)], resid)
        b.ineq([(v, self._vv), (sig, norms[:, None])], self._gv - self._vx @ x)
        b.objective([(sig, np.ones(1))], "max")
        status, out, _ = b.solve()
        if status is not LpStatus.OPTIMAL:
            return None
        return out["v"]

    # -- frame utilities -----------------------------------------------------

    def frame_is_empty(self, X) -> bool:
        from .geometry import is_empty
        return is_empty(X)

    def frame_intersects(self, X: HPolytope, other: HPolytope) -> bool:
        from .geometry import is_empty
        return not is_empty(X.intersect(other))

    def frame_intersection_point(self, X: HPolytope, other: HPolytope):
        try:
            c, _ = chebyshev_center_poly(X.intersect(other))
            return c
        except Exception:
            return None

    def frame_interior_point(self, X: HPolytope) -> np.ndarray:
        c, _ = chebyshev_center_poly(X)
        return c

    def support_profile(self, X) -> np.ndarray:
        dirs = _axis_dirs(self.sys.n_x)
        return np.array([support(X, d) for d in dirs])

    def sample_frame(self, X, n: int, rng) -> np.ndarray:
        return sample_hpolytope(X, n, rng)

    def frame_contains(self, X, pt, tol=TOL_FEAS) -> bool:
        return contains_point(X, pt, tol)

    # -- query-point heuristic -----------------------------------------------

    def y_center(self, handle: YHandle) -> np.ndarray:
        c, _ = chebyshev_center_poly(handle.set)
        return c

    def y_close(self, handle: YHandle, X_init: HPolytope) -> np.ndarray:
        """Feasible observation whose consistency set is closest to the
        initial set, in a polyhedral norm, via a single LP."""
        sys = self.sys
        if np.any(sys.D != 0.0):
            raise BackendAssumptionError("query heuristic requires D = 0")
        Y: HPolytope = handle.set
        b = LpBuilder()
        y = b.var("y", sys.n_y)
        x = b.var("x", sys.n_x)
        v = b.var("v", sys.n_v)
        xp = b.var("xp", sys.n_x)
        b.ineq([(y, Y.H)], Y.h)
        b.eq([(x, sys.C), (v, sys.F), (y, -np.eye(sys.n_y))], np.zeros(sys.n_y))
        b.ineq([(x, self._vx), (v, self._vv)], self._gv)
        b.ineq([(xp, X_init.H)], X_init.h)
        _distance_objective(b, x, xp, sys.n_x, self.dist_norm)
        status, out, _ = b.solve()
        if status is not LpStatus.OPTIMAL:
            return handle.witness
        return out["y"]

    def y_in_handle(self, handle: YHandle, y, tol=TOL_FEAS) -> bool:
        return contains_point(handle.set, y, tol)


class ZonotopeBackend:
    """Zonotope frames; scales past the projection cap via inner LPs."""

    name = "zonotope"

    def __init__(self, sys: SwitchedAffineSystem, unc: UncertaintyModel,
                 cspace: ControlSpace, domain: Optional[HPolytope] = None,
                 mismatch: Optional[MismatchModel] = None,
                 restrict: Optional[HPolytope] = None,
                 order_cap: Optional[int] = None,
                 dist_norm: str = "l2poly"):
        self.dist_norm = dist_norm
        sys.check_zonotope_assumptions()
        if restrict is not None:
            raise BackendAssumptionError(
                "restricted (reach-avoid) expansion is polytope-backend only")
        if unc.W.state_dependent or unc.V.state_dependent:
            raise BackendAssumptionError(
                "zonotope backend requires state-independent uncertainty sets")
        self.sys = sys
        self.unc = unc
        self.cspace = cspace
        self.domain = domain
        self.mismatch = mismatch
        self.order_cap = order_cap if order_cap is not None else max(8 * sys.n_x, 24)
        self.Wz = unc.W.zonotope_form()
        self.Vz = unc.V.zonotope_form()
        self.FVz = affine_map(sys.F, self.Vz)
        self._ainv = {s: np.linalg.inv(m.A) for s, m in sys.modes.items()}
        self._minus_ew = {s: affine_map(-m.E, self.Wz) for s, m in sys.modes.items()}
        if mismatch is None:
            self._pverts = np.zeros((1, 0))
            self._mp = np.zeros((sys.n_x, 0))
        else:
            self._pverts = mismatch.P_vertices
            self._mp = mismatch.Mp
            if not mismatch.trivial_q:
                self._qzono = self._q_zonotope(mismatch)

    def _q_zonotope(self, mm: MismatchModel) -> Zonotope:
        box = getattr(mm, "Q_box", None)
        if box is None:
            raise BackendAssumptionError(
                "zonotope backend needs a box form for the q uncertainty")
        return affine_map(mm.Mq, Zonotope.from_box(box))

    def canonical_frame(self, X) -> Zonotope:
        if isinstance(X, Zonotope):
            return X
        raise BackendAssumptionError("zonotope backend frames must be zonotopes")

    def _erode_q_inner(self, Z: Zonotope):
        """Inner approximation of {z | z + MqQ inside Z} via a containment LP.

        Maximizes per-dimension scales of Z's own generators such that the
        scaled zonotope Minkowski-summed with the q-injection zonotope stays
        inside Z; the summed generators ride along at unit scale.
        """
        mm = self.mismatch
        if mm is None or mm.trivial_q:
            return Z
        Q = self._qzono
        b = LpBuilder()
        lam = b.var("lam", Z.dim, lb=0.0, ub=1.0)
        csum = b.var("csum", Z.dim)
        T = np.hstack([Z.G, Q.G])
        containment_constraints(b, lam, csum, T, Z, tag="_erode",
                                unit_cols=Q.G.shape[1])
        b.objective([(lam, np.ones(Z.dim))], "max")
        status, out, _ = b.solve()
        if status is not LpStatus.OPTIMAL:
            return EMPTY
        G = Z.G * out["lam"][:, None]
        keep = np.linalg.norm(G, axis=0) > 1e-11
        return Zonotope(G[:, keep], out["csum"] - Q.c)

    def _pre_operands(self, target: Zonotope, s: int, u: np.ndarray) -> list:
        """Per-p operand zonotopes A^-1(target (-) qQ (+) -EW - Bu - K - Mp p)."""
        m = self.sys.modes[s]
        tgt = self._erode_q_inner(target)
        if tgt is EMPTY:
            return []
        base = minkowski_sum(tgt, self._minus_ew[s])
        shift0 = -(m.B @ np.asarray(u, dtype=float).ravel() + m.K)
        out = []
        nP = max(1, self._pverts.shape[0])
        for i in range(nP):
            shift = shift0 - (self._mp @ self._pverts[i] if self._mp.shape[1] else 0.0)
            out.append(affine_map(self._ainv[s], translate(base, shift)))
        return out

    def epre(self, D: Zonotope):
        operands = []
        for s in self.cspace.modes:
            for u in self.cspace.vertices():
                ops = self._pre_operands(D, s, u)
                if not ops:
                    return EMPTY
                operands.extend(ops)
        out = zonotope_intersection_under_many(operands, order_cap=self.order_cap)
        if out is EMPTY:
            return EMPTY
        return reduce_zonotope_under(out, self.order_cap)

    def epre_y(self, Xk: Zonotope, u_vertices: np.ndarray):
        per_su = []
        for s in self.cspace.modes:
            for u in u_vertices:
                ops = self._pre_operands(Xk, s, u)
                if not ops:
                    return None
                Xsu = (ops[0] if len(ops) == 1 else
                       zonotope_intersection_under_many(ops, order_cap=self.order_cap))
                if Xsu is EMPTY:
                    return None
                Du = self.sys.D @ np.asarray(u, dtype=float).ravel()
                per_su.append(translate(minkowski_sum(Xsu, self.FVz), Du))
        Y = (per_su[0] if len(per_su) == 1 else
             zonotope_intersection_under_many(per_su, order_cap=self.order_cap))
        if Y is EMPTY:
            return None
        Y = reduce_zonotope_under(Y, self.order_cap)
        witness = self.epre_y_witness_lp(Xk, u_vertices)
        if witness is None:
            witness = np.array(Y.c)
        return YHandle(self.name, Y, witness)

    def epre_y_witness_lp(self, Xk: Zonotope, u_vertices) -> Optional[np.ndarray]:
        """Joint feasibility LP in zonotope coordinates (plain dynamics)."""
        if self.mismatch is not None:
            return None
        sys = self.sys
        b = LpBuilder()
        y = b.var("y", sys.n_y)
        for s in self.cspace.modes:
            m = sys.modes[s]
            for j, u in enumerate(u_vertices):
                x = b.var(f"x_{s}_{j}", sys.n_x)
                xi = b.var(f"xi_{s}_{j}", Xk.num_generators, lb=-1.0, ub=1.0)
                om = b.var(f"om_{s}_{j}", self.Wz.num_generators, lb=-1.0, ub=1.0)
                nu = b.var(f"nu_{s}_{j}", self.Vz.num_generators, lb=-1.0, ub=1.0)
                # A x + B u + K + E (Gw om + cw) = Gx xi + cx
                rhs = Xk.c - m.B @ u - m.K - m.E @ self.Wz.c
                b.eq([(x, m.A), (om, m.E @ self.Wz.G), (xi, -Xk.G)], rhs)
                # C x + D u + F (Gv nu + cv) = y
                rhs2 = -sys.D @ u - sys.F @ self.Vz.c
                b.eq([(x, sys.C), (nu, sys.F @ self.Vz.G), (y, -np.eye(sys.n_y))], rhs2)
        status, out, _ = b.solve()
        if status is not LpStatus.OPTIMAL:
            return None
        return out["y"]

    def pre_y_pi(self, Xk: Zonotope, ybar: np.ndarray, s: int, u: np.ndarray):
        ops = self._pre_operands(Xk, s, u)
        if not ops:
            return EMPTY
        Z1 = (ops[0] if len(ops) == 1 else
              zonotope_intersection_under_many(ops, order_cap=self.order_cap))
        if Z1 is EMPTY:
            return EMPTY
        u = np.asarray(u, dtype=float).ravel()
        Z2 = translate(affine_map(-self.sys.F, self.Vz),
                       np.asarray(ybar, dtype=float).ravel() - self.sys.D @ u)
        out = zonotope_intersection_under_many([Z1, Z2], order_cap=self.order_cap)
        if out is EMPTY:
            return EMPTY
        return reduce_zonotope_under(out, self.order_cap)

    # -- point operations ----------------------------------------------------

    def w_step(self, x, s, u, target: Zonotope, p=None) -> Optional[np.ndarray]:
        sys = self.sys
        m = sys.modes[s]
        x = np.asarray(x, dtype=float).ravel()
        shift = m.A @ x + m.B @ np.asarray(u, dtype=float).ravel() + m.K
        if p is not None and self._mp.shape[1]:
            shift = shift + self._mp @ np.asarray(p, dtype=float).ravel()
        tgt = self._erode_q_inner(target)
        if tgt is EMPTY:
            return None
        b = LpBuilder()
        om = b.var("om", self.Wz.num_generators, lb=-1.0, ub=1.0)
        xi = b.var("xi", tgt.num_generators, lb=-1.0, ub=1.0)
        sig = b.var("sig", 1, lb=0.0, ub=1.0)
        rhs = tgt.c - shift - m.E @ self.Wz.c
        b.eq([(om, m.E @ self.Wz.G), (xi, -tgt.G)], rhs)
        ones_xi = np.ones((tgt.num_generators, 1))
        eye_xi = np.eye(tgt.num_generators)
        b.ineq([(xi, eye_xi), (sig, ones_xi)], np.ones(tgt.num_generators))
        b.ineq([(xi, -eye_xi), (sig, ones_xi)], np.ones(tgt.num_generators))
        b.objective([(sig, np.ones(1))], "max")
        status, out, _ = b.solve()
        if status is not LpStatus.OPTIMAL:
            return None
        return self.Wz.G @ out["om"] + self.Wz.c

    def v_for_y(self, x, ybar, u) -> Optional[np.ndarray]:
        sys = self.sys
        x = np.asarray(x, dtype=float).ravel()
        resid = (np.asarray(ybar, dtype=float).ravel() - sys.C @ x
                 - sys.D @ np.asarray(u, dtype=float).ravel()
                 - sys.F @ self.Vz.c)
        b = LpBuilder()
        nu = b.var("nu", self.Vz.num_generators, lb=-1.0, ub=1.0)
        sig = b.var("sig", 1, lb=0.0, ub=1.0)
        b.eq([(nu, sys.F @ self.Vz.G)], resid)
        ones = np.ones((self.Vz.num_generators, 1))
        eye = np.eye(self.Vz.num_generators)
        b.ineq([(nu, eye), (sig, ones)], np.ones(self.Vz.num_generators))
        b.ineq([(nu, -eye), (sig, ones)], np.ones(self.Vz.num_generators))
        b.objective([(sig, np.ones(1))], "max")
        status, out, _ = b.solve()
        if status is not LpStatus.OPTIMAL:
            return None
        return self.Vz.G @ out["nu"] + self.Vz.c

    # -- frame utilities -----------------------------------------------------

    def frame_is_empty(self, X) -> bool:
        return X is EMPTY

    def frame_intersects(self, Z: Zonotope, other: HPolytope) -> bool:
        b = LpBuilder()
        th = b.var("th", Z.num_generators, lb=-1.0, ub=1.0)
        x = b.var("x", Z.dim)
        b.eq([(x, np.eye(Z.dim)), (th, -Z.G)], Z.c)
        b.ineq([(x, other.H)], other.h)
        status, _, _ = b.solve()
        return status is LpStatus.OPTIMAL

    def frame_intersection_point(self, Z: Zonotope, other: HPolytope):
        """Frame center projected into the intersection by a 1-norm LP."""
        b = LpBuilder()
        th = b.var("th", Z.num_generators, lb=-1.0, ub=1.0)
        x = b.var("x", Z.dim)
        t = b.var("t", Z.dim, lb=0.0)
        b.eq([(x, np.eye(Z.dim)), (th, -Z.G)], Z.c)
        b.ineq([(x, other.H)], other.h)
        eye = np.eye(Z.dim)
        b.ineq([(x, eye), (t, -eye)], Z.c)
        b.ineq([(x, -eye), (t, -eye)], -Z.c)
        b.objective([(t, np.ones(Z.dim))], "min")
        status, out, _ = b.solve()
        if status is not LpStatus.OPTIMAL:
            return None
        return out["x"]

    def frame_interior_point(self, Z: Zonotope) -> np.ndarray:
        return np.array(Z.c)

    def support_profile(self, Z) -> np.ndarray:
        dirs = _axis_dirs(self.sys.n_x)
        return np.array([support(Z, d) for d in dirs])

    def sample_frame(self, Z: Zonotope, n: int, rng) -> np.ndarray:
        return Z.sample(n, rng)

    def frame_contains(self, Z, pt, tol=TOL_FEAS) -> bool:
        return contains_point(Z, pt, tol)

    # -- query-point heuristic -----------------------------------------------

    def y_center(self, handle: YHandle) -> np.ndarray:
        return np.array(handle.set.c)

    def y_close(self, handle: YHandle, X_init: HPolytope) -> np.ndarray:
        sys = self.sys
        if np.any(sys.D != 0.0):
            raise BackendAssumptionError("query heuristic requires D = 0")
        Y: Zonotope = handle.set
        b = LpBuilder()
        thy = b.var("thy", Y.num_generators, lb=-1.0, ub=1.0)
        y = b.var("y", sys.n_y)
        nu = b.var("nu", self.Vz.num_generators, lb=-1.0, ub=1.0)
        x = b.var("x", sys.n_x)
        xp = b.var("xp", sys.n_x)
        b.eq([(y, np.eye(sys.n_y)), (thy, -Y.G)], Y.c)
        # x = y - F v  (C = I)
        b.eq([(x, np.eye(sys.n_x)), (nu, sys.F @ self.Vz.G), (y, -np.eye(sys.n_y))],
             -sys.F @ self.Vz.c)
        b.ineq([(xp, X_init.H)], X_init.h)
        _distance_objective(b, x, xp, sys.n_x, self.dist_norm)
        status, out, _ = b.solve()
        if status is not LpStatus.OPTIMAL:
            return np.array(handle.witness)
        return out["y"]

    def y_in_handle(self, handle: YHandle, y, tol=TOL_FEAS) -> bool:
        return contains_point(handle.set, y, tol)


def make_backend(kind: str, sys, unc, cspace, domain, mismatch=None,
                 restrict=None, dim_cap: int = PROJECTION_DIM_CAP,
                 order_cap: Optional[int] = None, dist_norm: str = "l2poly"):
    if kind == "polytope":
        return PolytopeBackend(sys, unc, cspace, domain, mismatch=mismatch,
                               restrict=restrict, dim_cap=dim_cap,
                               dist_norm=dist_norm)
    if kind == "zonotope":
        return ZonotopeBackend(sys, unc, cspace, domain, mismatch=mismatch,
                               restrict=restrict, order_cap=order_cap,
                               dist_norm=dist_norm)
    raise ValueError(f"unknown backend {kind!r}")
