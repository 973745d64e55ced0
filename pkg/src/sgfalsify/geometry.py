"""Polytope and zonotope set representations and the operations on them.

H-polytopes {x | Hx <= h} carry the polytope-backend frames, zonotopes
<G, c> = {G theta + c | theta in [-1,1]^N} the zonotope-backend frames.
Both are immutable value types; all operations are pure functions.
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

import numpy as np

from .lp import (LinearProgram, LpBuilder, LpStatus, TOL_FEAS,
                 EmptyPolytopeError, UnboundedPolytopeError, LpError,
                 chebyshev_center as _cheb, solve)

# Default cap on the total dimension Fourier-Motzkin projection will accept.
PROJECTION_DIM_CAP = 12

_ZTOL = 1e-11


class DimensionError(ValueError):
    pass


class ProjectionDimensionError(ValueError):
    """Raised when a projection exceeds the configured dimension cap."""


class _EmptySet:
    """First-class empty-set marker, distinguishable from any nonempty set."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EMPTY"

    def __bool__(self):
        return False


EMPTY = _EmptySet()


def _ro(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class HPolytope:
    """The set {x | Hx <= h}."""

    __slots__ = ("H", "h")

    def __init__(self, H, h):
        H = np.atleast_2d(np.asarray(H, dtype=float))
        h = np.asarray(h, dtype=float).ravel()
        if H.shape[0] != h.shape[0]:
            raise DimensionError("row count of H must equal length of h")
        self.H = _ro(H)
        self.h = _ro(h)

    @property
    def dim(self) -> int:
        return self.H.shape[1]

    @property
    def nrows(self) -> int:
        return self.H.shape[0]

    @classmethod
    def from_box(cls, bounds: Sequence[Sequence[float]]) -> "HPolytope":
        """Axis-aligned box from [(lo, hi), ...]."""
        bounds = np.asarray(bounds, dtype=float)
        n = bounds.shape[0]
        H = np.vstack([np.eye(n), -np.eye(n)])
        h = np.concatenate([bounds[:, 1], -bounds[:, 0]])
        return cls(H, h)

    def intersect(self, other: "HPolytope") -> "HPolytope":
        if other.dim != self.dim:
            raise DimensionError("dimension mismatch in intersection")
        return HPolytope(np.vstack([self.H, other.H]),
                         np.concatenate([self.h, other.h]))

    def with_rows(self, A, b) -> "HPolytope":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        return HPolytope(np.vstack([self.H, A]), np.concatenate([self.h, b]))

    def __repr__(self):
        return f"HPolytope(dim={self.dim}, rows={self.nrows})"


class VPolytope:
    """Convex hull of a finite vertex list; duplicates pruned on construction."""

    __slots__ = ("vertices",)

    def __init__(self, vertices):
        V = np.atleast_2d(np.asarray(vertices, dtype=float))
        if V.shape[0] == 0:
            raise ValueError("vertex list must be nonempty")
        _, idx = np.unique(np.round(V, 12), axis=0, return_index=True)
        self.vertices = _ro(V[np.sort(idx)])

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def contains(self, p, tol: float = TOL_FEAS) -> bool:
        p = np.asarray(p, dtype=float).ravel()
        m = self.vertices.shape[0]
        b = LpBuilder()
        a = b.var("alpha", m, lb=0.0)
        b.eq([(a, self.vertices.T)], p)
        b.eq([(a, np.ones((1, m)))], [1.0])
        status, _, _ = b.solve()
        return status is LpStatus.OPTIMAL

    def clamp_1norm(self, p) -> np.ndarray:
        """Nearest point of the hull to p in the 1-norm, via one LP."""
        p = np.asarray(p, dtype=float).ravel()
        n, m = self.dim, self.vertices.shape[0]
        b = LpBuilder()
        a = b.var("alpha", m, lb=0.0)
        u = b.var("u", n)
        t = b.var("t", n, lb=0.0)
        b.eq([(a, self.vertices.T), (u, -np.eye(n))], np.zeros(n))
        b.eq([(a, np.ones((1, m)))], [1.0])
        b.ineq([(u, np.eye(n)), (t, -np.eye(n))], p)
        b.ineq([(u, -np.eye(n)), (t, -np.eye(n))], -p)
        b.objective([(t, np.ones(n))], "min")
        status, out, _ = b.solve()
        if status is not LpStatus.OPTIMAL:
            raise LpError("1-norm clamp LP failed")
        return out["u"]


class Zonotope:
    """The set {G theta + c | theta in [-1,1]^N}; zero generators allowed."""

    __slots__ = ("G", "c")

    def __init__(self, G, c):
        c = np.asarray(c, dtype=float).ravel()
        G = np.asarray(G, dtype=float)
        if G.size == 0:
            G = np.zeros((c.shape[0], 0))
        G = np.atleast_2d(G)
        if G.shape[0] != c.shape[0]:
            raise DimensionError("generator matrix rows must match center length")
        self.G = _ro(G)
        self.c = _ro(c)

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    @property
    def num_generators(self) -> int:
        return self.G.shape[1]

    @classmethod
    def from_box(cls, bounds: Sequence[Sequence[float]]) -> "Zonotope":
        bounds = np.asarray(bounds, dtype=float)
        c = bounds.mean(axis=1)
        half = (bounds[:, 1] - bounds[:, 0]) / 2.0
        keep = half > _ZTOL
        G = np.diag(half)[:, keep]
        return cls(G, c)

    @classmethod
    def point(cls, c) -> "Zonotope":
        c = np.asarray(c, dtype=float).ravel()
        return cls(np.zeros((c.shape[0], 0)), c)

    def bounding_box(self) -> np.ndarray:
        half = np.abs(self.G).sum(axis=1)
        return np.stack([self.c - half, self.c + half], axis=1)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        theta = rng.uniform(-1.0, 1.0, size=(n, self.num_generators))
        return theta @ self.G.T + self.c

    def __repr__(self):
        return f"Zonotope(dim={self.dim}, gens={self.num_generators})"


# ---------------------------------------------------------------------------
# zonotope operations


def affine_map(M, Z: Zonotope) -> Zonotope:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] != Z.dim:
        raise DimensionError("map column count must equal zonotope dimension")
    return Zonotope(M @ Z.G, M @ Z.c)


def minkowski_sum(Z1: Zonotope, Z2: Zonotope) -> Zonotope:
    if Z1.dim != Z2.dim:
        raise DimensionError("dimension mismatch in Minkowski sum")
    return Zonotope(np.hstack([Z1.G, Z2.G]), Z1.c + Z2.c)


def translate(Z: Zonotope, t) -> Zonotope:
    return Zonotope(Z.G, Z.c + np.asarray(t, dtype=float).ravel())


def reduce_zonotope_under(Z: Zonotope, max_generators: int) -> Zonotope:
    """Sound inner reduction: drop the smallest-norm generators.

    Any column subset of G yields a subset of the zonotope, so the result is
    always contained in Z.
    """
    if Z.num_generators <= max_generators:
        return Z
    norms = np.linalg.norm(Z.G, axis=0)
    order = np.argsort(-norms, kind="stable")[:max_generators]
    return Zonotope(Z.G[:, np.sort(order)], Z.c)


def containment_constraints(builder: LpBuilder, lam, center_var,
                            template_G: np.ndarray, outer: Zonotope,
                            tag: str = "", unit_cols: int = 0) -> None:
    """Append linear constraints sufficient for <diag(lam) T, c> within outer.

    ``lam`` is a diagonal-scale variable block (or None for unit scale) and
    ``center_var`` the center variable block.  Encodes the generator-mixing
    certificate: diag(lam) T = Go Gamma, c - co = Go beta, and row-wise
    |Gamma| 1 + |beta| <= 1, with absolute values linearized by majorants.
    The trailing ``unit_cols`` template columns are carried at unit scale
    (used for Minkowski-summed fixed generators, e.g. erosion programs).
    """
    T = np.atleast_2d(np.asarray(template_G, dtype=float))
    n, nt = T.shape
    if outer.dim != n:
        raise DimensionError("dimension mismatch in containment constraints")
    Go, co = outer.G, outer.c
    ng = Go.shape[1]
    gamma = builder.var(f"gamma{tag}", ng * nt)
    gamma_abs = builder.var(f"gamma_abs{tag}", ng * nt, lb=0.0)
    beta = builder.var(f"beta{tag}", ng)
    beta_abs = builder.var(f"beta_abs{tag}", ng, lb=0.0)

    # diag(lam) T = Go Gamma   (row i of LHS is lam_i * T[i, :])
    # Gamma stored row-major: gamma[g * nt + j] = Gamma[g, j]
    go_expand = np.zeros((n * nt, ng * nt))
    for g in range(ng):
        for i in range(n):
            go_expand[i * nt:(i + 1) * nt, g * nt:(g + 1) * nt] += Go[i, g] * np.eye(nt)
    n_scaled = nt - unit_cols
    lam_expand = np.zeros((n * nt, n))
    unit_rhs = np.zeros(n * nt)
    for i in range(n):
        lam_expand[i * nt:i * nt + n_scaled, i] = T[i, :n_scaled]
        unit_rhs[i * nt + n_scaled:(i + 1) * nt] = T[i, n_scaled:]
    if lam is None:
        builder.eq([(gamma, go_expand)], lam_expand.sum(axis=1) + unit_rhs)
    else:
        builder.eq([(lam, lam_expand), (gamma, -go_expand)], -unit_rhs)

    # c - co = Go beta
    builder.eq([(center_var, np.eye(n)), (beta, -Go)], co)

    # absolute-value majorants and the row-sum bound
    eye = np.eye(ng * nt)
    builder.ineq([(gamma, eye), (gamma_abs, -eye)], np.zeros(ng * nt))
    builder.ineq([(gamma, -eye), (gamma_abs, -eye)], np.zeros(ng * nt))
    eyeb = np.eye(ng)
    builder.ineq([(beta, eyeb), (beta_abs, -eyeb)], np.zeros(ng))
    builder.ineq([(beta, -eyeb), (beta_abs, -eyeb)], np.zeros(ng))
    rowsum = np.zeros((ng, ng * nt))
    for g in range(ng):
        rowsum[g, g * nt:(g + 1) * nt] = 1.0
    builder.ineq([(gamma_abs, rowsum), (beta_abs, eyeb)], np.ones(ng))


def zonotope_intersection_under_many(zs: Sequence[Zonotope],
                                     template_G: Optional[np.ndarray] = None,
                                     order_cap: Optional[int] = None):
    """Inner zonotope of the intersection of several zonotopes.

    Maximizes the sum of per-dimension scales of a template-generator
    zonotope constrained to lie inside every operand; the center is a free
    decision vector.  Returns EMPTY when the operands are disjoint.
    """
    zs = list(zs)
    if not zs:
        raise ValueError("need at least one operand")
    n = zs[0].dim
    for z in zs:
        if z.dim != n:
            raise DimensionError("dimension mismatch in zonotope intersection")
    if len(zs) == 1 and template_G is None:
        return zs[0]
    if template_G is None:
        template_G = np.hstack([z.G for z in zs])
    T = np.atleast_2d(np.asarray(template_G, dtype=float))
    if order_cap is not None and T.shape[1] > order_cap:
        norms = np.linalg.norm(T, axis=0)
        order = np.argsort(-norms, kind="stable")[:order_cap]
        T = T[:, np.sort(order)]

    b = LpBuilder()
    lam = b.var("lam", n, lb=0.0)
    cvar = b.var("c", n)
    # A dimension with no generator content cannot be scaled meaningfully;
    # pin its scale so the objective stays bounded.
    row_mass = np.abs(T).sum(axis=1) if T.shape[1] else np.zeros(n)
    lam_ub = np.where(row_mass > _ZTOL, np.inf, 1.0)
    b.set_bounds(lam, np.zeros(n), lam_ub)
    for j, z in enumerate(zs):
        containment_constraints(b, lam, cvar, T, z, tag=f"_{j}")
    b.objective([(lam, np.ones(n))], "max")
    status, out, _ = b.solve()
    if status is LpStatus.INFEASIBLE:
        return EMPTY
    if status is not LpStatus.OPTIMAL:
        raise LpError("zonotope intersection LP failed numerically")
    lam_v = out["lam"]
    G = T * lam_v[:, None]
    keep = np.linalg.norm(G, axis=0) > _ZTOL
    return Zonotope(G[:, keep], out["c"])


def zonotope_intersection_under(Z1: Zonotope, Z2: Zonotope):
    """Inner zonotope of Z1 and Z2's intersection; EMPTY if disjoint."""
    return zonotope_intersection_under_many([Z1, Z2])


# ---------------------------------------------------------------------------
# H-polytope operations


def is_empty(S) -> bool:
    if S is EMPTY:
        return True
    if isinstance(S, Zonotope):
        return False
    P: HPolytope = S
    lp = LinearProgram(n=P.dim, a_ub=P.H, b_ub=P.h, sense="feas")
    sol = solve(lp)
    if sol.status is LpStatus.NUMERICAL_FAILURE:
        raise LpError("emptiness LP failed numerically")
    return sol.status is LpStatus.INFEASIBLE


def contains_point(S, p, tol: float = TOL_FEAS) -> bool:
    if S is EMPTY:
        return False
    p = np.asarray(p, dtype=float).ravel()
    if isinstance(S, HPolytope):
        if p.shape[0] != S.dim:
            raise DimensionError("point dimension mismatch")
        return bool(np.all(S.H @ p - S.h <= tol))
    if isinstance(S, Zonotope):
        if p.shape[0] != S.dim:
            raise DimensionError("point dimension mismatch")
        ng = S.num_generators
        if ng == 0:
            return bool(np.max(np.abs(p - S.c), initial=0.0) <= tol)
        b = LpBuilder()
        th = b.var("theta", ng, lb=-1.0, ub=1.0)
        b.eq([(th, S.G)], p - S.c)
        status, _, _ = b.solve()
        return status is LpStatus.OPTIMAL
    if isinstance(S, VPolytope):
        return S.contains(p, tol)
    raise TypeError(f"unsupported set type {type(S)!r}")


def support(S, d) -> float:
    """Support function max_{x in S} d.x; inf when unbounded."""
    d = np.asarray(d, dtype=float).ravel()
    if isinstance(S, Zonotope):
        return float(d @ S.c + np.abs(d @ S.G).sum())
    P: HPolytope = S
    lp = LinearProgram(n=P.dim, objective=d, a_ub=P.H, b_ub=P.h, sense="max")
    sol = solve(lp)
    if sol.status is LpStatus.UNBOUNDED:
        return np.inf
    if sol.status is LpStatus.INFEASIBLE:
        raise EmptyPolytopeError("support of empty polytope")
    if sol.status is not LpStatus.OPTIMAL:
        raise LpError("support LP failed numerically")
    return float(sol.objective_value)


def chebyshev_center_poly(P: HPolytope) -> tuple[np.ndarray, float]:
    return _cheb(P.H, P.h)


def bounding_box(S) -> np.ndarray:
    if isinstance(S, Zonotope):
        return S.bounding_box()
    P: HPolytope = S
    lo = np.empty(P.dim)
    hi = np.empty(P.dim)
    for i in range(P.dim):
        e = np.zeros(P.dim)
        e[i] = 1.0
        hi[i] = support(P, e)
        lo[i] = -support(P, -e)
    return np.stack([lo, hi], axis=1)


def _normalize_rows(H: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(H, axis=1)
    scale = np.where(norms > _ZTOL, norms, 1.0)
    return H / scale[:, None], h / scale


def _dedupe_rows(H: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if H.shape[0] == 0:
        return H, h
    stacked = np.column_stack([np.round(H, 10), np.round(h, 10)])
    _, idx = np.unique(stacked, axis=0, return_index=True)
    idx = np.sort(idx)
    return H[idx], h[idx]


def _drop_trivial(H: np.ndarray, h: np.ndarray):
    """Drop 0 <= b rows; report infeasibility when 0 <= b < 0 appears."""
    zero = np.abs(H).max(axis=1, initial=0.0) <= _ZTOL
    if np.any(zero & (h < -TOL_FEAS)):
        return None
    keep = ~zero
    return H[keep], h[keep]


def remove_redundancy(P: HPolytope, tol: float = 1e-9):
    """Drop every inequality whose removal does not change the feasible set."""
    H, h = _normalize_rows(np.array(P.H), np.array(P.h))
    out = _drop_trivial(H, h)
    if out is None:
        return EMPTY
    H, h = _dedupe_rows(*out)
    i = 0
    while i < H.shape[0]:
        mask = np.ones(H.shape[0], dtype=bool)
        mask[i] = False
        a_ub = np.vstack([H[mask], H[i][None, :]])
        b_ub = np.concatenate([h[mask], [h[i] + 1.0]])
        lp = LinearProgram(n=H.shape[1], objective=H[i], a_ub=a_ub, b_ub=b_ub,
                           sense="max")
        sol = solve(lp)
        if sol.status is LpStatus.INFEASIBLE:
            return EMPTY
        if sol.status is LpStatus.OPTIMAL and sol.objective_value <= h[i] + tol:
            H, h = H[mask], h[mask]
        else:
            i += 1
    if H.shape[0] == 0:
        # No constraints left: the set is the whole space.
        return HPolytope(np.zeros((0, P.dim)), np.zeros(0))
    return HPolytope(H, h)


def _fm_eliminate_one(H: np.ndarray, h: np.ndarray, col: int):
    """Eliminate one coordinate by Fourier-Motzkin combination."""
    a = H[:, col]
    pos = np.where(a > _ZTOL)[0]
    neg = np.where(a < -_ZTOL)[0]
    zero = np.where(np.abs(a) <= _ZTOL)[0]
    keep = np.delete(np.arange(H.shape[1]), col)
    rows = [H[zero][:, keep]]
    rhs = [h[zero]]
    if pos.size and neg.size:
        Hp = H[pos][:, keep] / a[pos][:, None]
        hp = h[pos] / a[pos]
        Hn = H[neg][:, keep] / (-a[neg])[:, None]
        hn = h[neg] / (-a[neg])
        # x_col <= hp - Hp z  and  -x_col <= hn - Hn z  combine pairwise.
        comb_H = (Hp[:, None, :] + Hn[None, :, :]).reshape(-1, keep.size)
        comb_h = (hp[:, None] + hn[None, :]).reshape(-1)
        rows.append(comb_H)
        rhs.append(comb_h)
    H2 = np.vstack(rows) if rows else np.zeros((0, keep.size))
    h2 = np.concatenate(rhs) if rhs else np.zeros(0)
    return H2, h2


def project(P: HPolytope, keep: Sequence[int], dim_cap: int = PROJECTION_DIM_CAP):
    """Exact projection onto the kept coordinates via Fourier-Motzkin.

    Redundant rows are pruned after each eliminated variable.  Returns EMPTY
    when the input is empty.  Raises ProjectionDimensionError beyond the cap.
    """
    keep = list(keep)
    if P.dim > dim_cap:
        raise ProjectionDimensionError(
            f"projection over {P.dim} dimensions exceeds the cap of {dim_cap}")
    if len(set(keep)) != len(keep) or any(k < 0 or k >= P.dim for k in keep):
        raise ValueError("keep must be a list of distinct valid coordinates")
    drop = [j for j in range(P.dim) if j not in keep]
    H, h = np.array(P.H), np.array(P.h)
    cols = list(range(P.dim))
    while drop:
        # Eliminate the variable with the fewest pairwise combinations first.
        best, best_cost = None, None
        for j in drop:
            cj = cols.index(j)
            a = H[:, cj]
            cost = int((a > _ZTOL).sum()) * int((a < -_ZTOL).sum())
            if best_cost is None or cost < best_cost:
                best, best_cost = j, cost
        cj = cols.index(best)
        H, h = _fm_eliminate_one(H, h, cj)
        cols.pop(cj)
        drop.remove(best)
        out = _drop_trivial(*_normalize_rows(H, h))
        if out is None:
            return EMPTY
        H, h = _dedupe_rows(*out)
        if H.shape[0] > 0:
            pruned = remove_redundancy(HPolytope(H, h))
            if pruned is EMPTY:
                return EMPTY
            H, h = np.array(pruned.H), np.array(pruned.h)
    # Reorder the surviving columns to match the requested keep order.
    perm = [cols.index(k) for k in keep]
    if H.shape[0] == 0:
        return HPolytope(np.zeros((0, len(keep))), np.zeros(0))
    return HPolytope(H[:, perm], h)


def distance_1norm(P1: HPolytope, P2: HPolytope) -> float:
    """min 1-norm distance between two nonempty H-polytopes; 0 iff they meet."""
    if P1.dim != P2.dim:
        raise DimensionError("dimension mismatch in distance")
    n = P1.dim
    b = LpBuilder()
    x = b.var("x", n)
    y = b.var("y", n)
    t = b.var("t", n, lb=0.0)
    b.ineq([(x, P1.H)], P1.h)
    b.ineq([(y, P2.H)], P2.h)
    eye = np.eye(n)
    b.ineq([(x, eye), (y, -eye), (t, -eye)], np.zeros(n))
    b.ineq([(x, -eye), (y, eye), (t, -eye)], np.zeros(n))
    b.objective([(t, np.ones(n))], "min")
    status, out, val = b.solve()
    if status is LpStatus.INFEASIBLE:
        raise EmptyPolytopeError("distance of an empty operand")
    if status is not LpStatus.OPTIMAL:
        raise LpError("distance LP failed")
    return float(val)


# ---------------------------------------------------------------------------
# conversions, sampling, 2D helpers


def box_to_zonotope(bounds) -> Zonotope:
    return Zonotope.from_box(bounds)


def zonotope_to_hpolytope(Z: Zonotope) -> HPolytope:
    """Exact H-representation of a zonotope in dimension 1 or 2."""
    if Z.dim == 1:
        half = np.abs(Z.G).sum()
        return HPolytope([[1.0], [-1.0]], [Z.c[0] + half, -(Z.c[0] - half)])
    if Z.dim != 2:
        raise DimensionError("exact H-conversion implemented for dim <= 2 only")
    G = Z.G
    rows, offs = [], []
    nontrivial = [g for g in G.T if np.linalg.norm(g) > _ZTOL]
    if not nontrivial:
        eye = np.eye(2)
        H = np.vstack([eye, -eye])
        h = np.concatenate([Z.c, -Z.c])
        return HPolytope(H, h)
    for g in nontrivial:
        nvec = np.array([-g[1], g[0]])
        nrm = np.linalg.norm(nvec)
        if nrm <= _ZTOL:
            continue
        nvec = nvec / nrm
        off = np.abs(nvec @ G).sum()
        rows.extend([nvec, -nvec])
        offs.extend([nvec @ Z.c + off, -(nvec @ Z.c) + off])
    P = HPolytope(np.array(rows), np.array(offs))
    pruned = remove_redundancy(P)
    return P if pruned is EMPTY else pruned


def sample_hpolytope(P: HPolytope, n: int, rng: np.random.Generator,
                     burn: int = 15) -> np.ndarray:
    """Hit-and-run samples from a nonempty bounded H-polytope."""
    c, r = chebyshev_center_poly(P)
    dim = P.dim
    pts = np.tile(c, (n, 1))
    H, h = P.H, P.h
    for _ in range(burn):
        d = rng.normal(size=(n, dim))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        num = h[None, :] - pts @ H.T           # slack per row
        den = d @ H.T
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = num / den
        tmax = np.where(den > _ZTOL, ratio, np.inf).min(axis=1)
        tmin = np.where(den < -_ZTOL, ratio, -np.inf).max(axis=1)
        tmax = np.maximum(tmax, 0.0)
        tmin = np.minimum(tmin, 0.0)
        t = tmin + (tmax - tmin) * rng.uniform(size=n)
        pts = pts + t[:, None] * d
    return pts


def sample_set(S, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(S, Zonotope):
        return S.sample(n, rng)
    return sample_hpolytope(S, n, rng)


def vertices_2d(P: HPolytope) -> np.ndarray:
    """Ordered vertex polygon of a bounded 2D H-polytope (plotting, oracles)."""
    if P.dim != 2:
        raise DimensionError("vertices_2d expects a 2D polytope")
    H, h = P.H, P.h
    m = H.shape[0]
    pts = []
    for i in range(m):
        for j in range(i + 1, m):
            A = np.array([H[i], H[j]])
            if abs(np.linalg.det(A)) <= 1e-12:
                continue
            p = np.linalg.solve(A, np.array([h[i], h[j]]))
            if np.all(H @ p - h <= 1e-7):
                pts.append(p)
    if not pts:
        return np.zeros((0, 2))
    pts = np.array(pts)
    _, idx = np.unique(np.round(pts, 9), axis=0, return_index=True)
    pts = pts[np.sort(idx)]
    centroid = pts.mean(axis=0)
    ang = np.arctan2(pts[:, 1] - centroid[1], pts[:, 0] - centroid[0])
    return pts[np.argsort(ang)]


def zonotope_vertices_2d(Z: Zonotope) -> np.ndarray:
    """Vertex polygon of a 2D zonotope (zonogon walk)."""
    if Z.dim != 2:
        raise DimensionError("zonotope_vertices_2d expects dim 2")
    G = Z.G.T.copy()
    G = G[np.linalg.norm(G, axis=1) > _ZTOL]
    if G.shape[0] == 0:
        return Z.c[None, :]
    G = np.where((G[:, [1]] < 0) | ((G[:, [1]] == 0) & (G[:, [0]] < 0)), -G, G)
    ang = np.arctan2(G[:, 1], G[:, 0])
    G = G[np.argsort(ang, kind="stable")]
    start = Z.c - G.sum(axis=0)
    upper = [start]
    for g in G:
        upper.append(upper[-1] + 2 * g)
    lower = [upper[-1]]
    for g in G:
        lower.append(lower[-1] - 2 * g)
    poly = np.array(upper + lower[1:-1])
    return poly
