"""Problem specification files: a single JSON document describing the plant,
uncertainty, control space, sets, controller, engine settings, and optional
model mismatch."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .controllers import (ControllerHandle, ExternalController, MlpController,
                          OracleProcess, PiecewiseController,
                          SaturatedLinearController, load_mlp, spawn_external)
from .engine import EngineConfig, FalsificationProblem
from .geometry import HPolytope, Zonotope
from .system import (ControlSpace, MismatchModel, SwitchedAffineSystem,
                     UncertaintyModel, UncertaintySet, quadratic_mismatch)


class SpecError(ValueError):
    """Schema violation; the message names the offending field."""


def _need(doc: dict, key: str, where: str):
    if key not in doc:
        raise SpecError(f"missing field {where}.{key}" if where else f"missing field {key}")
    return doc[key]


def _matrix(doc, key, where):
    val = _need(doc, key, where)
    arr = np.asarray(val, dtype=float)
    if arr.ndim not in (1, 2):
        raise SpecError(f"field {where}.{key} must be a vector or matrix")
    return arr


def _parse_set_poly(doc: dict, where: str) -> tuple[HPolytope, Optional[np.ndarray]]:
    """One state set given as a box or an H-polytope; returns (poly, box|None)."""
    if "box" in doc:
        box = np.asarray(doc["box"], dtype=float)
        if box.ndim != 2 or box.shape[1] != 2:
            raise SpecError(f"field {where}.box must be a list of [lo, hi] pairs")
        return HPolytope.from_box(box), box
    if "poly" in doc:
        H = _matrix(doc["poly"], "H", f"{where}.poly")
        h = _matrix(doc["poly"], "h", f"{where}.poly")
        return HPolytope(H, h), None
    raise SpecError(f"field {where} must contain 'box' or 'poly'")


def _parse_uncertainty(doc: dict, where: str) -> UncertaintySet:
    if "box" in doc:
        return UncertaintySet.from_box(np.asarray(doc["box"], dtype=float))
    if "poly" in doc:
        H = _matrix(doc["poly"], "H", f"{where}.poly")
        h = _matrix(doc["poly"], "h", f"{where}.poly")
        return UncertaintySet.from_poly(H, h)
    if "zono" in doc:
        G = _matrix(doc["zono"], "G", f"{where}.zono")
        c = _matrix(doc["zono"], "c", f"{where}.zono")
        return UncertaintySet.from_zonotope(Zonotope(G, c))
    if "state_poly" in doc:
        sp = doc["state_poly"]
        return UncertaintySet.from_poly(
            _matrix(sp, "Hz", f"{where}.state_poly"),
            _matrix(sp, "h", f"{where}.state_poly"),
            Mx=_matrix(sp, "Hx", f"{where}.state_poly"))
    raise SpecError(f"field {where} needs one of box|poly|zono|state_poly")


def _parse_system(doc: dict) -> SwitchedAffineSystem:
    sysdoc = _need(doc, "system", "")
    modes_doc = _need(sysdoc, "modes", "system")
    if not modes_doc:
        raise SpecError("field system.modes must be a nonempty map")
    modes = {}
    for sid, m in modes_doc.items():
        w = f"system.modes.{sid}"
        modes[int(sid)] = (_matrix(m, "A", w), _matrix(m, "B", w),
                           _matrix(m, "K", w), _matrix(m, "E", w))
    return SwitchedAffineSystem(
        modes,
        C=_matrix(sysdoc, "C", "system"),
        D=_matrix(sysdoc, "D", "system"),
        F=_matrix(sysdoc, "F", "system"))


def _parse_controller(doc: dict, base_dir: str, cspace: ControlSpace,
                      sys: SwitchedAffineSystem) -> ControllerHandle:
    cdoc = _need(doc, "controller", "")
    if "piecewise" in cdoc:
        pw = cdoc["piecewise"]
        regions = []
        for i, r in enumerate(pw.get("regions", [])):
            w = f"controller.piecewise.regions[{i}]"
            P = HPolytope(_matrix(r, "H", w), _matrix(r, "h", w))
            regions.append((P, int(_need(r, "s", w)), _need(r, "u", w)))
        d = _need(pw, "default", "controller.piecewise")
        clamp = pw.get("clamp_box")
        return PiecewiseController(
            regions, (int(_need(d, "s", "controller.piecewise.default")),
                      _need(d, "u", "controller.piecewise.default")),
            clamp_box=None if clamp is None else np.asarray(clamp, dtype=float))
    if "saturated_linear" in cdoc:
        sl = cdoc["saturated_linear"]
        w = "controller.saturated_linear"
        return SaturatedLinearController(
            _matrix(sl, "gain", w), _matrix(sl, "lower", w),
            _matrix(sl, "upper", w), bias=sl.get("bias"),
            mode=int(sl.get("s", cspace.modes[0])))
    if "mlp" in cdoc:
        ml = cdoc["mlp"]
        path = _need(ml, "file", "controller.mlp")
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        if not os.path.exists(path):
            raise SpecError(f"controller.mlp.file does not exist: {path}")
        clamp = cspace.box if ml.get("clamp_to_u", True) and cspace.box is not None else None
        return load_mlp(path, n_u=sys.n_u, modes=cspace.modes, clamp_box=clamp)
    if "external" in cdoc:
        ex = cdoc["external"]
        return spawn_external(_need(ex, "command", "controller.external"),
                              timeout=ex.get("timeout"),
                              default_mode=cspace.modes[0])
    raise SpecError(
        "field controller needs one of piecewise|saturated_linear|mlp|external")


def _parse_mismatch(doc: dict, sys: SwitchedAffineSystem,
                    cspace: ControlSpace, domain_box) -> Optional[MismatchModel]:
    if "mismatch" not in doc or doc["mismatch"] is None:
        return None
    mdoc = doc["mismatch"]
    if "quad" in mdoc:
        q = mdoc["quad"]
        terms = [(int(_need(t, "coord", "mismatch.quad.terms")),
                  np.asarray(_need(t, "M", "mismatch.quad.terms"), dtype=float))
                 for t in _need(q, "terms", "mismatch.quad")]
        mag = float(_need(q, "magnitude", "mismatch.quad"))
        return quadratic_mismatch(sys, terms, mag, domain_box)
    P_box = np.asarray(_need(mdoc, "P_box", "mismatch"), dtype=float)
    Mp = _matrix(mdoc, "Mp", "mismatch")
    from .system import _box_corners
    P_vertices = _box_corners(P_box[:, 0], P_box[:, 1])
    Q_vertices = None
    Mq = None
    if "Q_box" in mdoc and mdoc["Q_box"] is not None:
        Q_box = np.asarray(mdoc["Q_box"], dtype=float)
        Q_vertices = _box_corners(Q_box[:, 0], Q_box[:, 1])
        Mq = _matrix(mdoc, "Mq", "mismatch")
    cmd = _need(mdoc, "oracle_command", "mismatch")
    proc = OracleProcess(cmd)
    model = MismatchModel(sys, P_vertices, Mp,
                          resolve_p=proc.resolve_p,
                          oracle=lambda x, s, u, w: proc.step(x, s, u, w),
                          Q_vertices=Q_vertices, Mq=Mq)
    model.P_box = P_box
    if "Q_box" in mdoc and mdoc["Q_box"] is not None:
        model.Q_box = np.asarray(mdoc["Q_box"], dtype=float)
    model._oracle_proc = proc
    return model


@dataclass
class LoadedProblem:
    name: str
    problem: FalsificationProblem
    controller: ControllerHandle
    config: EngineConfig
    raw: dict
    config_hash: str
    path: str


def config_hash_of(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def load_problem(path: str, overrides: Optional[dict] = None) -> LoadedProblem:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise SpecError(f"not valid JSON: {e}") from e
    base_dir = os.path.dirname(os.path.abspath(path))
    loaded = problem_from_dict(doc, base_dir, overrides)
    loaded.path = path
    if "name" not in doc:
        loaded.name = os.path.splitext(os.path.basename(path))[0]
    return loaded


def problem_from_dict(doc: dict, base_dir: str = ".",
                      overrides: Optional[dict] = None) -> LoadedProblem:
    sys = _parse_system(doc)
    udoc = _need(doc, "uncertainty", "")
    W = _parse_uncertainty(_need(udoc, "W", "uncertainty"), "uncertainty.W")
    V = _parse_uncertainty(_need(udoc, "V", "uncertainty"), "uncertainty.V")
    if W.dim != sys.n_w:
        raise SpecError(f"uncertainty.W has dimension {W.dim}, system expects {sys.n_w}")
    if V.dim != sys.n_v:
        raise SpecError(f"uncertainty.V has dimension {V.dim}, system expects {sys.n_v}")
    unc = UncertaintyModel(W=W, V=V)

    ctl = _need(doc, "control", "")
    modes = _need(ctl, "modes", "control")
    Udoc = _need(ctl, "U", "control")
    if "box" in Udoc:
        cspace = ControlSpace(modes, box=np.asarray(Udoc["box"], dtype=float))
    elif "vertices" in Udoc:
        cspace = ControlSpace(modes, vertices=np.asarray(Udoc["vertices"], dtype=float))
    else:
        raise SpecError("field control.U needs box or vertices")
    if cspace.n_u != sys.n_u:
        raise SpecError(f"control.U has dimension {cspace.n_u}, system expects {sys.n_u}")
    for s in cspace.modes:
        if s not in sys.modes:
            raise SpecError(f"control.modes contains unknown mode {s}")

    sets = _need(doc, "sets", "")
    domain_box = np.asarray(_need(sets, "domain", "sets"), dtype=float)
    if domain_box.shape != (sys.n_x, 2):
        raise SpecError(f"sets.domain must be {sys.n_x} [lo, hi] pairs")
    X_init, X_init_box = _parse_set_poly(_need(sets, "X_init", "sets"), "sets.X_init")
    unsafe_docs = _need(sets, "X_unsafe", "sets")
    if not isinstance(unsafe_docs, list) or not unsafe_docs:
        raise SpecError("field sets.X_unsafe must be a nonempty list")
    unsafe_sets, unsafe_boxes = [], []
    for i, u in enumerate(unsafe_docs):
        P, box = _parse_set_poly(u, f"sets.X_unsafe[{i}]")
        unsafe_sets.append(P)
        unsafe_boxes.append(box)
    t_max = sets.get("t_max")
    X_target_box = None
    if "X_target" in sets and sets["X_target"] is not None:
        if t_max is None:
            raise SpecError("sets.t_max is required together with sets.X_target")
        _, X_target_box = _parse_set_poly(sets["X_target"], "sets.X_target")
        if X_target_box is None:
            raise SpecError("sets.X_target must be given as a box")

    engine_doc = dict(doc.get("engine", {}))
    if overrides:
        engine_doc.update({k: v for k, v in overrides.items() if v is not None})
    delta = engine_doc.get("delta")
    cfg = EngineConfig(
        beta=float(engine_doc.get("beta", 0.6)),
        k_max=int(engine_doc.get("k_max", 100)),
        delta=np.inf if delta in (None, "inf") else float(delta),
        backend=engine_doc.get("backend", "polytope"),
        seed=int(engine_doc.get("seed", 0)),
        x0_choice=engine_doc.get("x0_choice", "last-dual-frame"),
        dual_k_stop=int(engine_doc.get("dual_k_stop", 50)),
        proj_dim_cap=int(engine_doc.get("proj_dim_cap", 12)),
        zono_order_cap=engine_doc.get("zono_order_cap"))

    mismatch = _parse_mismatch(doc, sys, cspace, domain_box)
    problem = FalsificationProblem(
        sys=sys, unc=unc, cspace=cspace, domain_box=domain_box,
        X_init=X_init, unsafe_sets=unsafe_sets, unsafe_boxes=unsafe_boxes,
        X_init_box=X_init_box, X_target_box=X_target_box,
        t_max=None if t_max is None else int(t_max), mismatch=mismatch)
    controller = _parse_controller(doc, base_dir, cspace, sys)
    return LoadedProblem(
        name=doc.get("name", "problem"),
        problem=problem, controller=controller, config=cfg, raw=doc,
        config_hash=config_hash_of(doc), path="<dict>")
