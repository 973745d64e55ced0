"""Query-only controller handles: built-in families and an external-process
client speaking a newline-delimited JSON protocol."""

from __future__ import annotations

import json
import os
import select
import subprocess
from typing import Optional, Sequence

import numpy as np

from .geometry import HPolytope
from .lp import TOL_FEAS

DEFAULT_TIMEOUT_ENV = "SGFALSIFY_CTRL_TIMEOUT"
DEFAULT_TIMEOUT = 10.0


class ControllerError(RuntimeError):
    pass


class ControllerTimeout(ControllerError):
    pass


class ControllerProtocolError(ControllerError):
    pass


class ControllerHandle:
    """Base class: the engine sees controllers only through query(y)."""

    kind = "builtin"

    def __init__(self):
        self.query_count = 0

    def query(self, y) -> tuple[int, np.ndarray]:
        y = np.asarray(y, dtype=float).ravel()
        self.query_count += 1
        s, u = self._evaluate(y)
        u = np.asarray(u, dtype=float).ravel()
        if not np.all(np.isfinite(u)):
            raise ControllerError(f"controller returned non-finite control at y={y.tolist()}")
        return int(s), u

    def _evaluate(self, y):
        raise NotImplementedError

    def close(self) -> None:
        pass


class PiecewiseController(ControllerHandle):
    """Ordered (region, mode, control) lookup; first matching region wins."""

    kind = "builtin-piecewise"

    def __init__(self, regions: Sequence[tuple[HPolytope, int, Sequence[float]]],
                 default: tuple[int, Sequence[float]],
                 clamp_box=None):
        super().__init__()
        self.regions = [(P, int(s), np.asarray(u, dtype=float).ravel())
                        for P, s, u in regions]
        self.default = (int(default[0]), np.asarray(default[1], dtype=float).ravel())
        self.clamp_box = None if clamp_box is None else np.asarray(clamp_box, dtype=float)

    def _evaluate(self, y):
        if self.clamp_box is not None:
            y = np.clip(y, self.clamp_box[:, 0], self.clamp_box[:, 1])
        for P, s, u in self.regions:
            if np.all(P.H @ y - P.h <= 0.0):
                return s, u
        return self.default


class SaturatedLinearController(ControllerHandle):
    """u = clip(G y + bias, lower, upper); single-mode plants only."""

    kind = "builtin-saturated-linear"

    def __init__(self, gain, lower, upper, bias=None, mode: int = 1):
        super().__init__()
        self.gain = np.atleast_2d(np.asarray(gain, dtype=float))
        self.lower = np.asarray(lower, dtype=float).ravel()
        self.upper = np.asarray(upper, dtype=float).ravel()
        if np.any(self.lower > self.upper):
            raise ValueError("saturation bounds must satisfy lower <= upper")
        self.bias = (np.zeros(self.gain.shape[0]) if bias is None
                     else np.asarray(bias, dtype=float).ravel())
        self.mode = int(mode)

    def _evaluate(self, y):
        u = self.gain @ y + self.bias
        return self.mode, np.clip(u, self.lower, self.upper)


_ACTIVATIONS = {
    "relu": lambda z: np.maximum(z, 0.0),
    "tanh": np.tanh,
    "id": lambda z: z,
}


class MlpController(ControllerHandle):
    """Feedforward network; an optional trailing logit block selects the mode
    by argmax (ties break toward the smaller mode index)."""

    kind = "builtin-mlp"

    def __init__(self, layers: Sequence[tuple[np.ndarray, np.ndarray, str]],
                 n_u: int, modes: Sequence[int] = (1,), clamp_box=None):
        super().__init__()
        self.layers = []
        prev = None
        for W, b, act in layers:
            W = np.atleast_2d(np.asarray(W, dtype=float))
            b = np.asarray(b, dtype=float).ravel()
            if W.shape[0] != b.shape[0]:
                raise ValueError("layer weight/bias shape mismatch")
            if prev is not None and W.shape[1] != prev:
                raise ValueError("consecutive layer dimensions do not chain")
            if act not in _ACTIVATIONS:
                raise ValueError(f"unknown activation tag {act!r}")
            prev = W.shape[0]
            self.layers.append((W, b, act))
        self.modes = sorted(int(m) for m in modes)
        self.n_u = int(n_u)
        expected = self.n_u + (len(self.modes) if len(self.modes) > 1 else 0)
        if prev != expected:
            raise ValueError(f"final layer width {prev}, expected {expected}")
        self.clamp_box = None if clamp_box is None else np.asarray(clamp_box, dtype=float)

    def _evaluate(self, y):
        z = y
        for W, b, act in self.layers:
            z = _ACTIVATIONS[act](W @ z + b)
        u = z[:self.n_u]
        if self.clamp_box is not None:
            u = np.clip(u, self.clamp_box[:, 0], self.clamp_box[:, 1])
        if len(self.modes) == 1:
            return self.modes[0], u
        logits = z[self.n_u:]
        return self.modes[int(np.argmax(logits))], u


def load_mlp(path, n_u: int, modes: Sequence[int] = (1,), clamp_box=None) -> MlpController:
    """Read an MLP weight file: {"layers": [{"w": [[..]], "b": [..], "act": tag}]}."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    layers = [(np.asarray(l["w"], dtype=float), np.asarray(l["b"], dtype=float), l["act"])
              for l in doc["layers"]]
    return MlpController(layers, n_u=n_u, modes=modes, clamp_box=clamp_box)


class ExternalController(ControllerHandle):
    """Line-protocol client: request {"y": [...]}, reply {"s": int, "u": [...]}.

    One JSON object per line over the child's standard streams; one in-flight
    query; per-query timeout.  The handle is exclusively owned by one run.
    """

    kind = "external-process"

    def __init__(self, command, timeout: Optional[float] = None,
                 default_mode: int = 1):
        super().__init__()
        if timeout is None:
            timeout = float(os.environ.get(DEFAULT_TIMEOUT_ENV, DEFAULT_TIMEOUT))
        self.timeout = timeout
        self.default_mode = int(default_mode)
        self.command = command
        try:
            self.proc = subprocess.Popen(
                command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1)
        except OSError as e:
            raise ControllerError(f"failed to launch external controller: {e}") from e

    def _read_line(self, y) -> str:
        fd = self.proc.stdout.fileno()
        buf = []
        import time
        deadline = time.monotonic() + self.timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self.close()
                raise ControllerTimeout(
                    f"external controller timed out after {self.timeout}s at y={y.tolist()}")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            ch = os.read(fd, 65536).decode("utf-8")
            if ch == "":
                raise ControllerProtocolError(
                    f"external controller closed its stream at y={y.tolist()}")
            buf.append(ch)
            if "\n" in ch:
                break
        line = "".join(buf)
        return line.splitlines()[0]

    def _evaluate(self, y):
        if self.proc.poll() is not None:
            raise ControllerError("external controller process has exited")
        try:
            self.proc.stdin.write(json.dumps({"y": y.tolist()}) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise ControllerError(f"external controller pipe failure: {e}") from e
        line = self._read_line(y)
        try:
            reply = json.loads(line)
            u = np.asarray(reply["u"], dtype=float).ravel()
            s = int(reply.get("s", self.default_mode))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise ControllerProtocolError(
                f"malformed controller reply {line!r} at y={y.tolist()}") from e
        return s, u

    def close(self) -> None:
        if getattr(self, "proc", None) is not None and self.proc.poll() is None:
            self.proc.kill()
            self.proc.wait()


def spawn_external(command, timeout: Optional[float] = None,
                   default_mode: int = 1) -> ExternalController:
    return ExternalController(command, timeout=timeout, default_mode=default_mode)


class OracleProcess:
    """External concrete-dynamics oracle for model-mismatch replay.

    Protocol: {"op": "f", "x": [...], "s": int, "u": [...], "w": [...]} ->
    {"x": [...]}, and {"op": "p", "x": [...], "u": [...]} -> {"p": [...]}.
    """

    def __init__(self, command, timeout: Optional[float] = None):
        if timeout is None:
            timeout = float(os.environ.get(DEFAULT_TIMEOUT_ENV, DEFAULT_TIMEOUT))
        self.timeout = timeout
        self.proc = subprocess.Popen(command, stdin=subprocess.PIPE,
                                     stdout=subprocess.PIPE, text=True, bufsize=1)

    def _ask(self, payload: dict) -> dict:
        self.proc.stdin.write(json.dumps(payload) + "\n")
        self.proc.stdin.flush()
        ready, _, _ = select.select([self.proc.stdout.fileno()], [], [], self.timeout)
        if not ready:
            raise ControllerTimeout("oracle process timed out")
        line = self.proc.stdout.readline()
        if not line:
            raise ControllerProtocolError("oracle closed its stream")
        return json.loads(line)

    def step(self, x, s, u, w):
        out = self._ask({"op": "f", "x": list(map(float, x)), "s": int(s),
                         "u": list(map(float, u)), "w": list(map(float, w))})
        return np.asarray(out["x"], dtype=float)

    def resolve_p(self, x, u):
        out = self._ask({"op": "p", "x": list(map(float, x)),
                         "u": list(map(float, u))})
        return np.asarray(out["p"], dtype=float)

    def close(self):
        if self.proc.poll() is None:
            self.proc.kill()
            self.proc.wait()
