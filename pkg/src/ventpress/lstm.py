"""Single-layer LSTM with forget gates and a linear pressure head.

Every path (cell input ``z``, input gate ``in``, forget gate ``phi``, output
gate ``out``) reads the concatenation ``[x_t, y_{t-1}]`` plus a bias::

    g_t   = tanh(W_z v + b_z)
    i_t   = sigmoid(W_in v + b_in)
    f_t   = sigmoid(W_phi v + b_phi)
    o_t   = sigmoid(W_out v + b_out)
    s_t   = f_t * s_{t-1} + i_t * g_t          (s_0 = 0)
    y_t   = o_t * tanh(s_t)
    pred  = w_head . y_t + b_head

Functions accept one sequence ``xs`` of shape ``(T, D)`` or a stack of
equal-length sequences ``(T, B, D)``; the stacked form is what training
uses, the batch axis simply rides along.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from typing import List

import numpy as np
from scipy.special import expit as sigmoid

from .data_model import Breath

N_FEATURES = 6
CHECKPOINT_FORMAT = "ventpress-lstm/1"
PARAM_NAMES = ("w_z", "w_in", "w_phi", "w_out",
               "b_z", "b_in", "b_phi", "b_out", "w_head", "b_head")


@dataclass
class LstmParams:
    """Weights are ``H x (D + H)``: input block first, recurrent block second.

    Also used for gradients, which have the same layout.
    """

    w_z: np.ndarray
    w_in: np.ndarray
    w_phi: np.ndarray
    w_out: np.ndarray
    b_z: np.ndarray
    b_in: np.ndarray
    b_phi: np.ndarray
    b_out: np.ndarray
    w_head: np.ndarray
    b_head: np.ndarray  # shape ()

    def __post_init__(self):
        for f in fields(self):
            setattr(self, f.name, np.asarray(getattr(self, f.name), dtype=np.float64))
        h = self.b_z.shape[0]
        d = self.w_z.shape[1] - h
        if d < 1:
            raise ValueError("weight matrices are too narrow for the hidden size")
        for name in ("w_z", "w_in", "w_phi", "w_out"):
            if getattr(self, name).shape != (h, d + h):
                raise ValueError(f"{name} must have shape {(h, d + h)}")
        for name in ("b_z", "b_in", "b_phi", "b_out", "w_head"):
            if getattr(self, name).shape != (h,):
                raise ValueError(f"{name} must have shape {(h,)}")
        if self.b_head.shape != ():
            raise ValueError("b_head must be a scalar")

    @property
    def hidden_size(self) -> int:
        return self.b_z.shape[0]

    @property
    def n_features(self) -> int:
        return self.w_z.shape[1] - self.hidden_size

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "LstmParams":
        return LstmParams(**{k: v.copy() for k, v in self.as_dict().items()})

    @classmethod
    def zeros(cls, n_features: int, hidden_size: int) -> "LstmParams":
        h, w = hidden_size, n_features + hidden_size
        return cls(*(np.zeros((h, w)) for _ in range(4)),
                   *(np.zeros(h) for _ in range(5)), np.zeros(()))


def init_params(n_features: int, hidden_size: int,
                rng: np.random.Generator) -> LstmParams:
    """Uniform weights in +-1/sqrt(D + H); forget bias +1, other biases 0."""
    p = LstmParams.zeros(n_features, hidden_size)
    bound = 1.0 / np.sqrt(n_features + hidden_size)
    for name in ("w_z", "w_in", "w_phi", "w_out", "w_head"):
        arr = getattr(p, name)
        arr[...] = rng.uniform(-bound, bound, arr.shape)
    p.b_phi[...] = 1.0
    return p


@dataclass
class LstmState:
    s: np.ndarray
    y: np.ndarray

    @classmethod
    def zeros(cls, hidden_size: int, batch: int = None) -> "LstmState":
        shape = (hidden_size,) if batch is None else (batch, hidden_size)
        return cls(np.zeros(shape), np.zeros(shape))


@dataclass
class StepCache:
    x: np.ndarray
    y_prev: np.ndarray
    s_prev: np.ndarray
    z_c: np.ndarray
    z_in: np.ndarray
    z_phi: np.ndarray
    z_out: np.ndarray
    y_in: np.ndarray
    y_phi: np.ndarray
    y_out: np.ndarray
    g: np.ndarray
    s: np.ndarray
    h: np.ndarray
    y: np.ndarray


def _stacked(p: LstmParams):
    w = np.concatenate([p.w_z, p.w_in, p.w_phi, p.w_out], axis=0)
    b = np.concatenate([p.b_z, p.b_in, p.b_phi, p.b_out])
    return w, b


def _cell(w, b, hsize, x, prev: LstmState):
    v = np.concatenate([x, prev.y], axis=-1)
    a = v @ w.T + b
    z_c, z_in, z_phi, z_out = (a[..., k * hsize:(k + 1) * hsize] for k in range(4))
    g = np.tanh(z_c)
    y_in, y_phi, y_out = sigmoid(z_in), sigmoid(z_phi), sigmoid(z_out)
    s = y_phi * prev.s + y_in * g
    h = np.tanh(s)
    y = y_out * h
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(y))):
        for name, arr in (("z_c", z_c), ("z_in", z_in), ("z_phi", z_phi),
                          ("z_out", z_out), ("s", s), ("y", y)):
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError(f"non-finite value in {name}")
    cache = StepCache(x, prev.y, prev.s, z_c, z_in, z_phi, z_out,
                      y_in, y_phi, y_out, g, s, h, y)
    return LstmState(s, y), cache


def _check_input(p: LstmParams, x: np.ndarray):
    if x.shape[-1] != p.n_features:
        raise ValueError(f"expected {p.n_features} features, got {x.shape[-1]}")


def lstm_cell_forward(p: LstmParams, x_t, prev: LstmState) -> tuple:
    """One time step; returns ``(new_state, cache)``."""
    x_t = np.asarray(x_t, dtype=np.float64)
    _check_input(p, x_t)
    if prev.s.shape[-1] != p.hidden_size or prev.y.shape[-1] != p.hidden_size:
        raise ValueError(f"state size must be {p.hidden_size}")
    w, b = _stacked(p)
    return _cell(w, b, p.hidden_size, x_t, prev)


def lstm_forward(p: LstmParams, xs) -> tuple:
    """Run from the zero state; returns ``(predictions, caches)``.

    ``predictions`` has shape ``(T,)`` or ``(T, B)`` matching ``xs``.
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim not in (2, 3) or len(xs) < 1:
        raise ValueError("xs must have shape (T, D) or (T, B, D) with T >= 1")
    _check_input(p, xs)
    w, b = _stacked(p)
    state = LstmState.zeros(p.hidden_size, None if xs.ndim == 2 else xs.shape[1])
    caches: List[StepCache] = []
    for x in xs:
        state, cache = _cell(w, b, p.hidden_size, x, state)
        caches.append(cache)
    ys = np.stack([c.y for c in caches])
    preds = ys @ p.w_head + p.b_head
    return preds, caches


def lstm_backward(p: LstmParams, caches: List[StepCache], grad_predictions) -> LstmParams:
    """Exact backpropagation through time over the whole sequence.

    ``grad_predictions`` is dLoss/dprediction per step, shaped like the
    forward predictions. Gradients are summed over steps and batch entries.
    """
    dpred = np.asarray(grad_predictions, dtype=np.float64)
    if len(dpred) != len(caches):
        raise ValueError(f"{len(dpred)} prediction gradients for {len(caches)} cached steps")
    hsize, d = p.hidden_size, p.n_features
    w, _ = _stacked(p)

    dw = np.zeros_like(w)
    db = np.zeros(4 * hsize)
    dw_head = np.zeros(hsize)
    db_head = float(np.sum(dpred))
    dy_next = np.zeros_like(caches[0].y)
    ds_next = np.zeros_like(caches[0].s)

    for t in range(len(caches) - 1, -1, -1):
        c = caches[t]
        dp = dpred[t]
        dw_head += dp @ c.y if dp.ndim else dp * c.y
        dy = np.multiply.outer(dp, p.w_head) + dy_next
        ds = dy * c.y_out * (1.0 - c.h * c.h) + ds_next
        da = np.concatenate([
            ds * c.y_in * (1.0 - c.g * c.g),
            ds * c.g * c.y_in * (1.0 - c.y_in),
            ds * c.s_prev * c.y_phi * (1.0 - c.y_phi),
            dy * c.h * c.y_out * (1.0 - c.y_out),
        ], axis=-1)
        v = np.concatenate([c.x, c.y_prev], axis=-1)
        if da.ndim == 1:
            dw += np.outer(da, v)
            db += da
        else:
            dw += da.T @ v
            db += da.sum(axis=0)
        dv = da @ w
        dy_next = dv[..., d:]
        ds_next = ds * c.y_phi

    parts = np.split(dw, 4, axis=0)
    bparts = np.split(db, 4)
    return LstmParams(*parts, *bparts, dw_head, np.asarray(db_head))


def predict(p: LstmParams, xs) -> np.ndarray:
    return lstm_forward(p, xs)[0]


def featurize(b: Breath) -> np.ndarray:
    """Per-step model inputs, shape ``(T, 6)``.

    Columns: u_in/100, u_out, R/50, C/50, time since the previous step (0 at
    the first step), and the running sum of u_in * dt / 100 as a volume proxy.
    """
    dt = np.concatenate([[0.0], np.diff(b.time_s)])
    cum = np.cumsum(b.u_in * dt) / 100.0
    n = len(b)
    return np.column_stack([
        b.u_in / 100.0,
        b.u_out.astype(np.float64),
        np.full(n, b.settings.r / 50.0),
        np.full(n, b.settings.c / 50.0),
        dt,
        cum,
    ])


def save_params(p: LstmParams, path) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "n_features": p.n_features,
        "hidden_size": p.hidden_size,
        "params": {name: {"shape": list(arr.shape), "values": arr.ravel().tolist()}
                   for name, arr in p.as_dict().items()},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_params(path) -> LstmParams:
    if not os.path.exists(path):
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: unsupported checkpoint format {doc.get('format')!r}")
    arrays = {}
    for name in PARAM_NAMES:
        entry = doc["params"].get(name)
        if entry is None:
            raise ValueError(f"{path}: missing parameter {name!r}")
        arrays[name] = np.array(entry["values"], dtype=np.float64).reshape(entry["shape"])
    return LstmParams(**arrays)
