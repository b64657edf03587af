"""Dense stacks and a gated recurrent (LSTM) cell, with twin forward paths.

Each architecture has a taped forward (Tensor in/out, for training) and a fast
numpy forward (for acting and reward evaluation); tests pin the two paths to
identical outputs. Initialization: orthogonal recurrent kernels, Glorot-uniform
dense kernels, zero biases, forget-gate bias +1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from . import tensor as T
from .tensor import Tensor

Params = Dict[str, np.ndarray]


class ShapeError(ValueError):
    pass


class NonFiniteError(RuntimeError):
    pass


@dataclass(frozen=True)
class MlpSpec:
    sizes: Tuple[int, ...]           # input, hidden..., output
    activation: str = "tanh"         # hidden activation; output is linear

    def __post_init__(self):
        if len(self.sizes) < 2 or any(s < 1 for s in self.sizes):
            raise ShapeError(f"bad MLP sizes {self.sizes}")
        if self.activation not in ("tanh", "relu"):
            raise ShapeError(f"unknown activation {self.activation}")


@dataclass(frozen=True)
class LstmSpec:
    input_size: int
    hidden: int
    layers: int = 2


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


def _orthogonal(rng: np.random.Generator, rows: int, cols: int, dtype) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return q[:rows, :cols].astype(dtype)


def init_mlp(spec: MlpSpec, rng: np.random.Generator,
             dtype=np.float32, prefix: str = "") -> Params:
    params: Params = {}
    for i, (fi, fo) in enumerate(zip(spec.sizes[:-1], spec.sizes[1:])):
        params[f"{prefix}w{i}"] = _glorot(rng, fi, fo, dtype)
        params[f"{prefix}b{i}"] = np.zeros(fo, dtype=dtype)
    return params


def init_lstm(spec: LstmSpec, rng: np.random.Generator,
              dtype=np.float32, prefix: str = "") -> Params:
    params: Params = {}
    for k in range(spec.layers):
        in_size = spec.input_size if k == 0 else spec.hidden
        h = spec.hidden
        wx = np.concatenate(
            [_glorot(rng, in_size, h, dtype) for _ in range(4)], axis=1)
        wh = np.concatenate(
            [_orthogonal(rng, h, h, dtype) for _ in range(4)], axis=1)
        b = np.zeros(4 * h, dtype=dtype)
        b[h:2 * h] = 1.0  # forget gate bias
        params[f"{prefix}l{k}.wx"] = wx
        params[f"{prefix}l{k}.wh"] = wh
        params[f"{prefix}l{k}.b"] = b
    return params


def _check_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite output from {name}")


# ---------- fast numpy path ----------

def mlp_forward_np(params: Params, spec: MlpSpec, x: np.ndarray,
                   prefix: str = "", check: bool = False) -> np.ndarray:
    n_layers = len(spec.sizes) - 1
    if x.shape[-1] != spec.sizes[0]:
        raise ShapeError(f"MLP input dim {x.shape[-1]} != {spec.sizes[0]}")
    h = x
    for i in range(n_layers):
        h = h @ params[f"{prefix}w{i}"] + params[f"{prefix}b{i}"]
        if i < n_layers - 1:
            h = np.tanh(h) if spec.activation == "tanh" else np.maximum(h, 0.0)
    if check:
        _check_finite("mlp_forward", h)
    return h


def _sigmoid_np(z: np.ndarray) -> np.ndarray:
    # exp overflow for very negative z would still round to 0 correctly;
    # silence the warning rather than branch
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def lstm_step_np(params: Params, spec: LstmSpec, x: np.ndarray,
                 hs: List[np.ndarray], cs: List[np.ndarray],
                 prefix: str = "", check: bool = False):
    """One recurrent step through all layers; returns (top h, hs', cs')."""
    if x.shape[-1] != spec.input_size:
        raise ShapeError(f"LSTM input dim {x.shape[-1]} != {spec.input_size}")
    h_in = x
    new_hs, new_cs = [], []
    H = spec.hidden
    for k in range(spec.layers):
        z = (h_in @ params[f"{prefix}l{k}.wx"]
             + hs[k] @ params[f"{prefix}l{k}.wh"] + params[f"{prefix}l{k}.b"])
        i = _sigmoid_np(z[..., 0:H])
        f = _sigmoid_np(z[..., H:2 * H])
        g = np.tanh(z[..., 2 * H:3 * H])
        o = _sigmoid_np(z[..., 3 * H:4 * H])
        c = f * cs[k] + i * g
        h = o * np.tanh(c)
        new_hs.append(h)
        new_cs.append(c)
        h_in = h
    if check:
        _check_finite("lstm_step", h_in)
    return h_in, new_hs, new_cs


# ---------- taped path ----------

def mlp_forward_t(params: Dict[str, Tensor], spec: MlpSpec, x: Tensor,
                  prefix: str = "") -> Tensor:
    n_layers = len(spec.sizes) - 1
    h = x
    for i in range(n_layers):
        h = T.add(T.matmul(h, params[f"{prefix}w{i}"]), params[f"{prefix}b{i}"])
        if i < n_layers - 1:
            h = T.tanh(h) if spec.activation == "tanh" else T.relu(h)
    return h


def lstm_step_t(params: Dict[str, Tensor], spec: LstmSpec, x: Tensor,
                hs: List[Tensor], cs: List[Tensor], prefix: str = ""):
    h_in = x
    new_hs, new_cs = [], []
    H = spec.hidden
    idx = np.arange(4 * H)
    for k in range(spec.layers):
        z = T.add(T.add(T.matmul(h_in, params[f"{prefix}l{k}.wx"]),
                        T.matmul(hs[k], params[f"{prefix}l{k}.wh"])),
                  params[f"{prefix}l{k}.b"])
        i = T.sigmoid(T.gather_columns(z, idx[0:H]))
        f = T.sigmoid(T.gather_columns(z, idx[H:2 * H]))
        g = T.tanh(T.gather_columns(z, idx[2 * H:3 * H]))
        o = T.sigmoid(T.gather_columns(z, idx[3 * H:4 * H]))
        c = T.add(T.mul(f, cs[k]), T.mul(i, g))
        h = T.mul(o, T.tanh(c))
        new_hs.append(h)
        new_cs.append(c)
        h_in = h
    return h_in, new_hs, new_cs


def wrap_params(params: Params) -> Dict[str, Tensor]:
    return {k: Tensor(v) for k, v in params.items()}


def extract_grads(tparams: Dict[str, Tensor]) -> Params:
    return {k: (t.grad if t.grad is not None else np.zeros_like(t.data))
            for k, t in tparams.items()}


def global_norm_clip(grads: Params, max_norm: float) -> Params:
    total = 0.0
    for g in grads.values():
        total += float(np.sum(np.square(g, dtype=np.float64)))
    norm = np.sqrt(total)
    if norm > max_norm and norm > 0:
        scale = np.float32(max_norm / norm)
        return {k: g * scale for k, g in grads.items()}
    return grads
