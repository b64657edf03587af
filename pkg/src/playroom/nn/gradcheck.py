"""Central finite-difference gradient verification for taped losses."""

from __future__ import annotations

from typing import Callable, Dict

import numpy as np

from .layers import extract_grads, wrap_params
from .tensor import Tensor

Params = Dict[str, np.ndarray]


def analytic_grads(loss_t: Callable[[Dict[str, Tensor]], Tensor],
                   params: Params) -> Params:
    tparams = wrap_params(params)
    loss = loss_t(tparams)
    loss.backward()
    return extract_grads(tparams)


def finite_diff_grads(loss_np: Callable[[Params], float], params: Params,
                      h: float = 1e-3) -> Params:
    grads: Params = {}
    for k, p in params.items():
        g = np.zeros_like(p, dtype=np.float64)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_np(params)
            flat[i] = orig - h
            down = loss_np(params)
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads[k] = g
    return grads


def relative_errors(analytic: Params, numeric: Params) -> np.ndarray:
    errs = []
    for k in analytic:
        a = analytic[k].reshape(-1).astype(np.float64)
        n = numeric[k].reshape(-1)
        errs.append(np.abs(a - n) / (np.abs(a) + np.abs(n) + 1e-6))
    return np.concatenate(errs)
