from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params) -> dict:
    return {"t": 0, "m": [np.zeros_like(p) for p in params], "v": [np.zeros_like(p) for p in params]}


def adam_step(params, grads, state: dict, hyper: AdamHyper = AdamHyper()) -> dict:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient passed to adam_step")
    t = state["t"] + 1
    b1, b2 = hyper.beta1, hyper.beta2
    c1 = 1 - b1**t
    c2 = 1 - b2**t
    for p, g, m, v in zip(params, grads, state["m"], state["v"]):
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        p -= (hyper.lr / c1) * m / (np.sqrt(v / c2) + hyper.eps)
    state["t"] = t
    return state
