"""Adam with cosine-annealed learning rate, on flat parameter vectors."""

import math
from dataclasses import dataclass, field

import numpy as np


def params_pack(arrays):
    """Flatten a list of arrays into one vector."""
    if not arrays:
        return np.zeros(0)
    return np.concatenate([np.asarray(a, dtype=np.float64).ravel() for a in arrays])


def params_unpack(vec, like):
    """Inverse of params_pack given template arrays for shapes."""
    out = []
    pos = 0
    for a in like:
        n = a.size
        out.append(vec[pos:pos + n].reshape(a.shape).copy())
        pos += n
    if pos != vec.size:
        raise ValueError("vector length %d does not match templates (%d)" % (vec.size, pos))
    return out


def cosine_lr(lr0, step, total_steps):
    """Cosine annealing from lr0 to 0 over total_steps."""
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    t = min(max(step, 0), total_steps)
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * t / total_steps))


@dataclass
class AdamState:
    """Optimizer state: first/second moment estimates and step counter."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, n_params, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(np.zeros(n_params), np.zeros(n_params), 0, beta1, beta2, eps)


def adam_step(state, params, grad, lr):
    """One Adam update; returns new params, mutates state in place."""
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise ValueError("shape mismatch between params, grad and state")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    mhat = state.m / (1.0 - state.beta1 ** state.step)
    vhat = state.v / (1.0 - state.beta2 ** state.step)
    return params - lr * mhat / (np.sqrt(vhat) + state.eps)
