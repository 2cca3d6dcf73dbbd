"""Adam optimizer over named parameter trees (dict of arrays)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import OptimizerError, ShapeError


@dataclass
class AdamState:
    """First/second moment accumulators with bias-corrected updates."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict, grads: dict) -> dict:
    """One bias-corrected update; returns the new parameter tree.

    Mutates ``state`` (moments and step counter). Raises OptimizerError
    naming the parameter block if any gradient entry is non-finite.
    """
    if params.keys() != grads.keys():
        raise ShapeError("parameter and gradient trees have different keys")
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    new = {}
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape} for {key!r}")
        if not np.all(np.isfinite(g)):
            raise OptimizerError(f"non-finite gradient in parameter block {key!r}")
        m = state.m.get(key)
        if m is None:
            m = np.zeros_like(p)
            state.v[key] = np.zeros_like(p)
        v = state.v[key]
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[key] = m
        state.v[key] = v
        new[key] = p - state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return new
