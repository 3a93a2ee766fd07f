"""Adamax, in two flavours.

``PAPER_LITERAL`` bias-corrects both moments::

    m  <- mu * m + (1 - mu) * g
    n  <- max(v * n, |g|)
    m^ = m / (1 - mu**t),  n^ = n / (1 - v**t)
    dtheta = -eta * m^ / (n^ + eps)

``STANDARD`` is the usual Adamax step, which corrects only the first moment:
``dtheta = -(eta / (1 - mu**t)) * m / (n + eps)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class AdamaxVariant(str, enum.Enum):
    PAPER_LITERAL = "paper_literal"
    STANDARD = "standard"


@dataclass(frozen=True)
class AdamaxHyper:
    mu: float = 0.9
    v: float = 0.999
    eta: float = 0.001
    eps: float = 1e-8

    def validate(self) -> None:
        if not 0 <= self.mu < 1 or not 0 <= self.v < 1:
            raise ValueError("mu and v must lie in [0, 1)")
        if not self.eta > 0 or not self.eps > 0:
            raise ValueError("eta and eps must be > 0")


@dataclass
class AdamaxState:
    m: np.ndarray
    n: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, param: np.ndarray) -> "AdamaxState":
        return cls(np.zeros_like(param), np.zeros_like(param), 0)


def adamax_step(state: AdamaxState, param: np.ndarray, grad: np.ndarray,
                hyper: AdamaxHyper = AdamaxHyper(),
                variant: AdamaxVariant = AdamaxVariant.STANDARD):
    """One update; ``state`` and ``param`` are modified in place and returned.

    Returns:
        ``(state, param, delta)`` where ``delta`` is the applied step.
    """
    variant = AdamaxVariant(variant)
    grad = np.asarray(grad)
    if grad.shape != param.shape or state.m.shape != param.shape:
        raise ValueError(f"shape mismatch: param {param.shape}, grad {grad.shape}, state {state.m.shape}")
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient: training is poisoned")
    t = state.t + 1
    mu, v = hyper.mu, hyper.v
    state.m *= mu
    state.m += (1.0 - mu) * grad
    np.maximum(v * state.n, np.abs(grad), out=state.n)
    if variant is AdamaxVariant.PAPER_LITERAL:
        m_hat = state.m / (1.0 - mu ** t)
        n_hat = state.n / (1.0 - v ** t)
        delta = -hyper.eta * m_hat / (n_hat + hyper.eps)
    else:
        delta = -(hyper.eta / (1.0 - mu ** t)) * state.m / (state.n + hyper.eps)
    delta = delta.astype(param.dtype, copy=False)
    param += delta
    state.t = t
    return state, param, delta


def init_state(model) -> dict:
    """Zero moments for every parameter of ``model``, keyed by parameter name."""
    return {name: AdamaxState.zeros_like(p.data) for name, p in model.params.items()}


class Adamax:
    """Steps every parameter of a model with its own :class:`AdamaxState`."""

    def __init__(self, model, hyper: AdamaxHyper = AdamaxHyper(),
                 variant: AdamaxVariant = AdamaxVariant.STANDARD):
        hyper.validate()
        self.model = model
        self.hyper = hyper
        self.variant = AdamaxVariant(variant)
        self.states = init_state(model)

    def step(self) -> None:
        for name, p in self.model.params.items():
            if p.grad is None:
                raise RuntimeError(f"parameter {name} has no gradient")
            adamax_step(self.states[name], p.data, p.grad, self.hyper, self.variant)

    def state_arrays(self) -> dict:
        out = {}
        for name, s in self.states.items():
            out[f"opt.m.{name}"] = s.m
            out[f"opt.n.{name}"] = s.n
        return out

    def steps_taken(self) -> dict:
        return {name: s.t for name, s in self.states.items()}

    def load_arrays(self, arrays: dict, steps: dict) -> None:
        for name, s in self.states.items():
            s.m = np.array(arrays[f"opt.m.{name}"], dtype=s.m.dtype)
            s.n = np.array(arrays[f"opt.n.{name}"], dtype=s.n.dtype)
            s.t = int(steps[name])
