"""Minimal dense numeric kernel.

Everything runs in float64. Gradients are hand-derived; the central
finite-difference checker here is what every other module's tests lean on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Deterministic generator keyed by (seed, stream).

    Distinct streams from the same seed are independent, so parallel data
    generation and masking can be reproduced exactly.
    """
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream])))


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax (max-subtraction)."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("softmax: logits must be finite")
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("log_softmax: logits must be finite")
    shifted = logits - logits.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def cross_entropy(logits: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """Softmax cross-entropy of a single K-way decision.

    Returns (loss, grad_logits) with grad = softmax(logits) - onehot(target).
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1:
        raise ValueError("cross_entropy expects a 1-d logit vector")
    if not 0 <= target < logits.shape[0]:
        raise IndexError(f"target {target} out of range for {logits.shape[0]} classes")
    logp = log_softmax(logits)
    grad = np.exp(logp)
    grad[target] -= 1.0
    return -float(logp[target]), grad


@dataclass
class AdamState:
    """Per-parameter Adam accumulators plus hyperparameters."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.m.shape != self.v.shape:
            raise ValueError("moment shapes disagree")

    @classmethod
    def for_param(cls, param: np.ndarray, **hyper) -> "AdamState":
        return cls(m=np.zeros_like(param, dtype=np.float64),
                   v=np.zeros_like(param, dtype=np.float64), **hyper)


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState) -> np.ndarray:
    """One bias-corrected Adam update, applied to `param` in place."""
    if param.shape != grad.shape or param.shape != state.m.shape:
        raise ValueError("adam_step: parameter/gradient/state shapes disagree")
    state.step += 1
    t = state.step
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1 ** t)
    v_hat = state.v / (1.0 - state.beta2 ** t)
    param -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return param


class Adam:
    """Adam over a named collection of parameter arrays (updated in place)."""

    def __init__(self, params: dict[str, np.ndarray], learning_rate: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.params = params
        self.state = {
            name: AdamState.for_param(p, learning_rate=learning_rate,
                                      beta1=beta1, beta2=beta2, epsilon=epsilon)
            for name, p in params.items()
        }

    def step(self, grads: dict[str, np.ndarray]) -> None:
        for name in self.params:
            adam_step(self.params[name], grads[name], self.state[name])


def finite_difference_check(f: Callable[[np.ndarray], float], x: np.ndarray,
                            analytic_grad: np.ndarray, epsilon: float = 1e-5) -> float:
    """Max relative error between central differences and an analytic gradient.

    Relative error per coordinate is |fd - an| / max(1e-8, |fd| + |an|).
    `x` is perturbed in place and restored; `f` must be deterministic.
    """
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    g = np.asarray(analytic_grad, dtype=np.float64).reshape(-1)
    if g.size != x.size:
        raise ValueError("gradient size does not match parameter size")
    flat = x.reshape(-1)
    worst = 0.0
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + epsilon
        f_plus = f(x)
        flat[i] = orig - epsilon
        f_minus = f(x)
        flat[i] = orig
        fd = (f_plus - f_minus) / (2.0 * epsilon)
        worst = max(worst, abs(fd - g[i]) / max(1e-8, abs(fd) + abs(g[i])))
    return worst
