"""Deterministic scalar/array math the model is built on.

Everything here is float64 and pure: outputs depend only on the inputs
(random draws come from an explicitly passed Rng, which advances in place
like any numpy generator).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ContractViolationError


class Rng:
    """Seeded random source with named child streams.

    Wraps numpy's PCG64 generator, whose output for a given seed is fixed
    across platforms. ``derive(label)`` gives an independent stream whose
    seed is a SHA-256 mix of (seed, label), so the randomness used by one
    feature (init, dropout, shuffling, ...) can be changed or replayed
    without disturbing the others.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def derive(self, label: str) -> "Rng":
        digest = hashlib.sha256(f"{self.seed}:{label}".encode("utf-8")).digest()
        return Rng(int.from_bytes(digest[:8], "little"))

    # Draws below delegate to the wrapped generator (which advances in place).

    def uniform(self, low: float, high: float, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def normal(self, loc: float, scale: float, size=None) -> np.ndarray:
        return self._gen.normal(loc, scale, size)

    def random(self, size=None) -> np.ndarray:
        return self._gen.random(size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low: int, high: int) -> int:
        return int(self._gen.integers(low, high))


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Elementwise logistic function 1/(1+e^-x), stable for large |x|."""
    return expit(np.asarray(x, dtype=np.float64))


def tanh_act(x: np.ndarray) -> np.ndarray:
    """Elementwise hyperbolic tangent."""
    return np.tanh(np.asarray(x, dtype=np.float64))


def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(0, x)."""
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Probabilities proportional to exp(logits), along the last axis.

    The running maximum is subtracted before exponentiation, so the result
    is invariant under adding a constant to all logits and never overflows.
    """
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


PROB_FLOOR = 1e-12


def cross_entropy(pred: np.ndarray, target_class: int) -> float:
    """-ln(pred[target_class]), with the probability clamped to >= 1e-12."""
    pred = np.asarray(pred, dtype=np.float64)
    if not 0 <= target_class < pred.shape[-1]:
        raise ContractViolationError(
            f"target_class {target_class} out of range for {pred.shape[-1]} classes"
        )
    return float(-np.log(max(float(pred[target_class]), PROB_FLOOR)))


def dropout_mask(rng: Rng, shape, rate: float) -> np.ndarray:
    """Inverted-dropout mask: 0 with probability ``rate``, else 1/(1-rate).

    Scaling at training time keeps the expected activation unchanged, so
    inference applies no mask at all.
    """
    if not 0.0 <= rate < 1.0:
        raise ContractViolationError(f"dropout rate must be in [0, 1), got {rate}")
    keep = rng.random(shape) >= rate
    return keep.astype(np.float64) / (1.0 - rate)


@dataclass
class AdamState:
    """Per-parameter Adam accumulators. ``t`` counts completed steps."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    learning_rate: float = 0.025

    @classmethod
    def for_param(cls, param: np.ndarray, learning_rate: float,
                  beta1: float = 0.9, beta2: float = 0.999,
                  epsilon: float = 1e-8) -> "AdamState":
        return cls(m=np.zeros_like(param), v=np.zeros_like(param),
                   beta1=beta1, beta2=beta2, epsilon=epsilon,
                   learning_rate=learning_rate)


def adam_update(param: np.ndarray, grad: np.ndarray,
                state: AdamState) -> tuple[np.ndarray, AdamState]:
    """One Adam step with bias correction; returns (new param, new state)."""
    if param.shape != grad.shape or param.shape != state.m.shape:
        raise ContractViolationError(
            f"shape mismatch: param {param.shape}, grad {grad.shape}, "
            f"state {state.m.shape}"
        )
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_param = param - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    new_state = AdamState(m=m, v=v, t=t, beta1=state.beta1, beta2=state.beta2,
                          epsilon=state.epsilon, learning_rate=state.learning_rate)
    return new_param, new_state


def finite_diff_gradient(loss_fn, params: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar loss, one coordinate at a time.

    Verification oracle: slow (two loss evaluations per coordinate) but
    independent of any analytic gradient code.
    """
    if h <= 0:
        raise ContractViolationError(f"step size must be positive, got {h}")
    params = np.array(params, dtype=np.float64)  # owned copy; ravel is a view
    flat = params.ravel()
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = loss_fn(params)
        flat[i] = orig - h
        down = loss_fn(params)
        flat[i] = orig
        grad[i] = (up - down) / (2.0 * h)
    return grad.reshape(params.shape)
