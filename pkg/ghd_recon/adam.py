"""
Adam optimizer.

Contains the immutable moment state and a functional bias-corrected update.
"""

from typing import NamedTuple, Tuple

import numpy as np

from .exceptions import DimensionMismatchError, NonFiniteGradientError


class AdamState(NamedTuple):
    """First moment m, second moment v and step count t."""
    m: np.ndarray
    v: np.ndarray
    t: int

    @classmethod
    def zeros_like(cls, parameters: np.ndarray) -> "AdamState":
        shape = np.shape(parameters)
        return cls(np.zeros(shape), np.zeros(shape), 0)


def adam_update(
    state: AdamState,
    gradient: np.ndarray,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> Tuple[AdamState, np.ndarray]:
    """
    One bias-corrected Adam step.

    Args:
        state: Moments before the step
        gradient: Gradient of the objective, same shape as the moments
        lr: Learning rate
        beta1: First moment decay
        beta2: Second moment decay
        eps: Denominator offset

    Returns:
        Tuple of (new state, parameter step); add the step to the parameters

    Raises:
        NonFiniteGradientError: When the gradient contains NaN or inf
        DimensionMismatchError: When shapes disagree

    Example:
        >>> state = AdamState.zeros_like(x)
        >>> state, step = adam_update(state, grad, lr=0.05)
        >>> x = x + step
    """
    g = np.asarray(gradient, dtype=np.float64)
    if g.shape != state.m.shape:
        raise DimensionMismatchError("gradient", state.m.shape, g.shape)
    t = state.t + 1
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradientError(t)
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * (g * g)
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    step = -lr * m_hat / (np.sqrt(v_hat) + eps)
    return AdamState(m, v, t), step
