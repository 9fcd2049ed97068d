"""Adam optimizer with bias correction, plus global-norm gradient clipping."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import NumericError
from .autograd import Parameter


@dataclass
class AdamConfig:
    learning_rate: float = 0.0005
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning rate must be positive, got {self.learning_rate}")
        if not 0 < self.beta1 < 1 or not 0 < self.beta2 < 1:
            raise ValueError(f"betas must lie in (0, 1), got {self.beta1}, {self.beta2}")


def adam_step(param: Parameter, config: AdamConfig):
    """One bias-corrected Adam update; zeroes the gradient afterwards."""
    g = param.grad
    if not np.all(np.isfinite(g)):
        raise NumericError(f"non-finite gradient in parameter {param.name!r}; training aborted")
    param.step_count += 1
    t = param.step_count
    param.adam_m *= config.beta1
    param.adam_m += (1.0 - config.beta1) * g
    param.adam_v *= config.beta2
    param.adam_v += (1.0 - config.beta2) * g * g
    m_hat = param.adam_m / (1.0 - config.beta1 ** t)
    v_hat = param.adam_v / (1.0 - config.beta2 ** t)
    param.data -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
    param.grad.fill(0.0)


def global_grad_norm(params) -> float:
    total = 0.0
    for p in params:
        total += float(np.sum(p.grad * p.grad))
    return math.sqrt(total)


def clip_gradients(params, max_norm: float) -> float:
    """Scale all gradients so their global norm is at most max_norm."""
    norm = global_grad_norm(params)
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for p in params:
            p.grad *= factor
    return norm
