"""
Adam optimizer over named parameter dicts.

For step t (1-based), gradient g and hyperparameters lr, b1, b2, eps:

    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g * g
    p = p - lr * (m / (1 - b1 ** t)) / (sqrt(v / (1 - b2 ** t)) + eps)
"""

from dataclasses import asdict, dataclass, field
from typing import Dict, Tuple

import numpy as np

from ..errors import ConfigError, ShapeMismatchError
from ..utils import strict_fields


@dataclass
class OptimizerConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    steps: int = 2000

    def __post_init__(self):
        if self.lr < 0:
            raise ConfigError(f"lr must be non-negative, got {self.lr}")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ConfigError("beta1 and beta2 must lie in [0, 1)")
        if self.eps <= 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.steps < 1:
            raise ConfigError(f"steps must be at least 1, got {self.steps}")

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict, section: str = 'optimizer') -> 'OptimizerConfig':
        return cls(**strict_fields(cls, data, section))


@dataclass
class OptState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_config(cls, config: OptimizerConfig) -> 'OptState':
        return cls(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)


def adam_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray],
              state: OptState) -> Tuple[Dict[str, np.ndarray], OptState]:
    """
    Apply one bias-corrected Adam update.

    Args:
        params: Parameter arrays by name (left untouched)
        grads: Gradient arrays with the same names and shapes
        state: Moments and step counter from the previous call

    Returns:
        tuple: (updated parameter dict, new OptState)

    Raises:
        ShapeMismatchError: names or shapes of params, grads and moments disagree
    """
    if set(params) != set(grads):
        raise ShapeMismatchError(f"parameter names {sorted(params)} differ from gradient names {sorted(grads)}")

    step = state.step + 1
    correction1 = 1.0 - state.beta1 ** step
    correction2 = 1.0 - state.beta2 ** step

    new_params, new_m, new_v = {}, {}, {}
    for name, param in params.items():
        grad = grads[name]
        if grad.shape != param.shape:
            raise ShapeMismatchError(f"gradient for {name!r} has shape {grad.shape}, parameter {param.shape}")
        m = state.m.get(name, np.zeros_like(param))
        v = state.v.get(name, np.zeros_like(param))
        if m.shape != param.shape or v.shape != param.shape:
            raise ShapeMismatchError(f"moment shapes for {name!r} do not match the parameter")

        grad = grad.astype(param.dtype, copy=False)
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * (grad * grad)
        update = state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)

        new_params[name] = (param - update).astype(param.dtype, copy=False)
        new_m[name] = m
        new_v[name] = v

    new_state = OptState(state.lr, state.beta1, state.beta2, state.eps, step, new_m, new_v)
    return new_params, new_state
