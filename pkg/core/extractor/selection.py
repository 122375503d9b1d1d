"""
Learnable 1x1 selection layers appended to the frozen trunk.

Each tap gets 1x1 conv -> relu -> 1x1 conv. Parameters are kept in a flat
dict keyed "<tap>.w1", "<tap>.b1", "<tap>.w2", "<tap>.b2" so that the
optimizer can treat them like any other parameter set.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from ..errors import ShapeMismatchError, UnknownTapError
from ..kernels import ConvSpec, conv2d_backward, conv2d_forward, relu_backward, relu_forward
from .extract import FeatureStack
from .weights import read_container, write_container

logger = logging.getLogger(__name__)

PARAM_SUFFIXES = ('w1', 'b1', 'w2', 'b2')


@dataclass
class SelectionLayers:
    params: Dict[str, np.ndarray]

    def __post_init__(self):
        for tap in self.taps:
            w1, b1, w2, b2 = (self.params[f'{tap}.{s}'] for s in PARAM_SUFFIXES)
            hidden, channels = w1.shape[:2]
            if w1.shape != (hidden, channels, 1, 1) or b1.shape != (hidden,):
                raise ShapeMismatchError(f"selection layer 1 of {tap!r} has inconsistent shapes")
            if w2.shape[1:] != (hidden, 1, 1) or b2.shape != (w2.shape[0],):
                raise ShapeMismatchError(f"selection layer 2 of {tap!r} has inconsistent shapes")

    @property
    def taps(self):
        return sorted({key.rsplit('.', 1)[0] for key in self.params})

    def hidden(self, tap: str) -> int:
        return self.params[f'{tap}.w1'].shape[0]

    def specs(self, tap: str, dtype) -> Tuple[ConvSpec, ConvSpec]:
        if f'{tap}.w1' not in self.params:
            raise UnknownTapError(f"no selection layers for tap {tap!r}")
        p = self.params
        first = ConvSpec(p[f'{tap}.w1'].astype(dtype), p[f'{tap}.b1'].astype(dtype))
        second = ConvSpec(p[f'{tap}.w2'].astype(dtype), p[f'{tap}.b2'].astype(dtype))
        return first, second

    def copy(self) -> 'SelectionLayers':
        return SelectionLayers({k: v.copy() for k, v in self.params.items()})


def init_selection(tap_channels: Dict[str, int], seed: int = 0, std: float = 0.01,
                   hidden: Optional[int] = None) -> SelectionLayers:
    """
    Small-random selection layers: weights N(0, std^2), zero biases.

    The hidden width defaults to the tap channel count.
    """
    rng = np.random.default_rng(seed)
    params = {}
    for tap in sorted(tap_channels):
        channels = tap_channels[tap]
        width = hidden or channels
        params[f'{tap}.w1'] = rng.normal(0.0, std, size=(width, channels, 1, 1)).astype(np.float32)
        params[f'{tap}.b1'] = np.zeros(width, dtype=np.float32)
        params[f'{tap}.w2'] = rng.normal(0.0, std, size=(channels, width, 1, 1)).astype(np.float32)
        params[f'{tap}.b2'] = np.zeros(channels, dtype=np.float32)
    return SelectionLayers(params)


def identity_selection(tap_channels: Dict[str, int]) -> SelectionLayers:
    """Square identity weights with zero biases: output = relu(input)."""
    params = {}
    for tap in sorted(tap_channels):
        eye = np.eye(tap_channels[tap], dtype=np.float32)[:, :, None, None]
        params[f'{tap}.w1'] = eye.copy()
        params[f'{tap}.b1'] = np.zeros(tap_channels[tap], dtype=np.float32)
        params[f'{tap}.w2'] = eye.copy()
        params[f'{tap}.b2'] = np.zeros(tap_channels[tap], dtype=np.float32)
    return SelectionLayers(params)


def apply_selection(stack: FeatureStack, sel: SelectionLayers) -> FeatureStack:
    """
    Run every tap that has selection layers through 1x1 conv -> relu -> 1x1 conv.

    Raises:
        UnknownTapError: selection layers exist for a tap the stack lacks
        ShapeMismatchError: channel count mismatch
    """
    taps = {}
    cache = {}
    for tap in sel.taps:
        features = stack.features(tap)
        first, second = sel.specs(tap, features.dtype)
        if features.shape[1] != first.in_channels:
            raise ShapeMismatchError(
                f"tap {tap!r} has {features.shape[1]} channels, selection expects {first.in_channels}"
            )
        hidden = conv2d_forward(features, first)
        active = relu_forward(hidden)
        taps[tap] = (conv2d_forward(active, second), stack.stride(tap))
        cache[tap] = (features, hidden, active)

    return FeatureStack(
        taps,
        arch=stack.arch,
        image_shape=stack.image_shape,
        parent=stack,
        selection=sel,
        selection_cache=cache,
    )


def selection_backward(stack: FeatureStack, grad_per_tap: Dict[str, np.ndarray]):
    """
    Backward through the selection layers of a stack made by apply_selection.

    Returns:
        tuple: (gradients w.r.t. the trunk taps, gradients w.r.t. every selection parameter)
    """
    sel = stack.selection
    trunk_grads = {}
    param_grads = {k: np.zeros_like(v) for k, v in sel.params.items()}

    for tap, grad in grad_per_tap.items():
        features, hidden, active = stack.selection_cache[tap]
        first, second = sel.specs(tap, features.dtype)
        if grad.shape != stack.features(tap).shape:
            raise ShapeMismatchError(f"gradient for tap {tap!r} has shape {grad.shape}")

        grad_active, grad_w2, grad_b2 = conv2d_backward(active, second, grad)
        grad_hidden = relu_backward(hidden, grad_active)
        grad_features, grad_w1, grad_b1 = conv2d_backward(features, first, grad_hidden)

        trunk_grads[tap] = grad_features
        for suffix, value in zip(PARAM_SUFFIXES, (grad_w1, grad_b1, grad_w2, grad_b2)):
            key = f'{tap}.{suffix}'
            param_grads[key] = value.astype(sel.params[key].dtype)

    return trunk_grads, param_grads


def save_selection(sel: SelectionLayers, manifest_path):
    tensors = [(key, sel.params[key]) for tap in sel.taps for key in
               (f'{tap}.{s}' for s in PARAM_SUFFIXES)]
    meta = {'kind': 'selection', 'hidden': {tap: sel.hidden(tap) for tap in sel.taps}}
    return write_container(manifest_path, tensors, meta=meta)


def load_selection(manifest_path) -> SelectionLayers:
    _, tensors = read_container(manifest_path)
    logger.info("[Selection] loaded %d tensors from %s", len(tensors), manifest_path)
    return SelectionLayers(dict(tensors))
