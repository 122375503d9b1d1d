"""
Forward feature extraction with cached activations, and backpropagation from
tap-space gradients to image-space gradients.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..errors import ShapeMismatchError, UnknownTapError
from ..kernels import (conv2d_backward, conv2d_forward, maxpool2_backward, maxpool2_forward,
                       relu_backward, relu_forward)
from .arch import ArchSpec
from .weights import ExtractorWeights


@dataclass
class TrunkCache:
    """Everything extract_backward needs to replay the forward pass."""

    inputs: List[np.ndarray]
    specs: Dict
    pool_indices: Dict[int, np.ndarray]
    std: Optional[np.ndarray] = None


@dataclass
class FeatureStack:
    """
    Features exposed at named taps, each with its stride relative to the image.

    A stack produced by apply_selection keeps a reference to the trunk stack it
    was computed from (`parent`) so that extract_backward can chain through both.
    """

    taps: Dict[str, Tuple[np.ndarray, int]]
    arch: Optional[ArchSpec] = None
    image_shape: Optional[Tuple[int, ...]] = None
    cache: Optional[TrunkCache] = None
    parent: Optional['FeatureStack'] = None
    selection: Optional[object] = None
    selection_cache: Dict = field(default_factory=dict)

    @property
    def names(self) -> List[str]:
        return list(self.taps)

    def features(self, name: str) -> np.ndarray:
        if name not in self.taps:
            raise UnknownTapError(f"tap {name!r} not in feature stack (have {self.names})")
        return self.taps[name][0]

    def stride(self, name: str) -> int:
        if name not in self.taps:
            raise UnknownTapError(f"tap {name!r} not in feature stack (have {self.names})")
        return self.taps[name][1]

    @property
    def activations(self) -> List[np.ndarray]:
        """Output of every trunk layer that ran, in layer order."""
        root = self
        while root.parent is not None:
            root = root.parent
        return root.cache.inputs[1:]


def _precision_of(image: np.ndarray) -> str:
    return 'double' if image.dtype == np.float64 else 'single'


def extract(image: np.ndarray, weights: ExtractorWeights, arch: Optional[ArchSpec] = None) -> FeatureStack:
    """
    Run the trunk on an image and expose its taps.

    Args:
        image: Tensor (N, 3, H, W) with values in [0, 1]; float64 input runs in double precision
        weights: Extractor weights
        arch: Architecture, defaults to weights.arch

    Returns:
        FeatureStack: taps plus the activation cache for extract_backward

    Raises:
        ShapeMismatchError: wrong channel count
    """
    arch = arch or weights.arch
    precision = _precision_of(image)
    image = np.ascontiguousarray(image, dtype=np.float64 if precision == 'double' else np.float32)

    if image.ndim != 4 or image.shape[1] != arch.in_channels:
        raise ShapeMismatchError(
            f"image must be (N, {arch.in_channels}, H, W), got shape {image.shape}"
        )

    specs = weights.conv_specs(precision)
    std = None
    x = image
    if weights.normalization is not None:
        mean = np.asarray(weights.normalization.mean, dtype=image.dtype)[None, :, None, None]
        std = np.asarray(weights.normalization.std, dtype=image.dtype)[None, :, None, None]
        x = (image - mean) / std

    inputs = [x]
    pool_indices = {}
    for index in range(arch.depth):
        layer = arch.layers[index]
        if layer.kind == 'conv':
            x = conv2d_forward(x, specs[index])
        elif layer.kind == 'relu':
            x = relu_forward(x)
        else:
            x, pool_indices[index] = maxpool2_forward(x)
        inputs.append(x)

    taps = {name: (inputs[index + 1], arch.stride_at(index)) for name, index in arch.taps.items()}
    cache = TrunkCache(inputs, specs, pool_indices, std)
    return FeatureStack(taps, arch=arch, image_shape=image.shape, cache=cache)


def _check_tap_grads(stack: FeatureStack, grad_per_tap: Dict[str, np.ndarray]):
    for name, grad in grad_per_tap.items():
        features = stack.features(name)
        if grad.shape != features.shape:
            raise ShapeMismatchError(
                f"gradient for tap {name!r} has shape {grad.shape}, features have {features.shape}"
            )


def extract_backward(stack: FeatureStack, grad_per_tap: Dict[str, np.ndarray]) -> np.ndarray:
    """
    Chain tap gradients back to the image.

    Args:
        stack: FeatureStack from extract (or apply_selection)
        grad_per_tap: Gradient w.r.t. a subset of the stack's taps

    Returns:
        np.ndarray: gradient w.r.t. the image, same shape as the image

    Raises:
        UnknownTapError: a tap is not in the stack
        ShapeMismatchError: a gradient shape does not match its tap
    """
    _check_tap_grads(stack, grad_per_tap)

    if stack.selection is not None:
        from .selection import selection_backward

        trunk_grads, _ = selection_backward(stack, grad_per_tap)
        return extract_backward(stack.parent, trunk_grads)

    cache = stack.cache
    dtype = cache.inputs[0].dtype
    if not grad_per_tap:
        return np.zeros(stack.image_shape, dtype=dtype)

    arch = stack.arch
    tap_at = {arch.taps[name]: name for name in grad_per_tap}
    grad = None
    for index in range(max(tap_at), -1, -1):
        if index in tap_at:
            tap_grad = grad_per_tap[tap_at[index]].astype(dtype, copy=False)
            grad = tap_grad.copy() if grad is None else grad + tap_grad
        if grad is None:
            continue

        layer = arch.layers[index]
        layer_input = cache.inputs[index]
        if layer.kind == 'conv':
            grad = conv2d_backward(layer_input, cache.specs[index], grad)[0]
        elif layer.kind == 'relu':
            grad = relu_backward(layer_input, grad)
        else:
            grad = maxpool2_backward(cache.pool_indices[index], grad)

    if cache.std is not None:
        grad = grad / cache.std
    return grad
