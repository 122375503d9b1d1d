"""
Dense tensor kernels with hand-written backward passes.

A Tensor here is a 4-D numpy array laid out as (batch, channels, height,
width). Two storage precisions are supported: "single" (float32) for
desk-scale runs and "double" (float64) for gradient checks. Every kernel keeps
the dtype of its input.

Convolution output extents follow

    pad = k // 2   (padding "zero")      pad = 0   (padding "none")
    out = (in + 2 * pad - k) // stride + 1

Bilinear resizing uses the align-corners-false convention: output sample k
reads the input at

    src = (k + 0.5) * in / out - 0.5,   clamped to [0, in - 1]

and blends the two neighbouring input samples linearly.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeMismatchError

DTYPES = {
    'single': np.float32,
    'double': np.float64,
}

PADDINGS = ('zero', 'none')


def dtype_for(precision: str):
    """Map a precision name to its numpy dtype."""
    try:
        return DTYPES[precision]
    except KeyError:
        raise ValueError(f"unknown precision {precision!r}; expected one of {sorted(DTYPES)}")


def as_tensor(data, precision: str = 'single') -> np.ndarray:
    """Return a contiguous 4-D array of the requested precision."""
    arr = np.ascontiguousarray(data, dtype=dtype_for(precision))
    if arr.ndim != 4:
        raise ShapeMismatchError(f"a tensor must have 4 extents, got shape {arr.shape}")
    return arr


def _require_4d(t: np.ndarray, name: str):
    if t.ndim != 4:
        raise ShapeMismatchError(f"{name} must have 4 extents, got shape {t.shape}")


def _require_same_shape(a: np.ndarray, b: np.ndarray, what: str):
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{what}: shape {a.shape} does not match {b.shape}")


@dataclass
class ConvSpec:
    """
    A single convolution layer.

    weight is (out_ch, in_ch, kh, kw) with odd kh, kw; bias holds one value
    per output channel.
    """

    weight: np.ndarray
    bias: np.ndarray
    stride: int = 1
    padding: str = 'zero'

    def __post_init__(self):
        self.weight = np.asarray(self.weight)
        self.bias = np.asarray(self.bias)
        if self.weight.ndim != 4:
            raise ShapeMismatchError(f"conv weight must be (out, in, kh, kw), got {self.weight.shape}")
        kh, kw = self.weight.shape[2:]
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeMismatchError(f"conv kernel extents must be odd, got {kh}x{kw}")
        if self.bias.shape != (self.weight.shape[0],):
            raise ShapeMismatchError(
                f"conv bias must have shape ({self.weight.shape[0]},), got {self.bias.shape}"
            )
        if int(self.stride) != self.stride or self.stride < 1:
            raise ValueError(f"conv stride must be a positive integer, got {self.stride}")
        if self.padding not in PADDINGS:
            raise ValueError(f"conv padding must be one of {PADDINGS}, got {self.padding!r}")

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def kernel_size(self) -> Tuple[int, int]:
        return self.weight.shape[2], self.weight.shape[3]

    @property
    def pad(self) -> Tuple[int, int]:
        if self.padding == 'none':
            return 0, 0
        kh, kw = self.kernel_size
        return kh // 2, kw // 2


def conv_output_size(height: int, width: int, spec: ConvSpec) -> Tuple[int, int]:
    kh, kw = spec.kernel_size
    ph, pw = spec.pad
    out_h = (height + 2 * ph - kh) // spec.stride + 1
    out_w = (width + 2 * pw - kw) // spec.stride + 1
    return out_h, out_w


def _padded_windows(x: np.ndarray, spec: ConvSpec):
    ph, pw = spec.pad
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x
    windows = sliding_window_view(xp, spec.kernel_size, axis=(2, 3))
    return xp, windows[:, :, ::spec.stride, ::spec.stride]


def _checked_conv_geometry(x: np.ndarray, spec: ConvSpec) -> Tuple[int, int]:
    _require_4d(x, 'conv input')
    if x.shape[1] != spec.in_channels:
        raise ShapeMismatchError(
            f"conv input has {x.shape[1]} channels, kernel expects {spec.in_channels}"
        )
    out_h, out_w = conv_output_size(x.shape[2], x.shape[3], spec)
    if out_h <= 0 or out_w <= 0:
        raise ShapeMismatchError(
            f"conv of a {x.shape[2]}x{x.shape[3]} input with kernel {spec.kernel_size} "
            f"and padding {spec.padding!r} has no output positions"
        )
    return out_h, out_w


def conv2d_forward(x: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """
    Cross-correlate x with spec.weight and add spec.bias.

    Args:
        x: Tensor (N, in_ch, H, W)
        spec: Convolution layer

    Returns:
        np.ndarray: Tensor (N, out_ch, out_h, out_w)

    Raises:
        ShapeMismatchError: channel mismatch or empty output
    """
    _checked_conv_geometry(x, spec)
    weight = spec.weight.astype(x.dtype, copy=False)
    bias = spec.bias.astype(x.dtype, copy=False)

    _, windows = _padded_windows(x, spec)
    out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3]))
    out = out.transpose(0, 3, 1, 2) + bias[None, :, None, None]
    return np.ascontiguousarray(out)


def conv2d_backward(x: np.ndarray, spec: ConvSpec, grad_out: np.ndarray):
    """
    Gradients of conv2d_forward.

    Returns:
        tuple: (grad_input, grad_weight, grad_bias)
    """
    out_h, out_w = _checked_conv_geometry(x, spec)
    expected = (x.shape[0], spec.out_channels, out_h, out_w)
    if grad_out.shape != expected:
        raise ShapeMismatchError(f"conv grad_out has shape {grad_out.shape}, expected {expected}")

    weight = spec.weight.astype(x.dtype, copy=False)
    grad_out = grad_out.astype(x.dtype, copy=False)
    xp, windows = _padded_windows(x, spec)

    grad_bias = grad_out.sum(axis=(0, 2, 3))
    grad_weight = np.tensordot(grad_out, windows, axes=([0, 2, 3], [0, 2, 3]))

    s = spec.stride
    kh, kw = spec.kernel_size
    grad_padded = np.zeros(xp.shape, dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            contrib = np.tensordot(grad_out, weight[:, :, i, j], axes=([1], [0]))
            grad_padded[:, :, i:i + s * (out_h - 1) + 1:s, j:j + s * (out_w - 1) + 1:s] += (
                contrib.transpose(0, 3, 1, 2)
            )

    ph, pw = spec.pad
    grad_input = grad_padded[:, :, ph:ph + x.shape[2], pw:pw + x.shape[3]]
    return np.ascontiguousarray(grad_input), grad_weight, grad_bias


def relu_forward(t: np.ndarray) -> np.ndarray:
    return np.maximum(t, 0)


def relu_backward(t: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Mask grad_out where the forward input was <= 0 (the gradient at 0 is 0)."""
    _require_same_shape(t, grad_out, 'relu backward')
    return grad_out * (t > 0)


def maxpool2_forward(t: np.ndarray):
    """
    2x2 stride-2 max pooling.

    Returns:
        tuple: (pooled tensor, argmax indices 0..3 within each window)

    Ties go to the first position of the window in row-major order.
    """
    _require_4d(t, 'maxpool input')
    n, c, h, w = t.shape
    if h % 2 or w % 2:
        raise ShapeMismatchError(f"maxpool needs even spatial extents, got {h}x{w}")

    windows = t.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    windows = windows.reshape(n, c, h // 2, w // 2, 4)
    indices = np.argmax(windows, axis=-1)
    pooled = np.take_along_axis(windows, indices[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(pooled), indices


def maxpool2_backward(indices: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Scatter grad_out to the recorded argmax positions."""
    _require_4d(grad_out, 'maxpool grad_out')
    _require_same_shape(indices, grad_out, 'maxpool backward')
    n, c, h, w = grad_out.shape

    scattered = np.zeros((n, c, h, w, 4), dtype=grad_out.dtype)
    np.put_along_axis(scattered, indices[..., None], grad_out[..., None], axis=-1)
    scattered = scattered.reshape(n, c, h, w, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return np.ascontiguousarray(scattered.reshape(n, c, 2 * h, 2 * w))


def _resize_axis(n_in: int, n_out: int, dtype):
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = (src - lo).astype(dtype)
    return lo, hi, frac


def bilinear_resize(t: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize the spatial extents of t with align-corners-false bilinear sampling."""
    _require_4d(t, 'resize input')
    if out_h <= 0 or out_w <= 0:
        raise ValueError(f"resize target must be positive, got {out_h}x{out_w}")

    lo, hi, frac = _resize_axis(t.shape[2], out_h, t.dtype)
    rows = t[:, :, lo, :] * (1 - frac)[:, None] + t[:, :, hi, :] * frac[:, None]

    lo, hi, frac = _resize_axis(t.shape[3], out_w, t.dtype)
    out = rows[:, :, :, lo] * (1 - frac) + rows[:, :, :, hi] * frac
    return np.ascontiguousarray(out)
