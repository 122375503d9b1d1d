"""
Structure-preserving augmentation.

Every transform is pixel-wise: output pixel (r, c) depends only on input
pixel (r, c) and on parameters drawn once per image, so no transform can
move, blur or warp structure. Order of application:

    per-channel affine jitter  y = gain * x + bias
    optional grayscale         y = 0.299 R + 0.587 G + 0.114 B on all channels
    clamp to [0, 1], gamma     y = y ** gamma
    additive Gaussian noise    y = y + sigma * n
    clamp to [0, 1]
"""

from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from ..errors import ConfigError
from ..utils import strict_fields

GAIN_LIMITS = (0.6, 1.4)
BIAS_LIMITS = (-0.2, 0.2)
GAMMA_LIMITS = (0.7, 1.4)
NOISE_LIMIT = 0.05
LUMA = np.array([0.299, 0.587, 0.114])


def _check_range(name, value, limits):
    lo, hi = value
    if not limits[0] <= lo <= hi <= limits[1]:
        raise ConfigError(f"{name} must be an ordered pair inside {limits}, got {value}")


@dataclass
class AugmentSpec:
    gain_range: Tuple[float, float] = GAIN_LIMITS
    bias_range: Tuple[float, float] = BIAS_LIMITS
    gray_prob: float = 0.2
    gamma_range: Tuple[float, float] = GAMMA_LIMITS
    noise_max: float = NOISE_LIMIT
    seed: int = 0

    def __post_init__(self):
        self.gain_range = tuple(float(v) for v in self.gain_range)
        self.bias_range = tuple(float(v) for v in self.bias_range)
        self.gamma_range = tuple(float(v) for v in self.gamma_range)
        _check_range('gain_range', self.gain_range, GAIN_LIMITS)
        _check_range('bias_range', self.bias_range, BIAS_LIMITS)
        _check_range('gamma_range', self.gamma_range, GAMMA_LIMITS)
        if not 0 <= self.gray_prob <= 1:
            raise ConfigError(f"gray_prob must lie in [0, 1], got {self.gray_prob}")
        if not 0 <= self.noise_max <= NOISE_LIMIT:
            raise ConfigError(f"noise_max must lie in [0, {NOISE_LIMIT}], got {self.noise_max}")

    @classmethod
    def identity(cls, seed: int = 0) -> 'AugmentSpec':
        return cls((1.0, 1.0), (0.0, 0.0), 0.0, (1.0, 1.0), 0.0, seed)

    def to_dict(self) -> Dict:
        data = asdict(self)
        for key in ('gain_range', 'bias_range', 'gamma_range'):
            data[key] = list(data[key])
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'AugmentSpec':
        return cls(**strict_fields(cls, data, 'augment'))


@dataclass
class AugmentParams:
    gains: np.ndarray
    biases: np.ndarray
    gray: bool
    gamma: float
    sigma: float


def draw_params(spec: AugmentSpec, rng: np.random.Generator) -> AugmentParams:
    gains = rng.uniform(*spec.gain_range, size=3)
    biases = rng.uniform(*spec.bias_range, size=3)
    gray = bool(rng.random() < spec.gray_prob)
    gamma = float(rng.uniform(*spec.gamma_range))
    sigma = float(rng.uniform(0.0, spec.noise_max))
    return AugmentParams(gains, biases, gray, gamma, sigma)


def draw_noise(params: AugmentParams, shape, rng: np.random.Generator) -> Optional[np.ndarray]:
    """Noise for an image of `shape`; a single shared plane when the draw is grayscale."""
    if params.sigma <= 0:
        return None
    if params.gray:
        shape = (shape[0], 1) + tuple(shape[2:])
    return params.sigma * rng.standard_normal(shape)


def apply_params(image: np.ndarray, params: AugmentParams, noise: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Apply fixed augmentation parameters to an image.

    Args:
        image: Tensor (N, 3, H, W) in [0, 1]
        params: Drawn parameters
        noise: Additive noise already scaled by sigma, of the image's shape or with a
            single channel that is broadcast over all three
    """
    dtype = image.dtype
    out = image * params.gains.astype(dtype)[None, :, None, None] + params.biases.astype(dtype)[None, :, None, None]
    if params.gray:
        luma = np.tensordot(LUMA.astype(dtype), out, axes=([0], [1]))
        out = np.repeat(luma[:, None], 3, axis=1)
    out = np.clip(out, 0, 1) ** dtype.type(params.gamma)
    if noise is not None:
        out = out + noise.astype(dtype)
    return np.clip(out, 0, 1).astype(dtype, copy=False)


def augment(image: np.ndarray, spec: AugmentSpec, seed=None) -> np.ndarray:
    """
    Draw parameters and noise from the seed and apply them.

    Args:
        image: Tensor (N, 3, H, W) in [0, 1]
        spec: Transform ranges
        seed: Overrides spec.seed

    Returns:
        np.ndarray: augmented image clamped to [0, 1], same dtype
    """
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    params = draw_params(spec, rng)
    return apply_params(image, params, draw_noise(params, image.shape, rng))
