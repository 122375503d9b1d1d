"""
Synthetic paired-structure corpus.

Every pair shares one label map made of random ellipses and convex polygons
over a dark background. Each region gets a brightness level (background
well below every shape) and a mild tint. Domain A modulates the region
colors with smooth multiplicative noise; domain B rotates the tint across
channels, scales the exposure and adds fine luminance stripes on top of its
own noise. Pairs therefore agree in structure and differ in appearance.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from ..errors import ConfigError
from ..utils import strict_fields

logger = logging.getLogger(__name__)

SHAPES = ('ellipse', 'polygon')


@dataclass
class SynthSpec:
    """
    Attributes:
        size: Image side in pixels
        count: Number of aligned pairs
        min_shapes, max_shapes: Shapes per label map (inclusive)
        shapes: Shape families to draw from
        stripe_period: Stripe period of domain B in pixels
        stripe_amplitude: Relative luminance swing of the stripes
        smooth_sigma: Gaussian sigma of the noise fields
        noise_amplitude: Standard deviation of the multiplicative noise
        saturation: Strength of the per-region tint
        seed: Corpus seed
    """

    size: int = 256
    count: int = 8
    min_shapes: int = 2
    max_shapes: int = 4
    shapes: Tuple[str, ...] = SHAPES
    stripe_period: float = 4.0
    stripe_amplitude: float = 0.35
    smooth_sigma: float = 4.0
    noise_amplitude: float = 0.1
    saturation: float = 0.3
    seed: int = 0

    def __post_init__(self):
        self.shapes = tuple(self.shapes)
        if self.size < 16:
            raise ConfigError(f"size must be at least 16, got {self.size}")
        if self.count < 2:
            raise ConfigError(f"count must be at least 2 to form shuffled pairs, got {self.count}")
        if not 1 <= self.min_shapes <= self.max_shapes:
            raise ConfigError("shape counts must satisfy 1 <= min_shapes <= max_shapes")
        unknown = set(self.shapes) - set(SHAPES)
        if not self.shapes or unknown:
            raise ConfigError(f"shapes must be drawn from {SHAPES}, got {self.shapes}")
        if self.stripe_period < 2:
            raise ConfigError(f"stripe_period must be at least 2 pixels, got {self.stripe_period}")
        if self.smooth_sigma <= 0:
            raise ConfigError(f"smooth_sigma must be positive, got {self.smooth_sigma}")
        for name in ('stripe_amplitude', 'noise_amplitude', 'saturation'):
            value = getattr(self, name)
            if not 0 <= value < 1:
                raise ConfigError(f"{name} must lie in [0, 1), got {value}")

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['shapes'] = list(self.shapes)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'SynthSpec':
        return cls(**strict_fields(cls, data, 'synth'))


@dataclass
class SynthCorpus:
    spec: SynthSpec
    images_a: List[np.ndarray] = field(default_factory=list)
    images_b: List[np.ndarray] = field(default_factory=list)
    masks: List[np.ndarray] = field(default_factory=list)
    aligned_pairs: List[Tuple[int, int]] = field(default_factory=list)
    shuffled_pairs: List[Tuple[int, int]] = field(default_factory=list)

    def pair_rows(self):
        """(kind, a, b) rows: aligned pairs first, then shuffled ones."""
        rows = [('aligned', a, b) for a, b in self.aligned_pairs]
        rows += [('shuffled', a, b) for a, b in self.shuffled_pairs]
        return rows


def _grid(size: int):
    coords = (np.arange(size) + 0.5) / size
    return np.meshgrid(coords, coords, indexing='ij')


def _ellipse(rows, cols, rng):
    cy, cx = rng.uniform(0.2, 0.8, size=2)
    ry, rx = rng.uniform(0.08, 0.3, size=2)
    angle = rng.uniform(0, np.pi)
    dy, dx = rows - cy, cols - cx
    u = dx * np.cos(angle) + dy * np.sin(angle)
    v = -dx * np.sin(angle) + dy * np.cos(angle)
    return (u / rx) ** 2 + (v / ry) ** 2 <= 1.0


def _polygon(rows, cols, rng):
    """Convex polygon as the intersection of the half-planes of its edges."""
    cy, cx = rng.uniform(0.2, 0.8, size=2)
    radius = rng.uniform(0.1, 0.3)
    angles = np.sort(rng.uniform(0, 2 * np.pi, size=rng.integers(3, 8)))
    vy = cy + radius * np.sin(angles)
    vx = cx + radius * np.cos(angles)

    inside = np.ones(rows.shape, dtype=bool)
    for i in range(len(angles)):
        j = (i + 1) % len(angles)
        edge_y, edge_x = vy[j] - vy[i], vx[j] - vx[i]
        # vertices are counter-clockwise, interior lies left of every edge
        inside &= edge_x * (rows - vy[i]) - edge_y * (cols - vx[i]) >= 0
    return inside


def label_map(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """Integer label map, 0 for background and 1.. for shapes in drawing order."""
    rows, cols = _grid(spec.size)
    labels = np.zeros((spec.size, spec.size), dtype=np.int32)
    for index in range(rng.integers(spec.min_shapes, spec.max_shapes + 1)):
        kind = spec.shapes[rng.integers(len(spec.shapes))]
        region = _ellipse(rows, cols, rng) if kind == 'ellipse' else _polygon(rows, cols, rng)
        labels[region] = index + 1
    return labels


def region_colors(labels: np.ndarray, spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """
    (labels, 3) base colors of domain A.

    The background is dark and the shapes take evenly spaced, shuffled
    brightness levels, so neighbouring regions always differ in brightness.
    The tint keeps each color's channel mean equal to its level.
    """
    n_labels = int(labels.max()) + 1
    levels = np.empty(n_labels)
    levels[0] = rng.uniform(0.15, 0.25)
    levels[1:] = rng.permutation(np.linspace(0.4, 0.7, n_labels - 1))
    tint = rng.uniform(-1, 1, size=(n_labels, 3))
    tint -= tint.mean(axis=1, keepdims=True)
    return levels[:, None] * (1 + spec.saturation * tint)


def noise_field(shape, spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """Gaussian-smoothed white noise rescaled to unit standard deviation."""
    noise = gaussian_filter(rng.standard_normal(shape), sigma=spec.smooth_sigma, mode='wrap')
    return noise / max(noise.std(), 1e-12)


def smooth_texture(labels: np.ndarray, colors: np.ndarray, spec: SynthSpec,
                   rng: np.random.Generator) -> np.ndarray:
    """Domain A: region colors times low-frequency noise, one field per channel."""
    image = colors[labels].transpose(2, 0, 1)
    for channel in range(3):
        image[channel] *= 1 + spec.noise_amplitude * noise_field(labels.shape, spec, rng)
    return np.clip(image, 0, 1)


def stripe_texture(labels: np.ndarray, colors: np.ndarray, spec: SynthSpec,
                   rng: np.random.Generator) -> np.ndarray:
    """
    Domain B: rotated tint, random exposure, own noise and axis-aligned stripes.

    Rotating the channels keeps each region's brightness; the exposure
    scales the whole image. One stripe orientation and phase per image.
    """
    shift = int(rng.integers(1, 3))
    exposure = rng.uniform(0.6, 1.0)
    image = exposure * np.roll(colors, shift, axis=1)[labels].transpose(2, 0, 1)
    for channel in range(3):
        image[channel] *= 1 + spec.noise_amplitude * noise_field(labels.shape, spec, rng)

    phase = rng.uniform(0, 2 * np.pi)
    wave = np.sin(2 * np.pi * np.arange(labels.shape[0]) / spec.stripe_period + phase)
    stripes = wave[:, None] if rng.integers(2) == 0 else wave[None, :]
    image *= 1 + spec.stripe_amplitude * stripes
    return np.clip(image, 0, 1)


def derangement(count: int, rng: np.random.Generator) -> np.ndarray:
    """Random permutation without fixed points."""
    while True:
        perm = rng.permutation(count)
        if np.all(perm != np.arange(count)):
            return perm


def synth_dataset(spec: SynthSpec) -> SynthCorpus:
    """
    生成合成配对语料。

    第 i 对为 (images_a[i], images_b[i])，共享 masks[i]。打乱对把 images_a[i]
    与 images_b[j] 配对，j 取自一个无不动点的排列，因此打乱对从不共享掩码。

    参数:
        spec: 语料参数

    返回:
        SynthCorpus: 图像均为 float32 张量 (1, 3, size, size)
    """
    corpus = SynthCorpus(spec)
    for index in range(spec.count):
        shape_rng = np.random.default_rng([spec.seed, index, 0])
        labels = label_map(spec, shape_rng)
        colors = region_colors(labels, spec, shape_rng)
        image_a = smooth_texture(labels, colors, spec, np.random.default_rng([spec.seed, index, 1]))
        image_b = stripe_texture(labels, colors, spec, np.random.default_rng([spec.seed, index, 2]))
        corpus.masks.append(labels)
        corpus.images_a.append(image_a[None].astype(np.float32))
        corpus.images_b.append(image_b[None].astype(np.float32))
        corpus.aligned_pairs.append((index, index))

    perm = derangement(spec.count, np.random.default_rng([spec.seed, spec.count, 3]))
    corpus.shuffled_pairs = [(index, int(perm[index])) for index in range(spec.count)]
    logger.info("[Synth] generated %d pairs of %dx%d images", spec.count, spec.size, spec.size)
    return corpus


def high_frequency_energy(image: np.ndarray, cutoff: float = 0.125) -> float:
    """
    Share of the spectral energy of the gray image above `cutoff` cycles per pixel.

    The mean is removed first so the DC term does not count.
    """
    gray = np.asarray(image, dtype=np.float64).reshape(-1, *image.shape[-2:]).mean(axis=0)
    spectrum = np.abs(np.fft.fft2(gray - gray.mean())) ** 2
    fy = np.fft.fftfreq(gray.shape[0])[:, None]
    fx = np.fft.fftfreq(gray.shape[1])[None, :]
    total = spectrum.sum()
    if total == 0:
        return 0.0
    return float(spectrum[np.hypot(fy, fx) > cutoff].sum() / total)
