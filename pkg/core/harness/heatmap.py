"""
Self-similarity heatmaps and the colormap used for every heatmap PNG.
"""

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from ..errors import GeometryError
from ..kernels import bilinear_resize
from ..sesim import SampleSet, SesimConfig, corr_maps
from ..sesim.base import interior_range, neighborhoods

COLORMAP_PATH = Path(__file__).resolve().parent.parent / 'data' / 'viridis.json'
FLAT_TOLERANCE = 1e-9


@lru_cache(maxsize=1)
def colormap_lut() -> np.ndarray:
    """(entries, 3) float RGB table interpolated linearly between the shipped anchors."""
    with open(COLORMAP_PATH, 'r', encoding='utf-8') as f:
        data = json.load(f)
    anchors = np.array([[int(h[i:i + 2], 16) for i in (1, 3, 5)] for h in data['anchors']], dtype=np.float64) / 255
    positions = np.linspace(0, 1, len(anchors))
    samples = np.linspace(0, 1, int(data['entries']))
    return np.stack([np.interp(samples, positions, anchors[:, ch]) for ch in range(3)], axis=1)


def colorize(values: np.ndarray) -> np.ndarray:
    """
    Map a 2-D array in [0, 1] to an RGB image through the colormap.

    Returns:
        np.ndarray: float32 tensor (1, 3, H, W) in [0, 1]
    """
    lut = colormap_lut()
    index = np.rint(np.clip(values, 0, 1) * (len(lut) - 1)).astype(np.intp)
    return lut[index].transpose(2, 0, 1)[None].astype(np.float32)


def min_max(values: np.ndarray) -> np.ndarray:
    """Rescale to [0, 1]; a flat array (up to rounding) maps to zeros."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    if hi - lo <= FLAT_TOLERANCE * max(abs(hi), abs(lo)):
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


@dataclass
class SelfSimHeatmap:
    """
    Attributes:
        raw: (p, p) map row of the query, before normalization
        values: (p, p) min-max normalized row
        image: (H, W) heatmap at the input resolution, the upsampled row placed over the
            patch footprint and zero elsewhere
        patch_image: (p * stride, p * stride) upsampled row alone
        query: Tap-space (row, col) of the query
        origin: Image-space (row, col) of the patch's top-left pixel
    """

    raw: np.ndarray
    values: np.ndarray
    image: np.ndarray
    patch_image: np.ndarray
    query: Tuple[int, int]
    origin: Tuple[int, int]
    tap: str
    stride: int

    def footprint(self) -> Tuple[slice, slice]:
        side = self.patch_image.shape[0]
        return (slice(self.origin[0], self.origin[0] + side), slice(self.origin[1], self.origin[1] + side))

    def rows(self):
        p = self.values.shape[0]
        return [(r, c, self.values[r, c]) for r in range(p) for c in range(p)]


def selfsim_heatmap(x: np.ndarray, query_xy, cfg: SesimConfig, net, tap: Optional[str] = None) -> SelfSimHeatmap:
    """
    Local self-similarity of one query point.

    Args:
        x: Image (1, 3, H, W)
        query_xy: Image-space (row, col) of the query pixel
        cfg: Supplies the patch side and feature normalization
        net: Structure network
        tap: Tap to use, defaults to cfg.taps[0]

    Raises:
        GeometryError: the query's patch does not fit inside the feature map
    """
    tap = tap or cfg.taps[0]
    stack = net.features(x)
    features = stack.features(tap)
    stride = stack.stride(tap)
    height, width = features.shape[-2:]

    row, col = int(query_xy[0]) // stride, int(query_xy[1]) // stride
    r_lo, r_hi = interior_range(height, cfg.patch)
    c_lo, c_hi = interior_range(width, cfg.patch)
    if not (r_lo <= row <= r_hi and c_lo <= col <= c_hi):
        raise GeometryError(
            f"query {tuple(query_xy)} maps to tap position ({row}, {col}), outside the interior "
            f"rows {r_lo}..{r_hi}, cols {c_lo}..{c_hi}"
        )

    queries = np.array([[row, col]], dtype=np.intp)
    samples = SampleSet(queries, neighborhoods(queries, cfg.patch), cfg.patch, 'patch_grid', (height, width))
    raw = corr_maps(features, samples, tap, cfg.normalize_features).S[0].reshape(cfg.patch, cfg.patch)
    values = min_max(raw)
    side = cfg.patch * stride
    patch_image = bilinear_resize(values[None, None], side, side)[0, 0]
    half = cfg.patch // 2
    origin = ((row - half) * stride, (col - half) * stride)
    image = np.zeros(x.shape[-2:], dtype=np.float64)
    image[origin[0]:origin[0] + side, origin[1]:origin[1] + side] = patch_image
    return SelfSimHeatmap(raw, values, image, patch_image, (row, col), origin, tap, stride)
