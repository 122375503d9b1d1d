"""
Per-location structure error between two images.

Queries sit on the grid lattice of one tap; each lattice cell holds the
distance between the spatially-correlative maps of x and y at that query.
Baselines computed on the same lattice make the comparison with pixel and
perceptual losses direct.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from ..errors import ConfigError, ShapeMismatchError
from ..kernels import bilinear_resize
from ..sesim import SampleSet, SesimConfig, corr_maps, row_distances, sample_queries
from ..sesim.base import patch_offsets

logger = logging.getLogger(__name__)

BASELINES = ('pixel', 'perceptual')


@dataclass
class ErrorGrid:
    """
    Attributes:
        values: (rows, cols) non-negative error per lattice cell
        coords: (rows, cols, 2) image-space (row, col) of each query
        metric: "l1", "cos", "pixel" or "perceptual"
        tap: Tap the lattice lives on
        stride: Tap stride relative to the image
        heatmap: (H, W) values bilinearly upsampled to image resolution
    """

    values: np.ndarray
    coords: np.ndarray
    metric: str
    tap: str
    stride: int
    heatmap: np.ndarray
    samples: Optional[SampleSet] = None

    @property
    def shape(self):
        return self.values.shape

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    def rows(self):
        """(row, col, value) per lattice cell, row-major."""
        n_rows, n_cols = self.values.shape
        return [(r, c, self.values[r, c]) for r in range(n_rows) for c in range(n_cols)]


def _check_pair(x: np.ndarray, y: np.ndarray):
    if x.shape != y.shape:
        raise ShapeMismatchError(f"images must have the same size, got {x.shape[-2:]} and {y.shape[-2:]}")


def _grid(values: np.ndarray, samples: SampleSet, stride: int, image_shape, metric: str, tap: str) -> ErrorGrid:
    grid_shape = samples.grid_shape
    lattice = values.reshape(grid_shape)
    coords = (samples.queries * stride + stride // 2).reshape(grid_shape + (2,))
    heat = bilinear_resize(lattice[None, None].astype(np.float64), image_shape[-2], image_shape[-1])[0, 0]
    return ErrorGrid(lattice, coords, metric, tap, stride, heat, samples)


def lattice(features: np.ndarray, cfg: SesimConfig) -> SampleSet:
    """Grid-mode queries for a feature map."""
    return sample_queries(features.shape, cfg, mode='patch_grid')


def error_map(x: np.ndarray, y: np.ndarray, cfg: SesimConfig, net, tap: Optional[str] = None) -> ErrorGrid:
    """
    Structure error map of y against x.

    Args:
        x, y: Images (1, 3, H, W) of the same size
        cfg: Supplies the metric, the patch side, N_s and feature normalization
        net: FixedStructureNet or LearnedStructureNet
        tap: Tap to evaluate, defaults to cfg.taps[0]

    Returns:
        ErrorGrid: per-query distances, the same values fsesim_loss averages

    Raises:
        ShapeMismatchError: images differ in size
    """
    _check_pair(x, y)
    tap = tap or cfg.taps[0]
    stack_x, stack_y = net.features(x), net.features(y)
    fx, fy = stack_x.features(tap), stack_y.features(tap)

    samples = lattice(fx, cfg)
    Sx = corr_maps(fx, samples, tap, cfg.normalize_features)
    Sy = corr_maps(fy, samples, tap, cfg.normalize_features)
    values = row_distances(Sx, Sy, cfg.metric)
    return _grid(values, samples, stack_x.stride(tap), x.shape, cfg.metric, tap)


def _pixel_errors(x, y, samples: SampleSet, stride: int) -> np.ndarray:
    """Mean absolute pixel difference over each query's image-space footprint."""
    height, width = x.shape[-2:]
    half = samples.patch // 2
    diff = np.abs(x.astype(np.float64) - y.astype(np.float64))[0].mean(axis=0)
    values = []
    for r, c in samples.queries:
        top, left = (r - half) * stride, (c - half) * stride
        bottom = min(top + samples.patch * stride, height)
        right = min(left + samples.patch * stride, width)
        values.append(diff[max(top, 0):bottom, max(left, 0):right].mean())
    return np.asarray(values)


def _perceptual_errors(fx, fy, samples: SampleSet) -> np.ndarray:
    """Mean squared feature difference over each query's patch."""
    points = samples.queries[:, None, :] + patch_offsets(samples.patch)[None]
    diff = (fx[0].astype(np.float64) - fy[0].astype(np.float64)) ** 2
    return diff[:, points[..., 0], points[..., 1]].mean(axis=(0, 2))


def baseline_error_map(x: np.ndarray, y: np.ndarray, cfg: SesimConfig, net, kind: str = 'pixel',
                       tap: Optional[str] = None) -> ErrorGrid:
    """
    Error map of a comparison loss on the same lattice as error_map.

    Args:
        kind: "pixel" (L1 over the query footprint) or "perceptual" (feature MSE over the patch)
    """
    if kind not in BASELINES:
        raise ConfigError(f"baseline must be one of {BASELINES}, got {kind!r}")
    _check_pair(x, y)
    tap = tap or cfg.taps[0]
    stack_x, stack_y = net.features(x), net.features(y)
    fx, fy = stack_x.features(tap), stack_y.features(tap)
    samples = lattice(fx, cfg)
    stride = stack_x.stride(tap)

    if kind == 'pixel':
        values = _pixel_errors(x, y, samples, stride)
    else:
        values = _perceptual_errors(fx, fy, samples)
    return _grid(values, samples, stride, x.shape, kind, tap)


def pair_auc(aligned: Sequence[float], shuffled: Sequence[float]) -> float:
    """
    Probability that a shuffled pair scores a larger error than an aligned pair.

    Rank-based (Mann-Whitney) estimate; ties count one half.
    """
    aligned = np.asarray(aligned, dtype=np.float64)
    shuffled = np.asarray(shuffled, dtype=np.float64)
    if aligned.size == 0 or shuffled.size == 0:
        raise ConfigError("pair_auc needs at least one aligned and one shuffled score")
    ranks = rankdata(np.concatenate([aligned, shuffled]))
    u = ranks[aligned.size:].sum() - shuffled.size * (shuffled.size + 1) / 2
    return float(u / (aligned.size * shuffled.size))


def separation_report(corpus, cfg: SesimConfig, net, tap: Optional[str] = None,
                      methods: Sequence[str] = ('structure', 'pixel', 'perceptual')) -> Dict[str, Dict[str, float]]:
    """
    Mean grid error over aligned and shuffled pairs of a synthetic corpus, with the AUC.

    Returns:
        dict: method -> {"aligned_mean", "shuffled_mean", "auc"}
    """
    def score(method, a, b):
        x, y = corpus.images_a[a], corpus.images_b[b]
        if method == 'structure':
            return error_map(x, y, cfg, net, tap).mean
        return baseline_error_map(x, y, cfg, net, method, tap).mean

    report = {}
    for method in methods:
        aligned = [score(method, a, b) for a, b in corpus.aligned_pairs]
        shuffled = [score(method, a, b) for a, b in corpus.shuffled_pairs]
        report[method] = {
            'aligned_mean': float(np.mean(aligned)),
            'shuffled_mean': float(np.mean(shuffled)),
            'auc': pair_auc(aligned, shuffled),
        }
        logger.info("[ErrorMap] %s: auc=%.3f", method, report[method]['auc'])
    return report
