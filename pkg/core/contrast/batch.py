"""
Positive / negative pair construction for the patchwise contrastive loss.

For every query i of image x, the positive is the map at the same position
in x_aug; the K negatives are maps at other interior positions of x_aug
(internal) and at interior positions of another image y (external). Maps are
computed once over the dense interior pool of each image and rows are picked
from there, so a position shared by several queries is computed once.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..errors import ConfigError, GeometryError, ShapeMismatchError
from ..sesim import CorrMaps, SampleSet, SesimConfig, SamplerFactory, corr_maps, corr_maps_backward
from ..sesim.base import interior_range

INTERNAL, EXTERNAL = 0, 1


@dataclass
class ContrastBatch:
    """
    Attributes:
        v: (N_s, N_p) query maps from x
        v_pos: (N_s, N_p) positive maps from x_aug
        v_neg: (N_s, K, N_p) negative maps, internal ones first
        neg_source: (N_s, K) INTERNAL or EXTERNAL per negative
    """

    v: np.ndarray
    v_pos: np.ndarray
    v_neg: np.ndarray
    neg_source: np.ndarray
    tap: str
    samples: SampleSet
    query_index: np.ndarray
    internal_index: np.ndarray
    external_index: np.ndarray
    maps_x: CorrMaps
    maps_aug: CorrMaps
    maps_y: CorrMaps
    features: Tuple[np.ndarray, np.ndarray, np.ndarray]
    normalize: bool = False

    @property
    def k(self) -> int:
        return self.v_neg.shape[1]


def dense_pool(features: np.ndarray, patch: int) -> SampleSet:
    """Every interior position of a feature map, row-major."""
    return SamplerFactory.get_sampler('patch_dense', features.shape, patch, 1).sample()


def pool_indices(samples: SampleSet, tap_shape, patch: int) -> np.ndarray:
    """Index of each query within the dense interior pool."""
    r_lo, r_hi = interior_range(tap_shape[0], patch)
    c_lo, c_hi = interior_range(tap_shape[1], patch)
    rows, cols = samples.queries[:, 0], samples.queries[:, 1]
    if rows.min() < r_lo or rows.max() > r_hi or cols.min() < c_lo or cols.max() > c_hi:
        raise GeometryError("contrastive queries must lie in the interior of the feature map")
    return (rows - r_lo) * (c_hi - c_lo + 1) + (cols - c_lo)


def batch_from_features(fx: np.ndarray, faug: np.ndarray, fy: np.ndarray, samples: SampleSet,
                        cfg: SesimConfig, tap: str = '', rng: Optional[np.random.Generator] = None) -> ContrastBatch:
    """
    Assemble a ContrastBatch from already extracted (and selected) features.

    Raises:
        ShapeMismatchError: x and x_aug features differ in shape
        GeometryError: the maps cannot furnish the requested negatives
    """
    if fx.shape != faug.shape:
        raise ShapeMismatchError(f"x and x_aug features differ: {fx.shape} vs {faug.shape}")
    if samples.mode not in ('patch_random', 'patch_grid', 'patch_dense'):
        raise ConfigError(f"contrastive pairs need patch sampling, got mode {samples.mode!r}")
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)

    pool_x = dense_pool(fx, cfg.patch)
    pool_y = dense_pool(fy, cfg.patch)
    n_internal, n_external = cfg.n_internal, cfg.n_external
    if n_internal > pool_x.n_queries - 1 or n_external > pool_y.n_queries:
        raise GeometryError(
            f"tap {tap!r}: {pool_x.n_queries} interior positions in x_aug and {pool_y.n_queries} in y "
            f"cannot furnish {n_internal} internal and {n_external} external negatives"
        )

    query_index = pool_indices(samples, fx.shape[2:], cfg.patch)
    n_queries = len(query_index)
    internal = np.empty((n_queries, n_internal), dtype=np.intp)
    external = np.empty((n_queries, n_external), dtype=np.intp)
    for i, positive in enumerate(query_index):
        drawn = rng.choice(pool_x.n_queries - 1, size=n_internal, replace=False)
        internal[i] = drawn + (drawn >= positive)
        external[i] = rng.choice(pool_y.n_queries, size=n_external, replace=False)

    maps_x = corr_maps(fx, pool_x, tap, cfg.normalize_features)
    maps_aug = corr_maps(faug, pool_x, tap, cfg.normalize_features)
    maps_y = corr_maps(fy, pool_y, tap, cfg.normalize_features)

    v_neg = np.concatenate([maps_aug.S[internal], maps_y.S[external]], axis=1)
    source = np.concatenate([
        np.full((n_queries, n_internal), INTERNAL, dtype=np.int8),
        np.full((n_queries, n_external), EXTERNAL, dtype=np.int8),
    ], axis=1)

    return ContrastBatch(
        v=maps_x.S[query_index],
        v_pos=maps_aug.S[query_index],
        v_neg=v_neg,
        neg_source=source,
        tap=tap,
        samples=samples,
        query_index=query_index,
        internal_index=internal,
        external_index=external,
        maps_x=maps_x,
        maps_aug=maps_aug,
        maps_y=maps_y,
        features=(fx, faug, fy),
        normalize=cfg.normalize_features,
    )


def build_batch(x, x_aug, y, samples: SampleSet, net, cfg: SesimConfig, tap: Optional[str] = None,
                seed=None) -> ContrastBatch:
    """
    Extract features for the triplet through the network and assemble the batch.

    Args:
        x, x_aug, y: Images (1, 3, H, W); x and x_aug must share their size
        samples: Query positions on the tap
        net: Structure network (an LSeSim network applies its selection layers)
        cfg: Supplies K, the internal/external split, patch side and normalization
        tap: Tap to use, defaults to cfg.taps[0]
        seed: Seed for drawing negatives, defaults to cfg.seed
    """
    if x.shape != x_aug.shape:
        raise ShapeMismatchError(f"x and x_aug must have the same size, got {x.shape} and {x_aug.shape}")
    tap = tap or cfg.taps[0]
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    fx = net.features(x).features(tap)
    faug = net.features(x_aug).features(tap)
    fy = net.features(y).features(tap)
    return batch_from_features(fx, faug, fy, samples, cfg, tap, rng)


def batch_backward(batch: ContrastBatch, grad_v: np.ndarray, grad_pos: np.ndarray, grad_neg: np.ndarray):
    """
    Route map gradients back to the three feature tensors.

    Returns:
        tuple: (grad w.r.t. x features, x_aug features, y features)
    """
    n_internal = batch.internal_index.shape[1]
    fx, faug, fy = batch.features

    grad_mx = np.zeros_like(batch.maps_x.S)
    np.add.at(grad_mx, batch.query_index, grad_v)

    grad_maug = np.zeros_like(batch.maps_aug.S)
    np.add.at(grad_maug, batch.query_index, grad_pos)
    np.add.at(grad_maug, batch.internal_index, grad_neg[:, :n_internal])

    grad_my = np.zeros_like(batch.maps_y.S)
    np.add.at(grad_my, batch.external_index, grad_neg[:, n_internal:])

    return (
        corr_maps_backward(fx, batch.maps_x.samples, grad_mx, batch.normalize),
        corr_maps_backward(faug, batch.maps_aug.samples, grad_maug, batch.normalize),
        corr_maps_backward(fy, batch.maps_y.samples, grad_my, batch.normalize),
    )
