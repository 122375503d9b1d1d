"""
FSeSim structure loss between two sets of spatially-correlative maps.

    l1   mean over all N_s * N_p entries of |Sx - Sy|
    cos  mean over the N_s rows of 1 - cos(Sx_i, Sy_i)

Means rather than sums keep the loss weight independent of resolution. For
the cosine metric two all-zero rows are at distance 0, a zero row and a
non-zero row at distance 1; rows involving a zero row get zero gradient,
and so do identical rows (distance exactly 0).
"""

from typing import Dict, NamedTuple, Optional, Tuple, Union

import numpy as np

from ..errors import GeometryError, ShapeMismatchError
from ..utils import tap_seed
from .config import METRICS, SesimConfig
from .maps import CorrMaps, corr_maps, corr_maps_backward


def _matrix(maps: Union[CorrMaps, np.ndarray]) -> np.ndarray:
    return maps.S if isinstance(maps, CorrMaps) else np.asarray(maps)


def _check_pair(Sx, Sy):
    a, b = _matrix(Sx), _matrix(Sy)
    if a.shape != b.shape:
        raise GeometryError(f"map shapes differ: {a.shape} vs {b.shape}")
    if isinstance(Sx, CorrMaps) and isinstance(Sy, CorrMaps):
        if not Sx.samples.same_geometry(Sy.samples):
            raise GeometryError("maps were built from different sample geometries")
    return a, b


def _cosine_rows(a: np.ndarray, b: np.ndarray):
    """Per-row cosine distance and its gradients (unscaled by the row count)."""
    norm_a = np.sqrt(np.sum(a * a, axis=1))
    norm_b = np.sqrt(np.sum(b * b, axis=1))
    dot = np.sum(a * b, axis=1)

    valid = (norm_a > 0) & (norm_b > 0)
    safe_a = np.where(valid, norm_a, 1)
    safe_b = np.where(valid, norm_b, 1)
    cos = np.where(valid, dot / (safe_a * safe_b), 0)

    # identical rows sit at the minimum: distance and gradient are exactly 0
    identical = np.all(a == b, axis=1)
    both_zero = (norm_a == 0) & (norm_b == 0)
    # rounding can push 1 - cos a hair outside [0, 2]; clipped rows carry no gradient
    raw = 1 - cos
    inside = (raw > 0) & (raw < 2)
    distance = np.where(both_zero | identical, 0, np.clip(raw, 0, 2))

    mask = (valid & ~identical & inside)[:, None]
    dcos_da = b / (safe_a * safe_b)[:, None] - cos[:, None] * a / (safe_a ** 2)[:, None]
    dcos_db = a / (safe_a * safe_b)[:, None] - cos[:, None] * b / (safe_b ** 2)[:, None]
    return distance, np.where(mask, -dcos_da, 0), np.where(mask, -dcos_db, 0)


def row_distances(Sx, Sy, metric: str) -> np.ndarray:
    """Distance of every query row, the per-query terms the loss averages."""
    a, b = _check_pair(Sx, Sy)
    if metric == 'l1':
        return np.mean(np.abs(a - b), axis=1)
    if metric == 'cos':
        return _cosine_rows(a, b)[0]
    raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")


def fsesim_loss(Sx, Sy, metric: str = 'cos') -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Distance between two map sets and its gradients.

    Args:
        Sx, Sy: CorrMaps (or bare N_s x N_p arrays) built from the same geometry
        metric: "l1" or "cos"

    Returns:
        tuple: (loss, grad w.r.t. Sx, grad w.r.t. Sy)

    Raises:
        GeometryError: shapes or sample geometries differ
    """
    a, b = _check_pair(Sx, Sy)
    if metric == 'l1':
        diff = a - b
        loss = float(np.mean(np.abs(diff)))
        grad = np.sign(diff) / diff.size
        return loss, grad, -grad
    if metric == 'cos':
        distance, grad_a, grad_b = _cosine_rows(a, b)
        rows = a.shape[0]
        return float(np.mean(distance)), grad_a / rows, grad_b / rows
    raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")


class MultiLayerLoss(NamedTuple):
    loss: float
    grads_x: Dict[str, np.ndarray]
    grads_y: Dict[str, np.ndarray]
    per_tap: Dict[str, float]


def tap_samples(stack, cfg: SesimConfig):
    """SampleSet per configured tap, each drawn from the tap's derived seed."""
    from . import sample_queries

    return {
        tap: sample_queries(stack.features(tap).shape, cfg, seed=tap_seed(cfg.seed, index))
        for index, tap in enumerate(cfg.taps)
    }


def multi_layer_loss(stack_x, stack_y, cfg: SesimConfig, samples: Optional[Dict] = None) -> MultiLayerLoss:
    """
    Equal-weight mean of the per-tap FSeSim losses.

    Tap number i of cfg.taps samples its queries with seed tap_seed(cfg.seed, i)
    unless explicit SampleSets are passed in.

    Returns:
        MultiLayerLoss: loss, feature gradients for both stacks, per-tap losses

    Raises:
        UnknownTapError: a configured tap is missing from a stack
    """
    if samples is None:
        samples = tap_samples(stack_x, cfg)

    n_taps = len(cfg.taps)
    grads_x, grads_y, per_tap = {}, {}, {}
    for tap in cfg.taps:
        fx, fy = stack_x.features(tap), stack_y.features(tap)
        if fx.shape != fy.shape:
            raise ShapeMismatchError(f"tap {tap!r} shapes differ: {fx.shape} vs {fy.shape}")

        Sx = corr_maps(fx, samples[tap], tap, cfg.normalize_features)
        Sy = corr_maps(fy, samples[tap], tap, cfg.normalize_features)
        loss, grad_Sx, grad_Sy = fsesim_loss(Sx, Sy, cfg.metric)

        per_tap[tap] = loss
        grads_x[tap] = corr_maps_backward(fx, samples[tap], grad_Sx / n_taps, cfg.normalize_features)
        grads_y[tap] = corr_maps_backward(fy, samples[tap], grad_Sy / n_taps, cfg.normalize_features)

    total = sum(per_tap[tap] for tap in cfg.taps) / n_taps
    return MultiLayerLoss(total, grads_x, grads_y, per_tap)
