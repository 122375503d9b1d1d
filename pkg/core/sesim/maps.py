"""
Spatially-correlative maps.

Row i of S holds the dot products between the feature vector at query i and
the feature vectors at its patch points:

    S[i, j] = <f(q_i), f(p_ij)>

With normalize=True every feature vector is scaled to unit L2 norm first.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from ..errors import GeometryError, ShapeMismatchError
from .base import SampleSet


@dataclass
class CorrMaps:
    S: np.ndarray
    samples: SampleSet
    tap: str = ''
    normalized: bool = False

    @property
    def shape(self):
        return self.S.shape


def _feature_field(features: np.ndarray) -> np.ndarray:
    if features.ndim != 4 or features.shape[0] != 1:
        raise ShapeMismatchError(f"features must be (1, C, H, W), got {features.shape}")
    return features[0]


def _check_coords(samples: SampleSet, height: int, width: int):
    for name, coords in (('query', samples.queries), ('patch point', samples.points)):
        if coords.size == 0:
            continue
        rows, cols = coords[..., 0], coords[..., 1]
        if rows.min() < 0 or cols.min() < 0 or rows.max() >= height or cols.max() >= width:
            raise GeometryError(f"{name} coordinate outside the {height}x{width} feature map")


def _unit(field: np.ndarray):
    norms = np.sqrt(np.sum(field * field, axis=0, keepdims=True))
    safe = np.where(norms > 0, norms, 1)
    return field / safe, safe


def _gather(field: np.ndarray, samples: SampleSet):
    q = field[:, samples.queries[:, 0], samples.queries[:, 1]].T
    points = field[:, samples.points[..., 0], samples.points[..., 1]]
    return q, points


def _scatter(values: np.ndarray, coords: np.ndarray, height: int, width: int) -> np.ndarray:
    """Sum (C, ...) values into a (C, H, W) field at (..., 2) coordinates; repeated positions accumulate."""
    flat = (coords[..., 0] * width + coords[..., 1]).ravel()
    columns = values.reshape(values.shape[0], -1)
    scatter = sparse.csr_matrix(
        (np.ones(flat.size, dtype=columns.dtype), (flat, np.arange(flat.size))),
        shape=(height * width, flat.size),
    )
    return np.asarray((scatter @ columns.T).T).reshape(values.shape[0], height, width)


def corr_maps(features: np.ndarray, samples: SampleSet, tap: str = '', normalize: bool = False) -> CorrMaps:
    """
    Build the N_s x N_p map matrix for one feature tensor.

    Args:
        features: Tensor (1, C, H, W)
        samples: Query and patch geometry
        tap: Tap name recorded on the result
        normalize: L2-normalize feature vectors before taking dot products

    Raises:
        GeometryError: a coordinate lies outside the feature map
    """
    field = _feature_field(features)
    _check_coords(samples, field.shape[1], field.shape[2])
    if normalize:
        field, _ = _unit(field)

    q, points = _gather(field, samples)
    if samples.shared:
        S = q @ points
    else:
        S = np.einsum('nc,cnp->np', q, points)
    return CorrMaps(np.ascontiguousarray(S), samples, tap, normalize)


def corr_maps_backward(features: np.ndarray, samples: SampleSet, grad_S: np.ndarray,
                       normalize: bool = False) -> np.ndarray:
    """
    Gradient of corr_maps w.r.t. the features.

    Contributions from a position that appears in several patches (or as both
    query and patch point) accumulate.
    """
    field = _feature_field(features)
    _check_coords(samples, field.shape[1], field.shape[2])
    expected = (samples.n_queries, samples.n_points)
    if grad_S.shape != expected:
        raise ShapeMismatchError(f"grad_S has shape {grad_S.shape}, expected {expected}")

    grad_S = grad_S.astype(field.dtype, copy=False)
    unit = field
    if normalize:
        unit, norms = _unit(field)

    q, points = _gather(unit, samples)
    if samples.shared:
        grad_q = grad_S @ points.T
        grad_points = q.T @ grad_S
    else:
        grad_q = np.einsum('np,cnp->nc', grad_S, points)
        grad_points = np.einsum('np,nc->cnp', grad_S, q)

    height, width = field.shape[1:]
    grad = _scatter(grad_q.T, samples.queries, height, width)
    grad += _scatter(grad_points, samples.points, height, width)

    if normalize:
        radial = np.sum(grad * unit, axis=0, keepdims=True)
        grad = (grad - unit * radial) / norms
    return grad[None]
