"""
Query sampling base class and the SampleSet it produces.

A query at tap coordinate (r, c) owns the p x p patch whose top-left corner
is (r - p // 2, c - p // 2); patch points are listed in row-major order.
Valid (interior) query rows therefore run from p // 2 to H - p + p // 2.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..errors import GeometryError


@dataclass
class SampleSet:
    """
    Query coordinates and the patch points each query is compared against.

    Attributes:
        queries: (N_s, 2) tap-space (row, col) of every query
        points: (N_s, N_p, 2) patch points per query, or (N_p, 2) when every
                query shares the same points (global mode)
        patch: Patch side p
        mode: Sampling mode that produced the set
        tap_shape: (H, W) of the feature map
        grid_shape: (rows, cols) of the query lattice in grid mode
    """

    queries: np.ndarray
    points: np.ndarray
    patch: int
    mode: str
    tap_shape: Tuple[int, int]
    seed: Optional[object] = None
    grid_shape: Optional[Tuple[int, int]] = None

    @property
    def n_queries(self) -> int:
        return self.queries.shape[0]

    @property
    def n_points(self) -> int:
        return self.points.shape[-2]

    @property
    def shared(self) -> bool:
        return self.points.ndim == 2

    def same_geometry(self, other: 'SampleSet') -> bool:
        return (
            self.queries.shape == other.queries.shape
            and self.points.shape == other.points.shape
            and np.array_equal(self.queries, other.queries)
            and np.array_equal(self.points, other.points)
        )

    def subset(self, rows: Sequence[int]) -> 'SampleSet':
        rows = np.asarray(rows, dtype=np.intp)
        points = self.points if self.shared else self.points[rows]
        return SampleSet(self.queries[rows], points, self.patch, self.mode, self.tap_shape, self.seed)


def interior_range(extent: int, patch: int) -> Tuple[int, int]:
    """Inclusive range of query coordinates whose patch lies inside [0, extent)."""
    return patch // 2, extent - patch + patch // 2


def interior_positions(tap_shape: Tuple[int, int], patch: int) -> np.ndarray:
    """Every interior query position, row-major, as an (M, 2) array."""
    r_lo, r_hi = interior_range(tap_shape[0], patch)
    c_lo, c_hi = interior_range(tap_shape[1], patch)
    rows, cols = np.meshgrid(np.arange(r_lo, r_hi + 1), np.arange(c_lo, c_hi + 1), indexing='ij')
    return np.stack([rows.ravel(), cols.ravel()], axis=1)


def patch_offsets(patch: int) -> np.ndarray:
    half = patch // 2
    dr, dc = np.meshgrid(np.arange(patch) - half, np.arange(patch) - half, indexing='ij')
    return np.stack([dr.ravel(), dc.ravel()], axis=1)


def neighborhoods(queries: np.ndarray, patch: int) -> np.ndarray:
    """(N_s, p * p, 2) patch points around each query."""
    return queries[:, None, :] + patch_offsets(patch)[None, :, :]


class BaseSampler(ABC):
    """
    Abstract base class for query samplers.

    Every sampler turns a feature-map shape into a SampleSet; subclasses only
    decide where the queries go and which points each query is compared with.
    """

    needs_interior = True

    def __init__(self, tap_shape, patch: int, n_samples: int, seed=0):
        """
        Args:
            tap_shape: (H, W) or a full (N, C, H, W) feature shape
            patch: Patch side p
            n_samples: Requested number of queries N_s
            seed: Integer seed or sequence of integers

        Raises:
            GeometryError: if the feature map cannot hold a patch
        """
        self.tap_shape = tuple(int(v) for v in tuple(tap_shape)[-2:])
        self.patch = int(patch)
        self.n_samples = int(n_samples)
        self.seed = seed

        height, width = self.tap_shape
        if height < 1 or width < 1:
            raise GeometryError(f"feature map {self.tap_shape} is empty")
        if self.needs_interior and (height < self.patch or width < self.patch):
            raise GeometryError(
                f"feature map {height}x{width} is smaller than the {self.patch}x{self.patch} patch"
            )

    @property
    def mode(self) -> str:
        return self.MODE

    @abstractmethod
    def query_coords(self, rng: np.random.Generator) -> np.ndarray:
        """
        Choose query positions.

        Returns:
            np.ndarray: (N_s, 2) integer tap coordinates
        """
        pass

    def patch_points(self, queries: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Points compared with each query; the p x p neighborhood by default."""
        return neighborhoods(queries, self.patch)

    def grid_shape(self) -> Optional[Tuple[int, int]]:
        return None

    def sample(self) -> SampleSet:
        rng = np.random.default_rng(self.seed)
        queries = np.asarray(self.query_coords(rng), dtype=np.intp)
        points = np.asarray(self.patch_points(queries, rng), dtype=np.intp)
        return SampleSet(queries, points, self.patch, self.mode, self.tap_shape, self.seed, self.grid_shape())

    def __repr__(self):
        return f"{self.__class__.__name__}(tap_shape={self.tap_shape}, patch={self.patch})"
