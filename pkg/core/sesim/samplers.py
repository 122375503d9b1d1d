"""
Query sampler implementations.

    patch_random      N_s interior queries drawn uniformly with replacement
    patch_grid        queries on an evenly spaced lattice over the interior
    patch_dense       every interior position (negative pools, dense maps)
    global            every position is a query and every position a patch point
    scattered_random  queries anywhere, each paired with p * p random points anywhere
"""

import math

import numpy as np

from .base import BaseSampler, interior_positions, interior_range


class PatchRandomSampler(BaseSampler):
    MODE = 'patch_random'

    def query_coords(self, rng):
        r_lo, r_hi = interior_range(self.tap_shape[0], self.patch)
        c_lo, c_hi = interior_range(self.tap_shape[1], self.patch)
        rows = rng.integers(r_lo, r_hi + 1, size=self.n_samples)
        cols = rng.integers(c_lo, c_hi + 1, size=self.n_samples)
        return np.stack([rows, cols], axis=1)


class PatchGridSampler(BaseSampler):
    """
    Lattice of ceil(sqrt(N_s)) rows by ceil(N_s / rows) columns.

    With n valid positions along an axis starting at lo and g lattice lines,
    line k sits at lo + floor((k + 0.5) * n / g), i.e. at the centre of the
    k-th of g equal cells. The line count is capped at n.
    """

    MODE = 'patch_grid'

    @staticmethod
    def _lines(extent, patch, count):
        lo, hi = interior_range(extent, patch)
        n_valid = hi - lo + 1
        count = min(count, n_valid)
        k = np.arange(count)
        return lo + ((2 * k + 1) * n_valid) // (2 * count)

    def grid_shape(self):
        rows = math.ceil(math.sqrt(self.n_samples))
        cols = math.ceil(self.n_samples / rows)
        return (len(self._lines(self.tap_shape[0], self.patch, rows)),
                len(self._lines(self.tap_shape[1], self.patch, cols)))

    def query_coords(self, rng):
        rows = math.ceil(math.sqrt(self.n_samples))
        cols = math.ceil(self.n_samples / rows)
        r = self._lines(self.tap_shape[0], self.patch, rows)
        c = self._lines(self.tap_shape[1], self.patch, cols)
        rr, cc = np.meshgrid(r, c, indexing='ij')
        return np.stack([rr.ravel(), cc.ravel()], axis=1)


class PatchDenseSampler(BaseSampler):
    MODE = 'patch_dense'

    def query_coords(self, rng):
        return interior_positions(self.tap_shape, self.patch)


class GlobalSampler(BaseSampler):
    MODE = 'global'
    needs_interior = False

    def query_coords(self, rng):
        height, width = self.tap_shape
        rows, cols = np.meshgrid(np.arange(height), np.arange(width), indexing='ij')
        return np.stack([rows.ravel(), cols.ravel()], axis=1)

    def patch_points(self, queries, rng):
        return self.query_coords(rng)


class ScatteredSampler(BaseSampler):
    MODE = 'scattered_random'
    needs_interior = False

    def query_coords(self, rng):
        height, width = self.tap_shape
        rows = rng.integers(0, height, size=self.n_samples)
        cols = rng.integers(0, width, size=self.n_samples)
        return np.stack([rows, cols], axis=1)

    def patch_points(self, queries, rng):
        height, width = self.tap_shape
        n_points = self.patch * self.patch
        rows = rng.integers(0, height, size=(len(queries), n_points))
        cols = rng.integers(0, width, size=(len(queries), n_points))
        return np.stack([rows, cols], axis=2)
