"""
Spatially-correlative structure representation.

Query sampling plugins, map construction and the FSeSim loss.
"""

from .base import BaseSampler, SampleSet, interior_positions, interior_range
from .config import METRICS, MODES, SesimConfig
from .loss import MultiLayerLoss, fsesim_loss, multi_layer_loss, row_distances, tap_samples
from .maps import CorrMaps, corr_maps, corr_maps_backward
from .samplers import (GlobalSampler, PatchDenseSampler, PatchGridSampler, PatchRandomSampler,
                       ScatteredSampler)


class SamplerFactory:
    """
    Factory class for creating the sampler registered for a sampling mode.
    """

    _samplers = {
        'patch_random': PatchRandomSampler,
        'patch_grid': PatchGridSampler,
        'patch_dense': PatchDenseSampler,
        'global': GlobalSampler,
        'scattered_random': ScatteredSampler,
    }

    @classmethod
    def get_sampler(cls, mode, tap_shape, patch, n_samples, seed=0):
        """
        Get the sampler for a mode.

        Args:
            mode: Sampling mode name
            tap_shape: (H, W) or full feature shape
            patch: Patch side
            n_samples: Number of queries
            seed: Integer or sequence of integers

        Returns:
            BaseSampler: Instance of the registered sampler

        Raises:
            ValueError: If the mode is not registered

        Example:
            >>> sampler = SamplerFactory.get_sampler('patch_grid', (8, 8), 4, 4)
            >>> sampler.sample().queries.tolist()
            [[3, 3], [3, 5], [5, 3], [5, 5]]
        """
        sampler_class = cls._samplers.get(mode)

        if sampler_class is None:
            raise ValueError(f"No sampler available for mode: {mode}")

        return sampler_class(tap_shape, patch, n_samples, seed)

    @classmethod
    def register_sampler(cls, mode, sampler_class):
        """
        Register a sampler for a mode name.

        Example:
            >>> class DiagonalSampler(BaseSampler):
            ...     MODE = 'diagonal'
            >>> SamplerFactory.register_sampler('diagonal', DiagonalSampler)
        """
        if not issubclass(sampler_class, BaseSampler):
            raise TypeError("Sampler class must inherit from BaseSampler")

        cls._samplers[mode] = sampler_class

    @classmethod
    def get_supported_modes(cls):
        return list(cls._samplers.keys())


def sample_queries(tap_shape, cfg: SesimConfig, seed=None, mode=None) -> SampleSet:
    """
    为一张特征图抽取查询点。

    参数:
        tap_shape: (H, W) 或完整特征形状
        cfg: 采样参数（模式、N_s、patch 边长、种子）
        seed: 覆盖 cfg.seed，例如按 tap 派生的种子
        mode: 覆盖 cfg.mode

    异常:
        GeometryError: 特征图小于 patch
    """
    sampler = SamplerFactory.get_sampler(
        mode or cfg.mode,
        tap_shape,
        cfg.patch,
        cfg.n_samples,
        cfg.seed if seed is None else seed,
    )
    return sampler.sample()


__all__ = [
    'BaseSampler',
    'SampleSet',
    'SamplerFactory',
    'sample_queries',
    'interior_positions',
    'interior_range',
    'SesimConfig',
    'MODES',
    'METRICS',
    'CorrMaps',
    'corr_maps',
    'corr_maps_backward',
    'fsesim_loss',
    'row_distances',
    'multi_layer_loss',
    'MultiLayerLoss',
    'tap_samples',
]
