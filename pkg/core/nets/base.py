"""
Abstract base class for structure networks.

A structure network turns an image into a FeatureStack and sends tap-space
gradients back to the image. Harness operations accept any implementation.
"""

from abc import ABC, abstractmethod
from typing import Dict

import numpy as np

from ..extractor import ExtractorWeights, FeatureStack, extract_backward
from ..sesim import MultiLayerLoss, SesimConfig, multi_layer_loss


class BaseStructureNet(ABC):
    """
    Abstract base class for structure networks.

    All networks share a frozen extractor trunk; subclasses decide what is
    stacked on top of it.
    """

    kind = 'base'

    def __init__(self, weights: ExtractorWeights, **kwargs):
        """
        Initialize the network.

        Args:
            weights: Frozen extractor weights (carrying their ArchSpec)
            **kwargs: Extra configuration kept for get_net_info
        """
        self.weights = weights
        self.arch = weights.arch
        self.config = kwargs

    @abstractmethod
    def features(self, image: np.ndarray) -> FeatureStack:
        """
        Extract the structure features of an image.

        Args:
            image: Tensor (1, 3, H, W) in [0, 1]

        Returns:
            FeatureStack: features at every tap, ready for extract_backward
        """
        pass

    def backward(self, stack: FeatureStack, grad_per_tap: Dict[str, np.ndarray]) -> np.ndarray:
        """Gradient w.r.t. the image for the given tap gradients."""
        return extract_backward(stack, grad_per_tap)

    def structure_loss(self, stack_x: FeatureStack, stack_y: FeatureStack, cfg: SesimConfig) -> MultiLayerLoss:
        return multi_layer_loss(stack_x, stack_y, cfg)

    @property
    def tap_channels(self) -> Dict[str, int]:
        return self.arch.tap_channels

    def get_net_info(self) -> Dict[str, object]:
        return {
            'kind': self.kind,
            'taps': self.arch.tap_strides,
            'provenance': self.weights.provenance,
            'config': self.config,
        }

    def __repr__(self):
        return f"{self.__class__.__name__}(taps={list(self.arch.taps)}, provenance='{self.weights.provenance}')"
