"""
LSeSim: frozen trunk followed by learnable 1x1 selection layers.
"""

from typing import Optional

from ..extractor import ExtractorWeights, SelectionLayers, apply_selection, extract, init_selection
from .base import BaseStructureNet


class LearnedStructureNet(BaseStructureNet):
    kind = 'lsesim'

    def __init__(self, weights: ExtractorWeights, selection: Optional[SelectionLayers] = None, seed: int = 0,
                 **kwargs):
        """
        Args:
            weights: Frozen extractor weights
            selection: Trained selection layers; small-random layers for every tap if omitted
            seed: Seed for the default selection layers
        """
        super().__init__(weights, seed=seed, **kwargs)
        self.selection = selection or init_selection(weights.arch.tap_channels, seed=seed)

    def trunk_features(self, image):
        return extract(image, self.weights)

    def features(self, image):
        return apply_selection(self.trunk_features(image), self.selection)

    def get_net_info(self):
        info = super().get_net_info()
        info['selection_taps'] = self.selection.taps
        return info
