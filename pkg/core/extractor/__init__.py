"""
Feature extractor.

A small VGG-style trunk with named taps, a weight container for loading
exported weights, and the learnable 1x1 selection layers used by LSeSim.
"""

from .arch import ArchSpec, LayerSpec, default_arch, vgg16_arch
from .extract import FeatureStack, extract, extract_backward
from .selection import (SelectionLayers, apply_selection, identity_selection, init_selection,
                        load_selection, save_selection, selection_backward)
from .weights import (ExtractorWeights, Normalization, init_random, load_weights, read_container,
                      save_weights, write_container)

__all__ = [
    'ArchSpec',
    'LayerSpec',
    'default_arch',
    'vgg16_arch',
    'ExtractorWeights',
    'Normalization',
    'init_random',
    'load_weights',
    'save_weights',
    'read_container',
    'write_container',
    'FeatureStack',
    'extract',
    'extract_backward',
    'SelectionLayers',
    'init_selection',
    'identity_selection',
    'apply_selection',
    'selection_backward',
    'save_selection',
    'load_selection',
]
